#pragma once

// Quality and diversity metrics for sets of generated sentences. All scores
// except Entropy-n are on a 0-100 scale.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "moree/common.hpp"
#include "moree/text.hpp"

namespace moree::metrics {

/// Sentence BLEU with clipped multi-reference counts. The order is
/// min(max_n, |candidate|), so short candidates can still reach 100; zero
/// precisions are floored at 1 / (2 |candidate|).
inline double bleu(const TokenSeq& cand, const std::vector<TokenSeq>& refs, std::size_t max_n = 4) {
  if (cand.empty()) throw UsageError("bleu: empty candidate");
  if (refs.empty()) throw UsageError("bleu: no references");
  if (max_n == 0) throw UsageError("bleu: max_n must be >= 1");
  const std::size_t order = std::min(max_n, cand.size());
  const double c = static_cast<double>(cand.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= order; ++n) {
    std::map<NGram, std::size_t> cand_counts, max_ref;
    for (auto& g : ngrams(cand, n)) ++cand_counts[g];
    for (const auto& r : refs) {
      std::map<NGram, std::size_t> rc;
      for (auto& g : ngrams(r, n)) ++rc[g];
      for (const auto& [g, k] : rc) max_ref[g] = std::max(max_ref[g], k);
    }
    std::size_t clipped = 0, total = 0;
    for (const auto& [g, k] : cand_counts) {
      total += k;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(k, it->second);
    }
    double p = static_cast<double>(clipped) / static_cast<double>(total);
    if (clipped == 0) p = 1.0 / (2.0 * c);
    log_sum += std::log(p);
  }
  // Closest reference length; ties go to the shorter one.
  std::size_t r = refs.front().size();
  for (const auto& ref : refs) {
    const auto d = [&](std::size_t len) { return len > cand.size() ? len - cand.size() : cand.size() - len; };
    if (d(ref.size()) < d(r) || (d(ref.size()) == d(r) && ref.size() < r)) r = ref.size();
  }
  const double bp = cand.size() < r ? std::exp(1.0 - static_cast<double>(r) / c) : 1.0;
  return std::clamp(100.0 * bp * std::exp(log_sum / static_cast<double>(order)), 0.0, 100.0);
}

inline std::size_t lcs_length(const TokenSeq& x, const TokenSeq& y) {
  std::vector<std::size_t> prev(y.size() + 1, 0), cur(y.size() + 1, 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j)
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

/// LCS-based F1, best over references.
inline double rouge_l(const TokenSeq& cand, const std::vector<TokenSeq>& refs) {
  if (cand.empty()) throw UsageError("rouge_l: empty candidate");
  if (refs.empty()) throw UsageError("rouge_l: no references");
  double best = 0.0;
  for (const auto& r : refs) {
    if (r.empty()) continue;
    const double l = static_cast<double>(lcs_length(cand, r));
    if (l == 0.0) continue;
    const double p = l / static_cast<double>(cand.size()), rc = l / static_cast<double>(r.size());
    best = std::max(best, 2.0 * p * rc / (p + rc));
  }
  return 100.0 * best;
}

enum class Metric { kBleu4, kRougeL };

inline double score(Metric m, const TokenSeq& cand, const std::vector<TokenSeq>& refs) {
  return m == Metric::kBleu4 ? bleu(cand, refs, 4) : rouge_l(cand, refs);
}

/// Best candidate score against the references.
inline double topk_quality(const std::vector<TokenSeq>& cands, const std::vector<TokenSeq>& refs, Metric m) {
  if (cands.empty()) throw UsageError("topk_quality: no candidates");
  double best = 0.0;
  for (const auto& c : cands) best = std::max(best, score(m, c, refs));
  return best;
}

/// Mean over candidates of metric(c_i, all other candidates).
inline double self_metric(const std::vector<TokenSeq>& cands, Metric m) {
  if (cands.size() < 2) throw UsageError("self_metric: need at least 2 candidates");
  double sum = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    std::vector<TokenSeq> others;
    for (std::size_t j = 0; j < cands.size(); ++j)
      if (j != i) others.push_back(cands[j]);
    sum += score(m, cands[i], others);
  }
  return sum / static_cast<double>(cands.size());
}

/// Percentage of sentences (or, per set, of sets with at least one sentence)
/// that stem-contain both concepts.
inline double success_rate(const std::vector<ConceptPair>& pairs, const std::vector<std::vector<TokenSeq>>& sets,
                           bool per_set = false) {
  if (pairs.size() != sets.size()) throw UsageError("success_rate: pairs and sets are misaligned");
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::size_t covered = 0;
    for (const auto& s : sets[i]) covered += pairs[i].covered_by(s);
    if (per_set) {
      hit += covered > 0;
      ++total;
    } else {
      hit += covered;
      total += sets[i].size();
    }
  }
  return total ? 100.0 * static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

inline std::map<NGram, std::size_t> ngram_counts(const std::vector<TokenSeq>& sents, std::size_t n) {
  std::map<NGram, std::size_t> counts;
  for (const auto& s : sents)
    for (auto& g : ngrams(s, n)) ++counts[g];
  return counts;
}

inline double distinct_n(const std::vector<TokenSeq>& sents, std::size_t n) {
  const auto counts = ngram_counts(sents, n);
  std::size_t total = 0;
  for (const auto& [g, c] : counts) total += c;
  return total ? 100.0 * static_cast<double>(counts.size()) / static_cast<double>(total) : 0.0;
}

/// Shannon entropy (bits) of the pooled n-gram distribution.
inline double entropy_n(const std::vector<TokenSeq>& sents, std::size_t n) {
  const auto counts = ngram_counts(sents, n);
  std::size_t total = 0;
  for (const auto& [g, c] : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (const auto& [g, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return std::max(0.0, h);
}

struct MetricReport {
  std::string name = "model";
  double bleu4 = 0, rouge_l = 0, success_rate = 0;
  double self_bleu4 = 0, self_rouge_l = 0;
  double entropy4 = 0, distinct4 = 0;
  std::size_t n_pairs = 0, n_candidates = 0;
  bool success_per_set = false;
};

struct EvalItem {
  ConceptPair pair;
  std::vector<TokenSeq> candidates;
  std::vector<TokenSeq> references;
};

inline MetricReport evaluate_all(const std::vector<EvalItem>& items, bool success_per_set = false,
                                 std::string name = "model") {
  MetricReport r;
  r.name = std::move(name);
  r.success_per_set = success_per_set;
  r.n_pairs = items.size();
  if (items.empty()) return r;
  std::vector<ConceptPair> pairs;
  std::vector<std::vector<TokenSeq>> sets;
  std::vector<TokenSeq> pooled;
  double self_pairs = 0;
  for (const auto& it : items) {
    if (it.candidates.empty()) throw UsageError("evaluate_all: pair " + it.pair.str() + " has no candidates");
    if (it.references.empty()) throw UsageError("evaluate_all: pair " + it.pair.str() + " has no references");
    r.bleu4 += topk_quality(it.candidates, it.references, Metric::kBleu4);
    r.rouge_l += topk_quality(it.candidates, it.references, Metric::kRougeL);
    if (it.candidates.size() >= 2) {
      r.self_bleu4 += self_metric(it.candidates, Metric::kBleu4);
      r.self_rouge_l += self_metric(it.candidates, Metric::kRougeL);
      ++self_pairs;
    }
    pairs.push_back(it.pair);
    sets.push_back(it.candidates);
    pooled.insert(pooled.end(), it.candidates.begin(), it.candidates.end());
    r.n_candidates += it.candidates.size();
  }
  const double n = static_cast<double>(items.size());
  r.bleu4 /= n;
  r.rouge_l /= n;
  if (self_pairs > 0) {
    r.self_bleu4 /= self_pairs;
    r.self_rouge_l /= self_pairs;
  }
  r.success_rate = success_rate(pairs, sets, success_per_set);
  r.entropy4 = entropy_n(pooled, 4);
  r.distinct4 = distinct_n(pooled, 4);
  return r;
}

// ---- rendering ----------------------------------------------------------------

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{"BLEU-4", "ROUGE-L", "Success", "Self-BLEU-4",
                                             "Self-ROUGE-L", "Entropy-4", "Distinct-4"};
  return cols;
}

inline std::vector<double> report_values(const MetricReport& r) {
  return {r.bleu4, r.rouge_l, r.success_rate, r.self_bleu4, r.self_rouge_l, r.entropy4, r.distinct4};
}

inline std::string fmt2(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << v;
  return ss.str();
}

inline std::string render_tsv(const std::vector<MetricReport>& rows) {
  std::string out = "model";
  for (const auto& c : report_columns()) out += "\t" + c;
  out += "\n";
  for (const auto& r : rows) {
    out += r.name;
    for (double v : report_values(r)) out += "\t" + fmt2(v);
    out += "\n";
  }
  return out;
}

/// Parses render_tsv output (values come back at two-decimal precision).
inline std::vector<MetricReport> parse_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("report: empty input");
  std::vector<MetricReport> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1)
      f.push_back(line.substr(start, tab - start));
    f.push_back(line.substr(start));
    if (f.size() != 8) throw DataError("report line " + std::to_string(lineno) + ": expected 8 fields");
    MetricReport r;
    r.name = f[0];
    double* dst[] = {&r.bleu4, &r.rouge_l, &r.success_rate, &r.self_bleu4, &r.self_rouge_l, &r.entropy4, &r.distinct4};
    for (int i = 0; i < 7; ++i) {
      try {
        *dst[i] = std::stod(f[i + 1]);
      } catch (const std::exception&) {
        throw DataError("report line " + std::to_string(lineno) + ": bad number '" + f[i + 1] + "'");
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace detail {
// Display width, counting each UTF-8 sequence as one column.
inline std::size_t width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
  return w;
}
inline std::string pad(const std::string& s, std::size_t w, bool right) {
  const std::string fill(w > width(s) ? w - width(s) : 0, ' ');
  return right ? fill + s : s + fill;
}
}  // namespace detail

/// Aligned table; quality and corpus-diversity columns are marked ↑,
/// pairwise-diversity columns ↓.
inline std::string render_table(const std::vector<MetricReport>& rows) {
  static const char* arrows[] = {"↑", "↑", "↑", "↓", "↓", "↑", "↑"};
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"Model"};
  for (std::size_t i = 0; i < report_columns().size(); ++i) head.push_back(report_columns()[i] + " " + arrows[i]);
  cells.push_back(head);
  for (const auto& r : rows) {
    std::vector<std::string> row{r.name};
    for (double v : report_values(r)) row.push_back(fmt2(v));
    cells.push_back(row);
  }
  std::vector<std::size_t> w(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) w[i] = std::max(w[i], detail::width(row[i]));
  std::string out;
  for (std::size_t ri = 0; ri < cells.size(); ++ri) {
    for (std::size_t i = 0; i < cells[ri].size(); ++i) {
      if (i) out += "  ";
      out += detail::pad(cells[ri][i], w[i], i > 0);
    }
    out += "\n";
    if (ri == 0) {
      std::size_t total = 0;
      for (auto x : w) total += x;
      out += std::string(total + 2 * (w.size() - 1), '-') + "\n";
    }
  }
  return out;
}

}  // namespace moree::metrics
