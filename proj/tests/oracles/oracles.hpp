#pragma once

// Brute-force reference implementations used only by the tests. They share no
// code with the library beyond the token types and favour obviousness over
// speed: n-grams are compared by linear scan, LCS by plain recursion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

using Seq = std::vector<std::string>;

inline std::vector<Seq> grams(const Seq& s, std::size_t n) {
  std::vector<Seq> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) out.emplace_back(s.begin() + i, s.begin() + i + n);
  return out;
}

inline std::size_t occurrences(const std::vector<Seq>& list, const Seq& g) {
  return static_cast<std::size_t>(std::count(list.begin(), list.end(), g));
}

inline std::vector<Seq> unique_of(const std::vector<Seq>& list) {
  std::vector<Seq> u;
  for (const auto& g : list)
    if (std::find(u.begin(), u.end(), g) == u.end()) u.push_back(g);
  return u;
}

/// Sentence BLEU: clipped counts against the max over references, effective
/// order min(4, |c|), zero precisions replaced by 1/(2|c|), closest reference
/// length with ties to the shorter, result on a 0-100 scale.
inline double bleu(const Seq& c, const std::vector<Seq>& refs, std::size_t max_n = 4) {
  const std::size_t order = std::min(max_n, c.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= order; ++n) {
    const auto cg = grams(c, n);
    std::size_t clipped = 0;
    for (const auto& g : unique_of(cg)) {
      std::size_t best_ref = 0;
      for (const auto& r : refs) best_ref = std::max(best_ref, occurrences(grams(r, n), g));
      clipped += std::min(occurrences(cg, g), best_ref);
    }
    double p = static_cast<double>(clipped) / static_cast<double>(cg.size());
    if (clipped == 0) p = 1.0 / (2.0 * static_cast<double>(c.size()));
    log_sum += std::log(p);
  }
  long best_len = -1, best_diff = 1L << 30;
  for (const auto& r : refs) {
    const long diff = std::labs(static_cast<long>(r.size()) - static_cast<long>(c.size()));
    if (diff < best_diff || (diff == best_diff && static_cast<long>(r.size()) < best_len)) {
      best_diff = diff;
      best_len = static_cast<long>(r.size());
    }
  }
  const double cl = static_cast<double>(c.size()), rl = static_cast<double>(best_len);
  const double bp = cl < rl ? std::exp(1.0 - rl / cl) : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(order));
}

inline std::size_t lcs(const Seq& x, const Seq& y, std::size_t i = 0, std::size_t j = 0) {
  if (i == x.size() || j == y.size()) return 0;
  if (x[i] == y[j]) return 1 + lcs(x, y, i + 1, j + 1);
  return std::max(lcs(x, y, i + 1, j), lcs(x, y, i, j + 1));
}

inline double rouge_l(const Seq& c, const std::vector<Seq>& refs) {
  double best = 0.0;
  for (const auto& r : refs) {
    const double l = static_cast<double>(lcs(c, r));
    if (l == 0) continue;
    const double p = l / static_cast<double>(c.size()), rc = l / static_cast<double>(r.size());
    best = std::max(best, 2 * p * rc / (p + rc));
  }
  return 100.0 * best;
}

template <class Metric>
double self_metric(const std::vector<Seq>& cands, Metric metric) {
  double sum = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    std::vector<Seq> others;
    for (std::size_t j = 0; j < cands.size(); ++j)
      if (j != i) others.push_back(cands[j]);
    sum += metric(cands[i], others);
  }
  return sum / static_cast<double>(cands.size());
}

inline std::vector<Seq> pooled(const std::vector<Seq>& sents, std::size_t n) {
  std::vector<Seq> all;
  for (const auto& s : sents)
    for (auto& g : grams(s, n)) all.push_back(g);
  return all;
}

inline double distinct(const std::vector<Seq>& sents, std::size_t n) {
  const auto all = pooled(sents, n);
  if (all.empty()) return 0.0;
  return 100.0 * static_cast<double>(unique_of(all).size()) / static_cast<double>(all.size());
}

inline double entropy(const std::vector<Seq>& sents, std::size_t n) {
  const auto all = pooled(sents, n);
  double h = 0.0;
  for (const auto& g : unique_of(all)) {
    const double p = static_cast<double>(occurrences(all, g)) / static_cast<double>(all.size());
    h -= p * std::log2(p);
  }
  return h;
}

/// Row-wise argmax of a score table, ties to the lowest column.
inline std::vector<std::size_t> argmax_rows(const std::vector<std::vector<double>>& table) {
  std::vector<std::size_t> out;
  for (const auto& row : table) {
    std::size_t best = 0;
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    out.push_back(best);
  }
  return out;
}

/// Counts of (t, u, w) trigrams over BOS BOS-padded, EOS-terminated sequences.
struct Trigram {
  std::string t, u, w;
  bool operator==(const Trigram&) const = default;
};

inline std::vector<std::pair<Trigram, std::size_t>> trigram_counts(const std::vector<Seq>& seqs) {
  std::vector<std::pair<Trigram, std::size_t>> out;
  for (const auto& s : seqs) {
    Seq padded{"<s>", "<s>"};
    padded.insert(padded.end(), s.begin(), s.end());
    padded.push_back("</s>");
    for (std::size_t i = 2; i < padded.size(); ++i) {
      Trigram g{padded[i - 2], padded[i - 1], padded[i]};
      auto it = std::find_if(out.begin(), out.end(), [&](const auto& e) { return e.first == g; });
      if (it == out.end())
        out.push_back({g, 1});
      else
        ++it->second;
    }
  }
  return out;
}

}  // namespace oracle
