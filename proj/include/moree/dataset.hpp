#pragma once

// Benchmark construction from concept-set records: pair clustering, graph
// path verification, embedding dedup, 3-5 target enforcement and splits with
// controlled unseen-pair ratios.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "moree/common.hpp"
#include "moree/example.hpp"
#include "moree/text.hpp"
#include "moree/vectors.hpp"

namespace moree::dataset {

struct SourceRecord {
  std::vector<Token> concepts;
  TokenSeq sentence;
};

struct LoadedRecords {
  std::vector<SourceRecord> records;
  std::vector<std::string> warnings;
};

/// Reads {"concepts": [...], "sentence": "..."} lines. Records whose concepts
/// do not all appear in the sentence are dropped with a warning.
inline LoadedRecords load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open records file: " + path);
  LoadedRecords out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    SourceRecord r;
    try {
      const auto j = nlohmann::json::parse(line);
      for (const auto& c : j.at("concepts")) r.concepts.push_back(ConceptPair::normalize(c.get<std::string>()));
      r.sentence = tokenize(j.at("sentence").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (r.concepts.empty()) throw DataError(where + ": empty concept set");
    bool ok = true;
    for (const auto& c : r.concepts) ok = ok && contains_concept(r.sentence, c);
    if (!ok) {
      out.warnings.push_back(where + ": sentence does not mention every concept; skipped");
      continue;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

/// Hex FNV-1a of the detokenized sentence; the key sentence vectors are
/// stored under.
inline std::string sentence_key(const TokenSeq& s) { return hex64(fnv1a64(detokenize(s))); }

struct ClusteredSentence {
  TokenSeq sentence;
  std::vector<Token> concepts;  // concept set of the source record

  bool operator==(const ClusteredSentence&) const = default;
};

using PairClusters = std::map<ConceptPair, std::vector<ClusteredSentence>>;

/// Every unordered concept pair of every record collects that record's
/// sentence; repeated sentences per pair are dropped (first one wins).
inline PairClusters cluster_pairs(const std::vector<SourceRecord>& records) {
  PairClusters out;
  std::map<ConceptPair, std::set<TokenSeq>> seen;
  for (const auto& r : records) {
    std::vector<Token> cs = r.concepts;
    std::sort(cs.begin(), cs.end());
    cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
    for (std::size_t i = 0; i < cs.size(); ++i)
      for (std::size_t j = i + 1; j < cs.size(); ++j) {
        const ConceptPair p{cs[i], cs[j]};
        if (seen[p].insert(r.sentence).second) out[p].push_back({r.sentence, r.concepts});
      }
  }
  return out;
}

class ConceptGraph {
 public:
  void add_edge(const Token& head, const std::string& relation, const Token& tail) {
    if (head == tail) return;
    if (!edges_.insert({head, relation, tail}).second) return;
    adj_[head].push_back({tail, relation});
    adj_[tail].push_back({head, relation});
  }

  bool contains(const Token& node) const { return adj_.count(node) != 0; }
  std::size_t edge_count() const { return edges_.size(); }

  struct Arc {
    Token node;
    std::string relation;
  };
  const std::vector<Arc>& neighbors(const Token& node) const {
    static const std::vector<Arc> kNone;
    auto it = adj_.find(node);
    return it == adj_.end() ? kNone : it->second;
  }

  /// "head <TAB> relation <TAB> tail" lines; node names are normalized.
  static ConceptGraph load_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open graph file: " + path);
    ConceptGraph g;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> f;
      std::size_t start = 0;
      for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1)
        f.push_back(line.substr(start, tab - start));
      f.push_back(line.substr(start));
      if (f.size() != 3) throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
      try {
        g.add_edge(ConceptPair::normalize(f[0]), f[1], ConceptPair::normalize(f[2]));
      } catch (const DataError& e) {
        throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return g;
  }

 private:
  std::set<std::tuple<Token, std::string, Token>> edges_;
  std::map<Token, std::vector<Arc>> adj_;
};

struct PathOptions {
  std::size_t max_depth = 3;
  // Empty = every relation counts.
  std::set<std::string> relations;
};

/// Undirected BFS from a to b in at most max_depth edges, passing only through
/// nodes of `sentence_concepts`.
inline bool verify_path(const ConceptGraph& g, const ConceptPair& pair, const std::vector<Token>& sentence_concepts,
                        const PathOptions& opt = {}) {
  if (opt.max_depth == 0) throw UsageError("verify_path: max_depth must be >= 1");
  if (!g.contains(pair.a) || !g.contains(pair.b)) return false;
  const std::set<Token> allowed(sentence_concepts.begin(), sentence_concepts.end());
  std::map<Token, std::size_t> depth{{pair.a, 0}};
  std::deque<Token> queue{pair.a};
  while (!queue.empty()) {
    const Token cur = queue.front();
    queue.pop_front();
    const std::size_t d = depth[cur];
    if (d == opt.max_depth) continue;
    for (const auto& arc : g.neighbors(cur)) {
      if (!opt.relations.empty() && !opt.relations.count(arc.relation)) continue;
      if (arc.node == pair.b) return true;
      if (!allowed.count(arc.node) || depth.count(arc.node)) continue;
      depth[arc.node] = d + 1;
      queue.push_back(arc.node);
    }
  }
  return false;
}

namespace detail {
inline const std::vector<double>& embedding_of(const WordVectors& emb, const TokenSeq& s) {
  const auto* v = emb.find(sentence_key(s));
  if (!v) throw DataError("no sentence embedding for \"" + detokenize(s) + "\" (key " + sentence_key(s) + ")");
  return *v;
}
}  // namespace detail

/// Greedy pass in input order: a sentence survives if its cosine with every
/// sentence kept so far is <= threshold.
inline std::vector<std::size_t> dedup_indices(const std::vector<const std::vector<double>*>& vecs,
                                              double threshold = 0.75) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    bool ok = true;
    for (std::size_t k : kept)
      if (cosine(*vecs[i], *vecs[k]) > threshold) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(i);
  }
  return kept;
}

inline std::vector<TokenSeq> dedup_filter(const std::vector<TokenSeq>& sents, const WordVectors& emb,
                                          double threshold = 0.75) {
  std::vector<const std::vector<double>*> vecs;
  for (const auto& s : sents) vecs.push_back(&detail::embedding_of(emb, s));
  std::vector<TokenSeq> out;
  for (std::size_t i : dedup_indices(vecs, threshold)) out.push_back(sents[i]);
  return out;
}

/// Farthest-point selection of `keep` items under cosine distance, seeded
/// with item 0; ties go to the lower index. Returned indices are ascending.
inline std::vector<std::size_t> farthest_point(const std::vector<const std::vector<double>*>& vecs,
                                               std::size_t keep) {
  if (vecs.empty() || keep == 0) return {};
  std::vector<std::size_t> chosen{0};
  std::vector<double> mind(vecs.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> taken(vecs.size(), false);
  taken[0] = true;
  while (chosen.size() < std::min(keep, vecs.size())) {
    const std::size_t last = chosen.back();
    std::size_t best = vecs.size();
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      if (taken[i]) continue;
      mind[i] = std::min(mind[i], 1.0 - cosine(*vecs[i], *vecs[last]));
      if (best == vecs.size() || mind[i] > mind[best]) best = i;
    }
    taken[best] = true;
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

inline constexpr std::size_t kMinTargets = 3;
inline constexpr std::size_t kMaxTargets = 5;

/// nullopt when fewer than 3 targets remain; more than 5 are cut down by
/// farthest-point selection (or to the first 5 with `first_five`).
inline std::optional<DatasetExample> enforce_target_count(const ConceptPair& pair, const std::vector<TokenSeq>& targets,
                                                          const WordVectors& emb, bool first_five = false) {
  if (targets.size() < kMinTargets) return std::nullopt;
  DatasetExample ex{pair, targets};
  if (targets.size() <= kMaxTargets) return ex;
  if (first_five) {
    ex.targets.resize(kMaxTargets);
    return ex;
  }
  std::vector<const std::vector<double>*> vecs;
  for (const auto& s : targets) vecs.push_back(&detail::embedding_of(emb, s));
  ex.targets.clear();
  for (std::size_t i : farthest_point(vecs, kMaxTargets)) ex.targets.push_back(targets[i]);
  return ex;
}

struct BuildOptions {
  PathOptions path;
  double dedup_threshold = 0.75;
  bool first_five = false;
};

struct BuildResult {
  std::vector<DatasetExample> examples;
  std::size_t pairs_seen = 0, pairs_too_few = 0;
  std::size_t sentences_no_path = 0, sentences_dup = 0;
};

/// cluster -> verify_path -> dedup -> 3..5 targets, in canonical pair order.
inline BuildResult build_examples(const std::vector<SourceRecord>& records, const ConceptGraph& graph,
                                  const WordVectors& emb, const BuildOptions& opt = {}) {
  BuildResult out;
  for (const auto& [pair, sents] : cluster_pairs(records)) {
    ++out.pairs_seen;
    std::vector<TokenSeq> verified;
    for (const auto& cs : sents) {
      if (verify_path(graph, pair, cs.concepts, opt.path))
        verified.push_back(cs.sentence);
      else
        ++out.sentences_no_path;
    }
    if (verified.size() < kMinTargets) {
      ++out.pairs_too_few;
      continue;
    }
    auto kept = dedup_filter(verified, emb, opt.dedup_threshold);
    out.sentences_dup += verified.size() - kept.size();
    if (auto ex = enforce_target_count(pair, kept, emb, opt.first_five))
      out.examples.push_back(std::move(*ex));
    else
      ++out.pairs_too_few;
  }
  return out;
}

// ---- splits ----------------------------------------------------------------------

struct SplitSpec {
  std::size_t train = 0, dev = 0, test = 0;
  double dev_unseen = 0.9173;
  double test_unseen = 0.9831;
  double tolerance = 0.02;
  std::size_t move_budget = 20000;
  std::uint64_t seed = 1;
};

struct SplitResult {
  std::vector<DatasetExample> train, dev, test;
  std::vector<bool> dev_unseen, test_unseen;
  double dev_ratio = 0.0, test_ratio = 0.0;
  std::size_t moves = 0;
  bool within_tolerance = false;
  std::vector<std::string> warnings;
};

/// covers[e] = examples whose pair is stem-covered by some target of e.
inline std::vector<std::vector<std::size_t>> cover_lists(const std::vector<DatasetExample>& ex) {
  std::unordered_map<std::string, std::vector<std::size_t>> by_form;  // concept-a form -> examples
  for (std::size_t f = 0; f < ex.size(); ++f)
    for (const auto& form : stem_forms(ex[f].pair.a)) by_form[form].push_back(f);
  std::vector<std::vector<std::size_t>> covers(ex.size());
  for (std::size_t e = 0; e < ex.size(); ++e) {
    std::set<std::size_t> hit;
    for (const auto& s : ex[e].targets) {
      std::set<std::size_t> cand;
      for (const auto& t : s)
        for (const auto& form : stem_forms(t))
          if (auto it = by_form.find(form); it != by_form.end()) cand.insert(it->second.begin(), it->second.end());
      for (std::size_t f : cand)
        if (!hit.count(f) && ex[f].pair.covered_by(s)) hit.insert(f);
    }
    covers[e].assign(hit.begin(), hit.end());
  }
  return covers;
}

/// Brute-force unseen flags: pair never co-occurs in a training target.
inline std::vector<bool> unseen_flags(const std::vector<DatasetExample>& train,
                                      const std::vector<DatasetExample>& eval) {
  std::vector<bool> out;
  for (const auto& e : eval) {
    bool seen = false;
    for (const auto& t : train)
      for (const auto& s : t.targets) seen = seen || e.pair.covered_by(s);
    out.push_back(!seen);
  }
  return out;
}

/// Seeded shuffle into train/dev/test, then random swaps (kept when they do
/// not move the unseen ratios further from their targets) until both ratios
/// are within tolerance or the move budget runs out.
inline SplitResult split(const std::vector<DatasetExample>& examples, const SplitSpec& spec) {
  if (spec.train + spec.dev + spec.test != examples.size())
    throw UsageError("split: sizes " + std::to_string(spec.train) + "+" + std::to_string(spec.dev) + "+" +
                     std::to_string(spec.test) + " do not sum to " + std::to_string(examples.size()));
  if (spec.dev_unseen < 0 || spec.dev_unseen > 1 || spec.test_unseen < 0 || spec.test_unseen > 1)
    throw UsageError("split: unseen ratios must be in [0, 1]");
  const std::size_t n = examples.size();
  const auto covers = cover_lists(examples);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(spec.seed, "split"));
  rng.shuffle(order);

  enum : int { kTrain = 0, kDev = 1, kTest = 2 };
  std::vector<int> where(n);
  std::vector<std::vector<std::size_t>> members(3);
  for (std::size_t r = 0; r < n; ++r) {
    const int s = r < spec.train ? kTrain : r < spec.train + spec.dev ? kDev : kTest;
    where[order[r]] = s;
    members[s].push_back(order[r]);
  }
  std::vector<std::size_t> cover(n, 0);  // training examples covering each pair
  for (std::size_t e = 0; e < n; ++e)
    if (where[e] == kTrain)
      for (std::size_t f : covers[e]) ++cover[f];
  std::size_t unseen[3] = {0, 0, 0};
  for (std::size_t e = 0; e < n; ++e)
    if (where[e] != kTrain && cover[e] == 0) ++unseen[where[e]];

  auto ratio = [&](int s) {
    return members[s].empty() ? 0.0 : static_cast<double>(unseen[s]) / static_cast<double>(members[s].size());
  };
  auto gap = [&]() {
    const double d = spec.dev ? std::fabs(ratio(kDev) - spec.dev_unseen) : 0.0;
    const double t = spec.test ? std::fabs(ratio(kTest) - spec.test_unseen) : 0.0;
    return std::pair{d + t, std::max(d, t)};
  };
  // Moves example e into split s, updating cover counts and unseen tallies.
  auto relocate = [&](std::size_t e, int s) {
    const int from = where[e];
    if (from != kTrain && cover[e] == 0) --unseen[from];
    where[e] = s;
    if (from == kTrain || s == kTrain) {
      for (std::size_t f : covers[e]) {
        const bool was_unseen = cover[f] == 0;
        if (from == kTrain) --cover[f];
        else ++cover[f];
        const bool now_unseen = cover[f] == 0;
        if (f != e && where[f] != kTrain && was_unseen != now_unseen) now_unseen ? ++unseen[where[f]] : --unseen[where[f]];
      }
    }
    if (s != kTrain && cover[e] == 0) ++unseen[s];
  };

  SplitResult res;
  const bool can_move = spec.dev + spec.test > 0 && (spec.train > 0 || (spec.dev > 0 && spec.test > 0));
  auto done = [&]() { return gap().second <= spec.tolerance + 1e-12; };
  while (can_move && !done() && res.moves < spec.move_budget) {
    ++res.moves;
    int s1, s2;
    const auto kind = rng.uniform_index(3);
    if (spec.dev > 0 && spec.test > 0 && (kind == 2 || spec.train == 0)) {
      s1 = kDev;
      s2 = kTest;
    } else {
      s1 = kTrain;
      s2 = spec.dev == 0 ? kTest : spec.test == 0 ? kDev : (kind == 0 ? kDev : kTest);
    }
    if (members[s1].empty() || members[s2].empty()) continue;
    const std::size_t i1 = rng.uniform_index(members[s1].size()), i2 = rng.uniform_index(members[s2].size());
    const std::size_t e1 = members[s1][i1], e2 = members[s2][i2];
    const double before = gap().first;
    relocate(e1, s2);
    relocate(e2, s1);
    if (gap().first <= before) {
      members[s1][i1] = e2;
      members[s2][i2] = e1;
    } else {
      relocate(e2, s2);
      relocate(e1, s1);
    }
  }
  res.within_tolerance = done();
  if (!res.within_tolerance)
    res.warnings.push_back("split: unseen ratios not within tolerance after " + std::to_string(res.moves) + " moves");

  for (auto& m : members) std::sort(m.begin(), m.end());
  for (std::size_t e : members[kTrain]) res.train.push_back(examples[e]);
  for (std::size_t e : members[kDev]) {
    res.dev.push_back(examples[e]);
    res.dev_unseen.push_back(cover[e] == 0);
  }
  for (std::size_t e : members[kTest]) {
    res.test.push_back(examples[e]);
    res.test_unseen.push_back(cover[e] == 0);
  }
  res.dev_ratio = ratio(kDev);
  res.test_ratio = ratio(kTest);
  return res;
}

// ---- statistics -------------------------------------------------------------------

struct DatasetStats {
  std::size_t n_train = 0, n_dev = 0, n_test = 0;
  double dev_unseen = 0.0, test_unseen = 0.0;  // percentages
  double avg_refs_train = 0.0, avg_refs_dev = 0.0, avg_refs_test = 0.0;
  double share3 = 0.0, share4 = 0.0, share5 = 0.0;  // percentages over all examples

  bool operator==(const DatasetStats&) const = default;
};

inline DatasetStats stats(const std::vector<DatasetExample>& train, const std::vector<DatasetExample>& dev,
                          const std::vector<DatasetExample>& test, const std::vector<bool>& dev_unseen,
                          const std::vector<bool>& test_unseen) {
  DatasetStats s;
  s.n_train = train.size();
  s.n_dev = dev.size();
  s.n_test = test.size();
  auto pct = [](const std::vector<bool>& f) {
    if (f.empty()) return 0.0;
    return 100.0 * static_cast<double>(std::count(f.begin(), f.end(), true)) / static_cast<double>(f.size());
  };
  s.dev_unseen = pct(dev_unseen);
  s.test_unseen = pct(test_unseen);
  std::size_t hist[3] = {0, 0, 0}, all = 0;
  auto avg = [&](const std::vector<DatasetExample>& xs) {
    if (xs.empty()) return 0.0;
    std::size_t refs = 0;
    for (const auto& x : xs) {
      refs += x.targets.size();
      if (x.targets.size() >= 3 && x.targets.size() <= 5) ++hist[x.targets.size() - 3];
      ++all;
    }
    return static_cast<double>(refs) / static_cast<double>(xs.size());
  };
  s.avg_refs_train = avg(train);
  s.avg_refs_dev = avg(dev);
  s.avg_refs_test = avg(test);
  if (all) {
    s.share3 = 100.0 * static_cast<double>(hist[0]) / static_cast<double>(all);
    s.share4 = 100.0 * static_cast<double>(hist[1]) / static_cast<double>(all);
    s.share5 = 100.0 * static_cast<double>(hist[2]) / static_cast<double>(all);
  }
  return s;
}

inline DatasetStats stats(const SplitResult& r) { return stats(r.train, r.dev, r.test, r.dev_unseen, r.test_unseen); }

namespace detail {
inline std::string thousands(std::size_t v) {
  std::string digits = std::to_string(v), out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}
inline std::string f2(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << v;
  return ss.str();
}
inline std::string cell(const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); }
}  // namespace detail

/// Fixed-layout text table (two-decimal values, thousands separators).
inline std::string render_stats(const DatasetStats& s) {
  using detail::cell;
  std::string out;
  auto row = [&](const std::string& label, const std::string& a, const std::string& b, const std::string& c) {
    out += cell(label, 18) + cell(a, 10) + cell(b, 10) + c + "\n";
  };
  row("", "Train", "Dev", "Test");
  row("Examples", detail::thousands(s.n_train), detail::thousands(s.n_dev), detail::thousands(s.n_test));
  row("Unseen ratio (%)", "-", detail::f2(s.dev_unseen), detail::f2(s.test_unseen));
  row("Avg. ref. number", detail::f2(s.avg_refs_train), detail::f2(s.avg_refs_dev), detail::f2(s.avg_refs_test));
  out += cell("Refs 3/4/5 (%)", 18) + detail::f2(s.share3) + " / " + detail::f2(s.share4) + " / " +
         detail::f2(s.share5) + "\n";
  return out;
}

inline DatasetStats parse_stats(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  if (lines.size() < 5) throw DataError("stats: expected 5 lines");
  auto fields = [](const std::string& l, std::size_t skip) {
    std::istringstream ss(l.substr(std::min(skip, l.size())));
    std::vector<std::string> f;
    for (std::string x; ss >> x;) f.push_back(x);
    return f;
  };
  auto num = [](std::string x) {
    x.erase(std::remove(x.begin(), x.end(), ','), x.end());
    try {
      return std::stod(x);
    } catch (const std::exception&) {
      throw DataError("stats: bad number '" + x + "'");
    }
  };
  DatasetStats s;
  auto c = fields(lines[1], 18), u = fields(lines[2], 18), a = fields(lines[3], 18), h = fields(lines[4], 18);
  if (c.size() != 3 || u.size() != 3 || a.size() != 3 || h.size() != 5) throw DataError("stats: malformed table");
  s.n_train = static_cast<std::size_t>(num(c[0]));
  s.n_dev = static_cast<std::size_t>(num(c[1]));
  s.n_test = static_cast<std::size_t>(num(c[2]));
  s.dev_unseen = num(u[1]);
  s.test_unseen = num(u[2]);
  s.avg_refs_train = num(a[0]);
  s.avg_refs_dev = num(a[1]);
  s.avg_refs_test = num(a[2]);
  s.share3 = num(h[0]);
  s.share4 = num(h[2]);
  s.share5 = num(h[4]);
  return s;
}

inline nlohmann::json stats_json(const DatasetStats& s) {
  return {{"examples", {{"train", s.n_train}, {"dev", s.n_dev}, {"test", s.n_test}}},
          {"unseen_ratio", {{"dev", s.dev_unseen}, {"test", s.test_unseen}}},
          {"avg_refs", {{"train", s.avg_refs_train}, {"dev", s.avg_refs_dev}, {"test", s.avg_refs_test}}},
          {"ref_share", {{"3", s.share3}, {"4", s.share4}, {"5", s.share5}}}};
}

// ---- example I/O -------------------------------------------------------------------

inline nlohmann::json example_json(const DatasetExample& ex) {
  std::vector<std::string> t;
  for (const auto& s : ex.targets) t.push_back(detokenize(s));
  return {{"pair", {ex.pair.a, ex.pair.b}}, {"targets", t}};
}

inline void write_examples(const std::string& path, const std::vector<DatasetExample>& xs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& x : xs) out << example_json(x).dump() << "\n";
}

inline std::vector<DatasetExample> read_examples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::vector<DatasetExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      const auto& p = j.at("pair");
      if (!p.is_array() || p.size() != 2) throw DataError("\"pair\" must hold two concepts");
      DatasetExample ex{ConceptPair::make(p[0].get<std::string>(), p[1].get<std::string>()), {}};
      for (const auto& t : j.at("targets")) ex.targets.push_back(tokenize(t.get<std::string>()));
      if (ex.targets.empty()) throw DataError("no targets");
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace moree::dataset
