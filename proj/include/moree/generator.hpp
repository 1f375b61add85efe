#pragma once

// Mixture of generators over a copy-augmented backoff trigram LM.
//
//   p(w | h) = lam * p_copy(w) + (1 - lam) * (beta * p_expert(w | h) + (1 - beta) * p_bg(w | h))
//
// p_copy is the relative frequency of w among the content tokens of the
// composed input (concepts and context tokens). The n-gram terms use add-k
// smoothing that backs off trigram -> bigram -> unigram:
//
//   p_uni(w)      = (c(w) + k) / (N + kV)
//   p_bi(w | u)   = (c(u,w) + kV p_uni(w)) / (c(u.) + kV)
//   p_tri(w | tu) = (c(t,u,w) + kV p_bi(w | u)) / (c(t,u.) + kV)
//
// where V counts every vocabulary entry except BOS. Each level is a proper
// distribution, so every step distribution sums to one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "moree/common.hpp"
#include "moree/example.hpp"
#include "moree/moe.hpp"
#include "moree/text.hpp"

namespace moree::generation {

using TokenId = std::uint32_t;

inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kUnk = 2;

class Vocabulary {
 public:
  Vocabulary() {
    for (const char* t : {"<s>", "</s>", "<unk>"}) add(t);
  }

  TokenId add(const Token& t) {
    auto [it, fresh] = ids_.emplace(t, static_cast<TokenId>(tokens_.size()));
    if (fresh) tokens_.push_back(t);
    return it->second;
  }

  /// kUnk for unknown tokens.
  TokenId id(const Token& t) const {
    auto it = ids_.find(t);
    return it == ids_.end() ? kUnk : it->second;
  }
  bool contains(const Token& t) const { return ids_.count(t) != 0; }
  const Token& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<Token>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<Token> tokens_;
  std::unordered_map<Token, TokenId> ids_;
};

/// Unigram, bigram and trigram counts with BOS BOS padding and an EOS terminal.
class NgramTable {
 public:
  struct Row {
    std::uint64_t total = 0;
    std::unordered_map<TokenId, std::uint64_t> next;
  };

  NgramTable() = default;
  NgramTable(std::size_t vocab_size, double add_k) : vocab_size_(vocab_size), k_(add_k) {
    if (vocab_size < 4) throw UsageError("NgramTable: vocabulary too small");
    if (!(add_k > 0.0) || !std::isfinite(add_k)) throw UsageError("NgramTable: add-k must be positive");
    uni_.assign(vocab_size, 0);
  }

  void add_sequence(const std::vector<TokenId>& ids) {
    TokenId t = kBos, u = kBos;
    for (std::size_t j = 0; j <= ids.size(); ++j) {
      const TokenId w = j < ids.size() ? ids[j] : kEos;
      if (w >= vocab_size_ || w == kBos) throw UsageError("NgramTable: token id out of range");
      bump(t, u, w, 1);
      t = u;
      u = w;
    }
    ++sequences_;
  }

  /// Adds one raw n-gram observation (used when loading checkpoints).
  void add_trigram(TokenId t, TokenId u, TokenId w, std::uint64_t c) { bump(t, u, w, c); }

  bool empty() const { return total_ == 0; }
  std::size_t sequences() const { return sequences_; }
  std::uint64_t total() const { return total_; }

  std::uint64_t count(TokenId w) const { return w < uni_.size() ? uni_[w] : 0; }
  std::uint64_t count(TokenId u, TokenId w) const {
    auto it = bi_.find(u);
    if (it == bi_.end()) return 0;
    auto jt = it->second.next.find(w);
    return jt == it->second.next.end() ? 0 : jt->second;
  }
  std::uint64_t count(TokenId t, TokenId u, TokenId w) const {
    auto it = tri_.find(pack(t, u));
    if (it == tri_.end()) return 0;
    auto jt = it->second.next.find(w);
    return jt == it->second.next.end() ? 0 : jt->second;
  }

  double prob(TokenId t, TokenId u, TokenId w) const {
    if (w == kBos || w >= vocab_size_) return 0.0;
    const double kv = k_ * static_cast<double>(vocab_size_ - 1);
    double p = unigram(w);
    if (auto it = bi_.find(u); it != bi_.end()) p = (lookup(it->second, w) + kv * p) / (it->second.total + kv);
    if (auto it = tri_.find(pack(t, u)); it != tri_.end())
      p = (lookup(it->second, w) + kv * p) / (it->second.total + kv);
    return p;
  }

  /// Full next-token distribution after history (t, u), written into `out`.
  void distribution(TokenId t, TokenId u, std::vector<double>& out) const {
    out.assign(vocab_size_, 0.0);
    for (std::size_t w = 1; w < vocab_size_; ++w) out[w] = unigram(static_cast<TokenId>(w));
    const double kv = k_ * static_cast<double>(vocab_size_ - 1);
    auto apply = [&](const Row& row) {
      const double denom = static_cast<double>(row.total) + kv;
      for (std::size_t w = 1; w < out.size(); ++w) out[w] = kv * out[w] / denom;
      for (const auto& [w, c] : row.next) out[w] += static_cast<double>(c) / denom;
    };
    if (auto it = bi_.find(u); it != bi_.end()) apply(it->second);
    if (auto it = tri_.find(pack(t, u)); it != tri_.end()) apply(it->second);
  }

  nlohmann::json to_json() const {
    std::vector<std::array<std::uint64_t, 4>> rows;
    for (const auto& [key, row] : tri_)
      for (const auto& [w, c] : row.next) rows.push_back({key >> 32, key & 0xffffffffu, w, c});
    std::sort(rows.begin(), rows.end());
    return {{"sequences", sequences_}, {"trigrams", rows}};
  }

  static NgramTable from_json(const nlohmann::json& j, std::size_t vocab_size, double add_k) {
    NgramTable t(vocab_size, add_k);
    for (const auto& r : j.at("trigrams")) {
      const auto a = r.get<std::array<std::uint64_t, 4>>();
      for (int i = 0; i < 3; ++i)
        if (a[i] >= vocab_size) throw DataError("generator checkpoint: token id out of range");
      t.add_trigram(static_cast<TokenId>(a[0]), static_cast<TokenId>(a[1]), static_cast<TokenId>(a[2]), a[3]);
    }
    t.sequences_ = j.at("sequences").get<std::size_t>();
    return t;
  }

 private:
  static std::uint64_t pack(TokenId t, TokenId u) { return (static_cast<std::uint64_t>(t) << 32) | u; }
  static double lookup(const Row& r, TokenId w) {
    auto it = r.next.find(w);
    return it == r.next.end() ? 0.0 : static_cast<double>(it->second);
  }

  // Every trigram (t,u,w) carries exactly one bigram (u,w) and one unigram w,
  // so the lower orders are implied by the trigram stream.
  void bump(TokenId t, TokenId u, TokenId w, std::uint64_t c) {
    uni_.at(w) += c;
    total_ += c;
    auto& b = bi_[u];
    b.total += c;
    b.next[w] += c;
    auto& r = tri_[pack(t, u)];
    r.total += c;
    r.next[w] += c;
  }

  double unigram(TokenId w) const {
    const double kv = k_ * static_cast<double>(vocab_size_ - 1);
    return (static_cast<double>(uni_[w]) + k_) / (static_cast<double>(total_) + kv);
  }

  std::size_t vocab_size_ = 0;
  double k_ = 0.01;
  std::size_t sequences_ = 0;
  std::uint64_t total_ = 0;
  std::vector<std::uint64_t> uni_;
  std::unordered_map<TokenId, Row> bi_;
  std::unordered_map<std::uint64_t, Row> tri_;
};

struct GeneratorConfig {
  double lambda = 0.5;
  double beta = 0.7;
  double add_k = 0.01;

  void validate() const {
    if (!(lambda >= 0.0 && lambda < 1.0)) throw UsageError("generator: lambda must be in [0, 1)");
    if (!(beta >= 0.0 && beta <= 1.0)) throw UsageError("generator: beta must be in [0, 1]");
    if (!(add_k > 0.0) || !std::isfinite(add_k)) throw UsageError("generator: add_k must be positive");
  }
};

struct ComposedGeneratorInput {
  ExpertIdentifier expert;
  ConceptPair pair;
  std::vector<TokenSeq> contexts;

  /// prefix [CLS] a [SEP] b [SEP] s1 [SEP] ... [SEP] sk
  TokenSeq rendered() const {
    TokenSeq out = expert.prefix;
    out.push_back(kCls);
    out.push_back(pair.a);
    out.push_back(kSep);
    out.push_back(pair.b);
    for (const auto& s : contexts) {
      out.push_back(kSep);
      out.insert(out.end(), s.begin(), s.end());
    }
    return out;
  }

  /// The rendered input minus the prefix and reserved tokens.
  TokenSeq content_tokens() const {
    TokenSeq out{pair.a, pair.b};
    for (const auto& s : contexts)
      for (const auto& t : s)
        if (!is_reserved(t)) out.push_back(t);
    return out;
  }
};

struct GeneratorModel {
  GeneratorConfig config;
  Vocabulary vocab;
  NgramTable background;
  std::vector<NgramTable> experts;
  std::vector<ExpertIdentifier> prefixes;
  std::uint64_t seed = 0;

  std::size_t n_experts() const { return experts.size(); }

  std::vector<TokenId> encode(const TokenSeq& seq) const {
    std::vector<TokenId> ids;
    ids.reserve(seq.size());
    for (const auto& t : seq) ids.push_back(vocab.id(t));
    return ids;
  }

  TokenSeq decode(const std::vector<TokenId>& ids) const {
    TokenSeq out;
    for (TokenId id : ids) out.push_back(vocab.token(id));
    return out;
  }

  NgramTable empty_table() const { return NgramTable(vocab.size(), config.add_k); }

  /// Fresh model: vocabulary from the given token streams plus `extra`, empty
  /// expert tables, background counts from `background_targets`.
  static GeneratorModel create(const GeneratorConfig& cfg, std::vector<ExpertIdentifier> prefixes,
                               const std::vector<const TokenSeq*>& vocab_sources, const std::vector<Token>& extra,
                               const std::vector<TokenSeq>& background_targets, std::uint64_t seed) {
    cfg.validate();
    if (prefixes.empty()) throw UsageError("generator: need at least one expert");
    GeneratorModel m;
    m.config = cfg;
    m.seed = seed;
    m.prefixes = std::move(prefixes);
    for (const auto* s : vocab_sources)
      for (const auto& t : *s)
        if (!is_reserved(t)) m.vocab.add(t);
    for (const auto& t : extra) m.vocab.add(t);
    for (const auto& s : background_targets)
      for (const auto& t : s) m.vocab.add(t);
    m.background = m.empty_table();
    for (const auto& s : background_targets) m.background.add_sequence(m.encode(s));
    m.experts.assign(m.prefixes.size(), m.empty_table());
    return m;
  }
};

/// Copy distribution over vocabulary ids (dense), from the content tokens.
inline std::vector<double> copy_distribution(const GeneratorModel& m, const ComposedGeneratorInput& in) {
  std::vector<double> p(m.vocab.size(), 0.0);
  const TokenSeq content = in.content_tokens();
  for (const auto& t : content) p[m.vocab.id(t)] += 1.0;
  for (double& x : p) x /= static_cast<double>(content.size());
  return p;
}

/// Step scorer for one composed input.
class StepModel {
 public:
  StepModel(const GeneratorModel& m, const ComposedGeneratorInput& in)
      : m_(m), expert_(&m.experts.at(in.expert.index)), copy_(copy_distribution(m, in)) {}

  double prob(TokenId t, TokenId u, TokenId w) const {
    const auto& c = m_.config;
    double lm = m_.background.prob(t, u, w);
    if (!expert_->empty()) lm = c.beta * expert_->prob(t, u, w) + (1.0 - c.beta) * lm;
    return c.lambda * copy_[w] + (1.0 - c.lambda) * lm;
  }

  void distribution(TokenId t, TokenId u, std::vector<double>& out) const {
    const auto& c = m_.config;
    m_.background.distribution(t, u, out);
    if (!expert_->empty()) {
      expert_->distribution(t, u, scratch_);
      for (std::size_t w = 0; w < out.size(); ++w) out[w] = c.beta * scratch_[w] + (1.0 - c.beta) * out[w];
    }
    for (std::size_t w = 0; w < out.size(); ++w) out[w] = c.lambda * copy_[w] + (1.0 - c.lambda) * out[w];
  }

  const GeneratorModel& model() const { return m_; }

 private:
  const GeneratorModel& m_;
  const NgramTable* expert_;
  std::vector<double> copy_;
  mutable std::vector<double> scratch_;
};

/// log p(target EOS | input).
inline double score(const GeneratorModel& m, const ComposedGeneratorInput& in, const TokenSeq& target) {
  if (target.empty()) throw UsageError("score: empty target");
  const StepModel step(m, in);
  const auto ids = m.encode(target);
  double lp = 0.0;
  TokenId t = kBos, u = kBos;
  for (std::size_t j = 0; j <= ids.size(); ++j) {
    const TokenId w = j < ids.size() ? ids[j] : kEos;
    lp += std::log(step.prob(t, u, w));
    t = u;
    u = w;
  }
  return lp;
}

struct MatchResult {
  std::vector<std::size_t> chosen;
  std::vector<double> log_score;
};

/// Picks a target for every input from a precomputed score table
/// (rows = inputs). Independent argmax per row, ties to the lowest index; in
/// one-to-one mode the highest-scoring (input, target) cells are claimed first
/// and a target is reused only after every target is taken.
inline MatchResult match_from_table(const std::vector<std::vector<double>>& table, bool one_to_one = false) {
  MatchResult r;
  if (table.empty()) return r;
  const std::size_t n_targets = table.front().size();
  if (n_targets == 0) throw UsageError("match_targets: need at least one target");
  r.chosen.assign(table.size(), 0);
  r.log_score.assign(table.size(), 0.0);
  for (const auto& row : table)
    for (double s : row)
      if (std::isnan(s)) throw NumericError("match_targets: NaN score");
  if (!one_to_one) {
    for (std::size_t i = 0; i < table.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < n_targets; ++j)
        if (table[i][j] > table[i][best]) best = j;
      r.chosen[i] = best;
      r.log_score[i] = table[i][best];
    }
    return r;
  }
  std::vector<bool> row_done(table.size(), false), col_used(n_targets, false);
  std::size_t remaining = table.size(), free_cols = n_targets;
  while (remaining > 0) {
    if (free_cols == 0) {
      col_used.assign(n_targets, false);
      free_cols = n_targets;
    }
    std::size_t bi = 0, bj = 0;
    double bs = 0.0;
    bool found = false;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (row_done[i]) continue;
      for (std::size_t j = 0; j < n_targets; ++j) {
        if (col_used[j]) continue;
        if (!found || table[i][j] > bs) {
          found = true;
          bi = i;
          bj = j;
          bs = table[i][j];
        }
      }
    }
    row_done[bi] = true;
    col_used[bj] = true;
    --remaining;
    --free_cols;
    r.chosen[bi] = bj;
    r.log_score[bi] = bs;
  }
  return r;
}

inline MatchResult match_targets(const GeneratorModel& m, const std::vector<ComposedGeneratorInput>& inputs,
                                 const std::vector<TokenSeq>& targets, bool one_to_one = false) {
  if (targets.empty()) throw UsageError("match_targets: need at least one target");
  std::vector<std::vector<double>> table(inputs.size(), std::vector<double>(targets.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::size_t j = 0; j < targets.size(); ++j) table[i][j] = score(m, inputs[i], targets[j]);
  return match_from_table(table, one_to_one);
}

struct MatchedPair {
  const ComposedGeneratorInput* input;
  const TokenSeq* target;
};

struct MStepResult {
  GeneratorModel model;
  std::vector<std::string> warnings;
};

/// Rebuilds every expert's counts from its matched pairs and the background
/// from all of them. Vocabulary and hyperparameters are kept.
inline MStepResult m_step_counts(const GeneratorModel& m, const std::vector<MatchedPair>& matched) {
  MStepResult r{m, {}};
  r.model.background = m.empty_table();
  for (auto& e : r.model.experts) e = m.empty_table();
  for (const auto& mp : matched) {
    const std::size_t e = mp.input->expert.index;
    if (e >= r.model.experts.size()) throw UsageError("m_step_counts: expert index out of range");
    const auto ids = m.encode(*mp.target);
    r.model.experts[e].add_sequence(ids);
    r.model.background.add_sequence(ids);
  }
  for (std::size_t e = 0; e < r.model.experts.size(); ++e)
    if (r.model.experts[e].empty())
      r.warnings.push_back("expert " + std::to_string(e) + " has no matched examples; using background only");
  return r;
}

/// One training pair: its targets and one composed input per expert.
struct GeneratorExample {
  ConceptPair pair;
  std::vector<TokenSeq> targets;
  std::vector<ComposedGeneratorInput> inputs;
};

struct EMTrainConfig {
  std::size_t iters = 10;
  std::uint64_t seed = 1;
  bool one_to_one = false;
  // Ablation: every input gets a uniformly drawn target, then one M-step.
  bool random_matching = false;
  // Start from a uniformly random matching instead of the initial model.
  bool random_init = false;
};

struct EMTrainResult {
  GeneratorModel model;
  std::vector<std::vector<std::size_t>> chosen;  // per example, per input
  std::vector<EMIteration> trace;
  std::vector<std::string> warnings;
  bool converged = false;
};

namespace detail {

struct FlatIndex {
  std::vector<std::pair<std::size_t, std::size_t>> at;  // flat id -> (example, input)
  std::size_t max_targets = 0;

  explicit FlatIndex(const std::vector<GeneratorExample>& data) {
    for (std::size_t e = 0; e < data.size(); ++e) {
      if (data[e].targets.empty()) throw UsageError("train_em: pair " + data[e].pair.str() + " has no targets");
      max_targets = std::max(max_targets, data[e].targets.size());
      for (std::size_t i = 0; i < data[e].inputs.size(); ++i) at.emplace_back(e, i);
    }
  }
};

inline Assignment random_assignment(const std::vector<GeneratorExample>& data, const FlatIndex& fi,
                                    std::uint64_t seed) {
  Rng rng(seed);
  Assignment a;
  for (std::size_t f = 0; f < fi.at.size(); ++f)
    a.expert_of[f] = rng.uniform_index(data[fi.at[f].first].targets.size());
  return a;
}

}  // namespace detail

/// Hard-EM over target matchings: the E-step is match_targets, the M-step is
/// m_step_counts. With iters = 0 the model is returned unchanged.
inline EMTrainResult train_em(const GeneratorModel& model, const std::vector<GeneratorExample>& data,
                              const EMTrainConfig& cfg) {
  for (const auto& ex : data) {
    if (ex.inputs.size() != model.n_experts())
      throw UsageError("train_em: pair " + ex.pair.str() + " has " + std::to_string(ex.inputs.size()) +
                       " composed inputs, expected " + std::to_string(model.n_experts()));
    for (std::size_t i = 0; i < ex.inputs.size(); ++i)
      if (ex.inputs[i].expert.index != i) throw UsageError("train_em: composed inputs out of expert order");
  }
  EMTrainResult out{model, {}, {}, {}, false};
  const detail::FlatIndex fi(data);
  if (cfg.iters == 0) return out;

  std::vector<std::string> last_warnings;
  auto m_step = [&](const GeneratorModel& m, const Assignment& a) {
    std::vector<MatchedPair> matched;
    matched.reserve(a.size());
    for (const auto& [f, j] : a.expert_of) {
      const auto& ex = data[fi.at[f].first];
      matched.push_back({&ex.inputs[fi.at[f].second], &ex.targets.at(j)});
    }
    auto r = m_step_counts(m, matched);
    last_warnings = std::move(r.warnings);
    return std::move(r.model);
  };

  auto collect = [&](const Assignment& a) {
    out.chosen.assign(data.size(), {});
    for (std::size_t e = 0; e < data.size(); ++e) out.chosen[e].assign(data[e].inputs.size(), 0);
    for (const auto& [f, j] : a.expert_of) out.chosen[fi.at[f].first][fi.at[f].second] = j;
  };

  if (cfg.random_matching) {
    const Assignment a = detail::random_assignment(data, fi, derive_seed(cfg.seed, "random-matching"));
    out.model = m_step(model, a);
    out.warnings = last_warnings;
    collect(a);
    return out;
  }

  auto score_fn = [&](const GeneratorModel& m, std::size_t f, std::size_t j) {
    const auto& ex = data[fi.at[f].first];
    if (j >= ex.targets.size()) return -std::numeric_limits<double>::infinity();
    return score(m, ex.inputs[fi.at[f].second], ex.targets[j]);
  };
  auto assign = [&](const GeneratorModel&, const std::vector<std::size_t>& ids, const ScoreFn& fn) {
    // Group flat ids by example so one-to-one matching sees a whole pair.
    std::map<std::size_t, std::vector<std::size_t>> by_example;
    for (std::size_t f : ids) by_example[fi.at[f].first].push_back(f);
    Assignment a;
    for (const auto& [e, flats] : by_example) {
      const std::size_t nt = data[e].targets.size();
      std::vector<std::vector<double>> table(flats.size(), std::vector<double>(nt));
      for (std::size_t r = 0; r < flats.size(); ++r)
        for (std::size_t j = 0; j < nt; ++j) table[r][j] = fn(flats[r], j);
      const auto mr = match_from_table(table, cfg.one_to_one);
      for (std::size_t r = 0; r < flats.size(); ++r) a.expert_of[flats[r]] = mr.chosen[r];
    }
    return a;
  };

  HardEMConfig hc;
  hc.n_experts = fi.max_targets;
  hc.max_iters = cfg.iters;
  hc.seed = cfg.seed;
  std::optional<Assignment> init;
  if (cfg.random_init) init = detail::random_assignment(data, fi, derive_seed(cfg.seed, "generator-init"));
  auto res = run_hard_em_with(fi.at.size(), model, score_fn, assign, m_step, hc, std::move(init));
  out.model = std::move(res.params);
  out.trace = std::move(res.trace);
  out.converged = res.converged;
  out.warnings = last_warnings;
  collect(res.assignment);
  return out;
}

inline nlohmann::json to_json(const GeneratorModel& m) {
  nlohmann::json prefixes = nlohmann::json::array();
  for (const auto& p : m.prefixes) prefixes.push_back(p.prefix);
  nlohmann::json experts = nlohmann::json::array();
  for (const auto& e : m.experts) experts.push_back(e.to_json());
  return {{"format", "moree-generator/1"},
          {"lambda", m.config.lambda},
          {"beta", m.config.beta},
          {"add_k", m.config.add_k},
          {"seed", m.seed},
          {"vocab", m.vocab.tokens()},
          {"prefixes", prefixes},
          {"background", m.background.to_json()},
          {"experts", experts}};
}

inline GeneratorModel generator_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "moree-generator/1") throw DataError("not a generator checkpoint");
    GeneratorModel m;
    m.config.lambda = j.at("lambda").get<double>();
    m.config.beta = j.at("beta").get<double>();
    m.config.add_k = j.at("add_k").get<double>();
    m.config.validate();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto vocab = j.at("vocab").get<std::vector<Token>>();
    if (vocab.size() < 3 || vocab[0] != "<s>" || vocab[1] != "</s>" || vocab[2] != "<unk>")
      throw DataError("generator checkpoint: bad vocabulary header");
    for (const auto& t : vocab) m.vocab.add(t);
    if (m.vocab.size() != vocab.size()) throw DataError("generator checkpoint: duplicate vocabulary entries");
    const auto& pj = j.at("prefixes");
    for (std::size_t i = 0; i < pj.size(); ++i) m.prefixes.push_back({i, pj[i].get<TokenSeq>()});
    m.background = NgramTable::from_json(j.at("background"), m.vocab.size(), m.config.add_k);
    for (const auto& e : j.at("experts")) m.experts.push_back(NgramTable::from_json(e, m.vocab.size(), m.config.add_k));
    if (m.experts.size() != m.prefixes.size()) throw DataError("generator checkpoint: expert count mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("generator checkpoint: ") + e.what());
  }
}

}  // namespace moree::generation
