#pragma once

// Mixture of retrievers. A single hashed-feature logistic model scores
// "expert prefix [CLS] e_a [SEP] e_b [SEP] candidate [SEP]" inputs; experts
// differ only in their prefix tokens, so all of them share one weight vector.
// Training is hard-EM over experts with a Jensen-Shannon style penalty that
// keeps the experts' label distributions from drifting apart.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "moree/common.hpp"
#include "moree/corpus.hpp"
#include "moree/example.hpp"
#include "moree/moe.hpp"
#include "moree/text.hpp"
#include "moree/vectors.hpp"

namespace moree::retrieval {

inline constexpr double kProbEpsilon = 1e-7;
inline constexpr std::size_t kDenseFeatures = 3;

struct ComposedRetrieverInput {
  TokenSeq prefix;  // empty for the expert-free form
  ConceptPair pair;
  TokenSeq candidate;

  static ComposedRetrieverInput compose(const ExpertIdentifier& expert, const ConceptPair& pair,
                                        const TokenSeq& candidate) {
    return {expert.prefix, pair, candidate};
  }

  /// prefix ⊕ [CLS] ⊕ e_a ⊕ [SEP] ⊕ e_b ⊕ [SEP] ⊕ candidate ⊕ [SEP]
  TokenSeq rendered() const {
    TokenSeq r = prefix;
    r.push_back(kCls);
    r.push_back(pair.a);
    r.push_back(kSep);
    r.push_back(pair.b);
    r.push_back(kSep);
    r.insert(r.end(), candidate.begin(), candidate.end());
    r.push_back(kSep);
    return r;
  }
};

struct RelevanceExample {
  ConceptPair pair;
  TokenSeq candidate;
  int label = 0;  // y_c in {0, 1}
};

/// Sparse (index, value) list, sorted by index with duplicates summed.
using SparseFeatures = std::vector<std::pair<std::uint32_t, double>>;

struct FeatureSpace {
  std::size_t hash_dim = 1u << 16;
  std::uint64_t salt = 0x6d6f726565ULL;
  // Hash each candidate token together with the expert prefix, so experts can
  // rank candidates differently through the shared weights.
  bool expert_crosses = true;
};

namespace detail {

inline std::uint32_t bucket(const FeatureSpace& fs, std::string_view kind, std::string_view a,
                            std::string_view b = {}) {
  std::uint64_t h = fnv1a64(kind, kFnvOffset ^ fs.salt);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(a, h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(b, h);
  return static_cast<std::uint32_t>(h % fs.hash_dim);
}

inline void normalize(SparseFeatures& f) {
  std::sort(f.begin(), f.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  SparseFeatures out;
  for (const auto& [i, v] : f) {
    if (!out.empty() && out.back().first == i)
      out.back().second += v;
    else
      out.emplace_back(i, v);
  }
  f = std::move(out);
}

}  // namespace detail

/// Hashed unigram and bigram occurrences of a token sequence (not merged).
inline SparseFeatures ngram_features(const FeatureSpace& fs, const TokenSeq& rendered) {
  SparseFeatures f;
  for (const auto& t : rendered) f.emplace_back(detail::bucket(fs, "u", t), 1.0);
  for (std::size_t i = 0; i + 1 < rendered.size(); ++i)
    f.emplace_back(detail::bucket(fs, "b", rendered[i], rendered[i + 1]), 1.0);
  return f;
}

/// The three dense features: concept overlap (how many of the two concepts the
/// candidate mentions), cosine of mean word vectors of candidate and pair, and
/// candidate length in tens of tokens.
inline std::array<double, kDenseFeatures> dense_features(const ComposedRetrieverInput& in,
                                                        const WordVectors& vectors) {
  const double overlap = static_cast<double>(contains_concept(in.candidate, in.pair.a)) +
                         static_cast<double>(contains_concept(in.candidate, in.pair.b));
  double cos = 0.0;
  if (!vectors.empty()) {
    const auto mc = mean_vector(vectors, in.candidate);
    const auto mp = mean_vector(vectors, std::array<Token, 2>{in.pair.a, in.pair.b});
    if (!mc.empty() && !mp.empty()) {
      try {
        cos = cosine(mc, mp);
      } catch (const UsageError&) {
        cos = 0.0;
      }
    }
  }
  return {overlap, cos, static_cast<double>(in.candidate.size()) / 10.0};
}

inline SparseFeatures featurize(const FeatureSpace& fs, const ComposedRetrieverInput& in, const WordVectors& vectors) {
  SparseFeatures f = ngram_features(fs, in.rendered());
  if (fs.expert_crosses && !in.prefix.empty()) {
    const std::string key = detokenize(in.prefix);
    for (const auto& t : in.candidate) f.emplace_back(detail::bucket(fs, "x", key, t), 1.0);
  }
  const auto dense = dense_features(in, vectors);
  for (std::size_t i = 0; i < kDenseFeatures; ++i)
    f.emplace_back(static_cast<std::uint32_t>(fs.hash_dim + i), dense[i]);
  detail::normalize(f);
  return f;
}

/// Shared weights over hashed features plus the dense tail.
struct RelevanceModel {
  FeatureSpace space;
  std::vector<double> weights;  // hash_dim + kDenseFeatures
  double bias = 0.0;

  explicit RelevanceModel(FeatureSpace fs = {}) : space(fs), weights(fs.hash_dim + kDenseFeatures, 0.0) {
    if (fs.hash_dim == 0) throw UsageError("RelevanceModel: hash_dim must be positive");
  }

  double margin(const SparseFeatures& f) const {
    double z = bias;
    for (const auto& [i, v] : f) z += weights[i] * v;
    return z;
  }

  bool operator==(const RelevanceModel& o) const {
    return weights == o.weights && bias == o.bias && space.hash_dim == o.space.hash_dim &&
           space.salt == o.space.salt && space.expert_crosses == o.space.expert_crosses;
  }
};

inline double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double predict_features(const RelevanceModel& m, const SparseFeatures& f) {
  return clamp_prob(sigmoid(m.margin(f)));
}

/// p(y_c = 1 | input), clamped to [eps, 1 - eps].
inline double predict(const RelevanceModel& m, const ComposedRetrieverInput& in, const WordVectors& vectors) {
  return predict_features(m, featurize(m.space, in, vectors));
}

inline double bernoulli_kl(double p, double q) {
  return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

/// (1/n) sum_i KL(P_i || mean_j P_j) for per-expert Bernoulli predictions, in
/// nats. Probabilities are clamped to [eps, 1 - eps] first.
inline double js_regularizer(const std::vector<double>& probs) {
  if (probs.empty()) return 0.0;
  std::vector<double> p(probs.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    p[i] = clamp_prob(probs[i]);
    mean += p[i];
  }
  mean /= static_cast<double>(p.size());
  double total = 0.0;
  for (double pi : p) total += bernoulli_kl(pi, mean);
  return std::max(0.0, total / static_cast<double>(p.size()));
}

/// Mean of js_regularizer over a batch of per-example distributions.
inline double js_regularizer_batch(const std::vector<std::vector<double>>& batch) {
  if (batch.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : batch) s += js_regularizer(d);
  return s / static_cast<double>(batch.size());
}

struct TrainingSet {
  std::vector<RelevanceExample> examples;
  std::vector<std::string> warnings;
};

/// Targets are positives; the same number of negatives is drawn without
/// replacement from the pair's pool, skipping pool sentences equal to a target.
inline TrainingSet build_training_set(const std::vector<DatasetExample>& data,
                                      const std::map<ConceptPair, CandidatePool>& pools, std::uint64_t seed) {
  TrainingSet ts;
  for (const auto& ex : data) {
    auto it = pools.find(ex.pair);
    if (it == pools.end()) throw UsageError("build_training_set: no candidate pool for pair " + ex.pair.str());
    for (const auto& t : ex.targets) ts.examples.push_back({ex.pair, t, 1});
    std::vector<const TokenSeq*> eligible;
    for (const auto& m : it->second.members)
      if (std::find(ex.targets.begin(), ex.targets.end(), m.tokens) == ex.targets.end()) eligible.push_back(&m.tokens);
    const std::size_t want = ex.targets.size();
    if (eligible.size() < want)
      ts.warnings.push_back("pair " + ex.pair.str() + ": only " + std::to_string(eligible.size()) +
                            " negatives available, wanted " + std::to_string(want));
    Rng rng(derive_seed(seed, "negatives:" + ex.pair.str()));
    // partial Fisher-Yates
    const std::size_t take = std::min(want, eligible.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t j = i + rng.uniform_index(eligible.size() - i);
      std::swap(eligible[i], eligible[j]);
      ts.examples.push_back({ex.pair, *eligible[i], 0});
    }
  }
  return ts;
}

enum class RegularizerMode {
  kPerExample,  // P_i = expert i's Bernoulli prediction on each example
  kBatchMarginal,  // P_i = expert i's mean prediction over the batch
};

struct TrainConfig {
  double alpha = 1.0;
  std::size_t epochs = 20;
  double learning_rate = 0.5;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  RegularizerMode mode = RegularizerMode::kPerExample;
  double init_scale = 0.01;  // uniform(-s, s) initial weights, breaks expert symmetry
};

struct EpochStats {
  std::size_t epoch = 0;
  double estep_loss = 0.0;  // mean_ex min_i -log p(y_c | x_ji) before the epoch
  std::optional<double> estep_loss_before;
  double classification_loss = 0.0;  // mean L_c over the epoch's batches
  double regularizer = 0.0;  // mean L_r over the epoch's batches
  double total_loss = 0.0;
};

struct TrainResult {
  RelevanceModel model;
  Assignment assignment;
  std::vector<EpochStats> trace;
};

/// Features for every (example, expert) combination.
using FeatureTable = std::vector<std::vector<SparseFeatures>>;

inline FeatureTable featurize_all(const FeatureSpace& fs, const std::vector<RelevanceExample>& examples,
                                  const std::vector<ExpertIdentifier>& experts, const WordVectors& vectors) {
  FeatureTable t(examples.size());
  for (std::size_t x = 0; x < examples.size(); ++x) {
    t[x].reserve(experts.size());
    for (const auto& e : experts)
      t[x].push_back(featurize(fs, ComposedRetrieverInput::compose(e, examples[x].pair, examples[x].candidate), vectors));
  }
  return t;
}

inline double log_likelihood(double p, int label) { return label ? std::log(p) : std::log(1.0 - p); }

/// L = L_c + alpha * L_r on one batch and its gradient with respect to every
/// expert's margin. grad[b][i] = dL / dz_{b,i}.
inline std::pair<double, double> batch_loss_and_grad(const RelevanceModel& m, const FeatureTable& feats,
                                                     const std::vector<RelevanceExample>& examples,
                                                     const std::vector<std::size_t>& batch,
                                                     const Assignment& assignment, double alpha,
                                                     RegularizerMode mode,
                                                     std::vector<std::vector<double>>* grad) {
  const std::size_t n = feats.empty() ? 0 : feats[batch.front()].size();
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<std::vector<double>> probs(batch.size(), std::vector<double>(n));
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t i = 0; i < n; ++i) probs[b][i] = predict_features(m, feats[batch[b]][i]);

  if (grad) grad->assign(batch.size(), std::vector<double>(n, 0.0));
  double lc = 0.0, lr = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ex = examples[batch[b]];
    const std::size_t a = assignment[batch[b]];
    const double p = probs[b][a];
    lc -= log_likelihood(p, ex.label);
    if (grad) (*grad)[b][a] += (p - ex.label) * inv_b;
  }
  lc *= inv_b;

  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  if (mode == RegularizerMode::kPerExample) {
    for (std::size_t b = 0; b < batch.size(); ++b) {
      lr += js_regularizer(probs[b]);
      if (!grad || alpha == 0.0) continue;
      double mean = 0.0;
      for (double p : probs[b]) mean += p;
      mean *= inv_n;
      for (std::size_t i = 0; i < n; ++i) {
        const double p = probs[b][i];
        (*grad)[b][i] += alpha * inv_b * inv_n * (logit(p) - logit(mean)) * p * (1.0 - p);
      }
    }
    lr *= inv_b;
  } else {
    std::vector<double> marg(n, 0.0);
    for (std::size_t b = 0; b < batch.size(); ++b)
      for (std::size_t i = 0; i < n; ++i) marg[i] += probs[b][i] * inv_b;
    lr = js_regularizer(marg);
    if (grad && alpha != 0.0) {
      double mean = 0.0;
      for (double p : marg) mean += clamp_prob(p);
      mean *= inv_n;
      for (std::size_t b = 0; b < batch.size(); ++b)
        for (std::size_t i = 0; i < n; ++i) {
          const double p = probs[b][i];
          (*grad)[b][i] += alpha * inv_n * (logit(clamp_prob(marg[i])) - logit(mean)) * p * (1.0 - p) * inv_b;
        }
    }
  }
  return {lc, lr};
}

/// Hard-EM training: per epoch, an E-step assigns each example to the expert
/// with the lowest cross-entropy, then one pass of mini-batch gradient descent
/// on L_c + alpha * L_r updates the shared weights.
inline TrainResult train(RelevanceModel model, const std::vector<ExpertIdentifier>& experts,
                         const std::vector<RelevanceExample>& examples, const WordVectors& vectors,
                         const TrainConfig& cfg) {
  if (cfg.alpha < 0) throw UsageError("retriever train: alpha must be >= 0");
  if (experts.empty()) throw UsageError("retriever train: no experts");
  if (cfg.batch_size == 0) throw UsageError("retriever train: batch_size must be >= 1");
  if (cfg.init_scale > 0) {
    Rng init(derive_seed(cfg.seed, "retriever-init"));
    for (double& w : model.weights) w = init.uniform(-cfg.init_scale, cfg.init_scale);
  }
  const FeatureTable feats = featurize_all(model.space, examples, experts, vectors);

  std::vector<EpochStats> trace;
  std::size_t epoch = 0;
  auto score = [&](const RelevanceModel& m, std::size_t x, std::size_t e) {
    return log_likelihood(predict_features(m, feats[x][e]), examples[x].label);
  };
  auto m_step = [&](const RelevanceModel& current, const Assignment& a) {
    RelevanceModel m = current;
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, "retriever-epoch-" + std::to_string(epoch)));
    rng.shuffle(order);
    EpochStats st;
    st.epoch = epoch;
    std::size_t batches = 0;
    std::vector<std::vector<double>> grad;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), lo + cfg.batch_size)));
      const auto [lc, lr] = batch_loss_and_grad(m, feats, examples, batch, a, cfg.alpha, cfg.mode, &grad);
      if (!std::isfinite(lc) || !std::isfinite(lr))
        throw NumericError("retriever train: non-finite loss at epoch " + std::to_string(epoch) + " (L_c=" +
                           std::to_string(lc) + ", L_r=" + std::to_string(lr) + ")");
      st.classification_loss += lc;
      st.regularizer += lr;
      ++batches;
      for (std::size_t b = 0; b < batch.size(); ++b)
        for (std::size_t i = 0; i < grad[b].size(); ++i) {
          const double g = grad[b][i];
          if (g == 0.0) continue;
          for (const auto& [k, v] : feats[batch[b]][i]) m.weights[k] -= cfg.learning_rate * g * v;
          m.bias -= cfg.learning_rate * g;
        }
    }
    if (batches) {
      st.classification_loss /= static_cast<double>(batches);
      st.regularizer /= static_cast<double>(batches);
    }
    st.total_loss = st.classification_loss + cfg.alpha * st.regularizer;
    trace.push_back(st);
    ++epoch;
    return m;
  };

  HardEMConfig em;
  em.n_experts = experts.size();
  em.max_iters = cfg.epochs;
  em.seed = cfg.seed;
  em.stop_at_fixed_point = false;
  auto res = run_hard_em(examples.size(), std::move(model), score, m_step, em);
  for (std::size_t i = 0; i < trace.size() && i < res.trace.size(); ++i) {
    trace[i].estep_loss = res.trace[i].loss;
    trace[i].estep_loss_before = res.trace[i].loss_before_estep;
  }
  return {std::move(res.params), std::move(res.assignment), std::move(trace)};
}

struct ContextSet {
  ConceptPair pair;
  std::size_t expert = 0;
  std::vector<SentenceId> ids;
  std::vector<TokenSeq> sentences;
  std::vector<double> scores;
};

struct RetrievalResult {
  std::vector<ContextSet> sets;
  std::vector<std::string> warnings;
};

/// Top-k pool sentences per expert by predicted relevance (ties to lower
/// sentence id). With `exclude_taken`, an expert skips sentences already
/// chosen by lower-indexed experts.
inline RetrievalResult retrieve_contexts(const RelevanceModel& model, const ConceptPair& pair,
                                         const CandidatePool& pool, std::size_t k,
                                         const std::vector<ExpertIdentifier>& experts, const WordVectors& vectors,
                                         bool exclude_taken = false) {
  RetrievalResult out;
  if (pool.members.empty()) out.warnings.push_back("empty candidate pool for pair " + pair.str());
  std::vector<SentenceId> taken;
  for (const auto& e : experts) {
    struct Scored {
      double p;
      SentenceId id;
      const TokenSeq* tokens;
    };
    std::vector<Scored> scored;
    for (const auto& m : pool.members) {
      if (exclude_taken && std::find(taken.begin(), taken.end(), m.id) != taken.end()) continue;
      scored.push_back({predict(model, ComposedRetrieverInput::compose(e, pair, m.tokens), vectors), m.id, &m.tokens});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
      if (x.p != y.p) return x.p > y.p;
      return x.id < y.id;
    });
    ContextSet cs{pair, e.index, {}, {}, {}};
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) {
      cs.ids.push_back(scored[i].id);
      cs.sentences.push_back(*scored[i].tokens);
      cs.scores.push_back(scored[i].p);
      taken.push_back(scored[i].id);
    }
    out.sets.push_back(std::move(cs));
  }
  return out;
}

// --- checkpoint -------------------------------------------------------------

inline nlohmann::json to_json(const RelevanceModel& m, const std::vector<ExpertIdentifier>& experts) {
  nlohmann::json j;
  j["format"] = "moree-retriever/1";
  j["hash_dim"] = m.space.hash_dim;
  j["salt"] = m.space.salt;
  j["expert_crosses"] = m.space.expert_crosses;
  j["bias"] = m.bias;
  j["weights"] = m.weights;
  auto& ex = j["experts"] = nlohmann::json::array();
  for (const auto& e : experts) ex.push_back(e.prefix);
  return j;
}

inline std::pair<RelevanceModel, std::vector<ExpertIdentifier>> from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "moree-retriever/1") throw DataError("not a retriever checkpoint");
  FeatureSpace fs;
  fs.hash_dim = j.at("hash_dim").get<std::size_t>();
  fs.salt = j.at("salt").get<std::uint64_t>();
  fs.expert_crosses = j.at("expert_crosses").get<bool>();
  RelevanceModel m(fs);
  m.bias = j.at("bias").get<double>();
  m.weights = j.at("weights").get<std::vector<double>>();
  if (m.weights.size() != fs.hash_dim + kDenseFeatures) throw DataError("retriever checkpoint: weight size mismatch");
  std::vector<ExpertIdentifier> experts;
  for (const auto& p : j.at("experts")) experts.push_back({experts.size(), p.get<TokenSeq>()});
  return {std::move(m), std::move(experts)};
}

}  // namespace moree::retrieval
