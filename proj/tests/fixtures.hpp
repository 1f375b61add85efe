#pragma once

// Synthetic fixtures shared by the unit tests and the acceptance runner.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "moree/decoding.hpp"
#include "moree/generator.hpp"
#include "moree/moe.hpp"
#include "moree/retriever.hpp"

namespace fixtures {

using namespace moree;

// ---- bag-of-words mixture for the generic hard-EM loop ---------------------------

struct BagData {
  std::size_t vocab = 0;
  std::vector<std::vector<std::size_t>> docs;
  std::vector<int> labels;
};

/// Per-expert unigram log-probabilities.
using BagParams = std::vector<std::vector<double>>;

inline double bag_score(const BagParams& p, const BagData& d, std::size_t ex, std::size_t e) {
  double s = 0.0;
  for (std::size_t w : d.docs[ex]) s += p[e][w];
  return s;
}

/// Maximum-likelihood unigram tables from an assignment (add-`smooth`).
/// Experts with no documents keep their previous table.
inline BagParams bag_m_step(const BagParams& prev, const BagData& d, const Assignment& a, double smooth) {
  BagParams out = prev;
  std::vector<std::vector<double>> counts(prev.size(), std::vector<double>(d.vocab, 0.0));
  std::vector<double> totals(prev.size(), 0.0);
  for (const auto& [ex, e] : a.expert_of)
    for (std::size_t w : d.docs[ex]) {
      counts[e][w] += 1.0;
      totals[e] += 1.0;
    }
  for (std::size_t e = 0; e < prev.size(); ++e) {
    if (totals[e] == 0.0) continue;
    for (std::size_t w = 0; w < d.vocab; ++w) {
      const double p = (counts[e][w] + smooth) / (totals[e] + smooth * static_cast<double>(d.vocab));
      out[e][w] = p > 0.0 ? std::log(p) : -INFINITY;
    }
  }
  return out;
}

inline BagParams random_bag_params(std::size_t experts, std::size_t vocab, Rng& rng) {
  BagParams p(experts, std::vector<double>(vocab));
  for (auto& row : p) {
    double z = 0.0;
    for (auto& x : row) z += (x = 0.05 + rng.uniform01());
    for (auto& x : row) x = std::log(x / z);
  }
  return p;
}

/// Two clusters of 20 documents over disjoint 10-token vocabularies.
inline BagData two_clusters(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "two-clusters"));
  BagData d;
  d.vocab = 20;
  for (int i = 0; i < 40; ++i) {
    const int label = i % 2;
    std::vector<std::size_t> doc;
    for (int j = 0; j < 8; ++j) doc.push_back(static_cast<std::size_t>(label * 10) + rng.uniform_index(10));
    d.docs.push_back(doc);
    d.labels.push_back(label);
  }
  return d;
}

/// Overlapping vocabularies, for the monotonicity check.
inline BagData mixed_docs(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "mixed-docs"));
  BagData d;
  d.vocab = 12;
  for (int i = 0; i < 30; ++i) {
    std::vector<std::size_t> doc;
    const std::size_t lo = rng.uniform_index(6);
    const std::size_t len = 3 + rng.uniform_index(6);
    for (std::size_t j = 0; j < len; ++j) doc.push_back(lo + rng.uniform_index(7));
    d.docs.push_back(doc);
    d.labels.push_back(static_cast<int>(lo >= 3));
  }
  return d;
}

struct BagRun {
  HardEMResult<BagParams> result;
  BagData data;
};

/// Hard-EM with 2 experts from a seeded random assignment.
inline BagRun run_two_clusters(std::uint64_t seed) {
  BagRun r{{}, two_clusters(seed)};
  Rng rng(derive_seed(seed, "init"));
  const BagParams init = random_bag_params(2, r.data.vocab, rng);
  Assignment start;
  for (std::size_t i = 0; i < r.data.docs.size(); ++i) start.expert_of[i] = rng.uniform_index(2);
  HardEMConfig cfg;
  cfg.n_experts = 2;
  cfg.max_iters = 20;
  cfg.seed = seed;
  const auto& d = r.data;
  r.result = run_hard_em(
      d.docs.size(), init, [&](const BagParams& p, std::size_t ex, std::size_t e) { return bag_score(p, d, ex, e); },
      [&](const BagParams& p, const Assignment& a) { return bag_m_step(p, d, a, 0.1); }, cfg, start);
  return r;
}

// ---- degenerate retriever ------------------------------------------------------------

/// 40 random-token candidates for one pair; odd examples are positives and
/// carry the token "good". Without a regularizer one expert can take all the
/// positives and the other all the negatives.
struct DegenerateRetriever {
  std::vector<retrieval::RelevanceExample> examples;
  std::vector<ExpertIdentifier> experts;
};

inline DegenerateRetriever degenerate_retriever(std::uint64_t seed) {
  DegenerateRetriever f;
  Rng rng(seed * 77);
  std::vector<Token> words;
  for (int i = 0; i < 30; ++i) words.push_back("w" + std::to_string(i));
  const auto pair = ConceptPair::make("dog", "sheep");
  for (int i = 0; i < 40; ++i) {
    TokenSeq c;
    for (int j = 0; j < 6; ++j) c.push_back(words[rng.uniform_index(words.size())]);
    const int label = i % 2;
    if (label) c[rng.uniform_index(6)] = "good";
    f.examples.push_back({pair, c, label});
  }
  HardEMConfig hc;
  hc.n_experts = 2;
  hc.prefix_len = 5;
  hc.seed = seed;
  f.experts = init_experts(hc, words);
  return f;
}

struct RateResult {
  double rate0 = 0, rate1 = 0;
  retrieval::TrainResult trained;
};

/// Per-expert fraction of fixture examples predicted positive after training.
inline RateResult degenerate_rates(std::uint64_t seed, double alpha) {
  const auto f = degenerate_retriever(seed);
  retrieval::TrainConfig tc;
  tc.alpha = alpha;
  tc.epochs = 20;
  tc.learning_rate = 0.5;
  tc.batch_size = 8;
  tc.seed = seed;
  const WordVectors none;
  RateResult r;
  r.trained = retrieval::train(retrieval::RelevanceModel{}, f.experts, f.examples, none, tc);
  for (const auto& ex : f.examples) {
    r.rate0 += retrieval::predict(r.trained.model, retrieval::ComposedRetrieverInput::compose(f.experts[0], ex.pair, ex.candidate), none) > 0.5;
    r.rate1 += retrieval::predict(r.trained.model, retrieval::ComposedRetrieverInput::compose(f.experts[1], ex.pair, ex.candidate), none) > 0.5;
  }
  r.rate0 /= static_cast<double>(f.examples.size());
  r.rate1 /= static_cast<double>(f.examples.size());
  return r;
}

// ---- two-style generator -------------------------------------------------------------

/// Ten pairs, each with an "action" target and a "description" target.
/// Expert 0 reads action-style contexts and expert 1 description-style ones.
struct TwoStyle {
  generation::GeneratorModel model;
  std::vector<generation::GeneratorExample> data;
};

inline TwoStyle two_style(std::uint64_t seed) {
  using generation::ComposedGeneratorInput;
  const std::vector<std::pair<std::string, std::string>> pairs{
      {"dog", "sheep"},  {"cat", "mouse"},    {"boy", "kite"},   {"girl", "bike"},     {"chef", "onion"},
      {"bird", "nest"},  {"farmer", "tractor"}, {"horse", "rider"}, {"player", "ball"}, {"woman", "cake"}};
  auto action = [](const std::string& a, const std::string& b) {
    return tokenize("the " + a + " quickly chases the " + b + " again .");
  };
  auto description = [](const std::string& a, const std::string& b) {
    return tokenize("a calm " + b + " rests beside the " + a + " .");
  };
  TwoStyle f;
  std::vector<TokenSeq> contexts, targets;
  std::vector<Token> concepts, words;
  for (const auto& [a, b] : pairs) {
    const auto pair = ConceptPair::make(a, b);
    generation::GeneratorExample ex{pair, {action(a, b), description(a, b)}, {}};
    std::vector<TokenSeq> c0{tokenize("one " + a + " quickly follows the " + b + " ."),
                             tokenize("the " + a + " quickly chases a " + b + " again .")};
    std::vector<TokenSeq> c1{tokenize("a quiet " + a + " sits near a calm " + b + " ."),
                             tokenize("a calm " + b + " rests beside the " + a + " .")};
    ex.inputs.push_back(ComposedGeneratorInput{{0, {}}, pair, c0});
    ex.inputs.push_back(ComposedGeneratorInput{{1, {}}, pair, c1});
    for (auto* set : {&c0, &c1}) contexts.insert(contexts.end(), set->begin(), set->end());
    targets.insert(targets.end(), ex.targets.begin(), ex.targets.end());
    concepts.push_back(a);
    concepts.push_back(b);
    f.data.push_back(std::move(ex));
  }
  for (const auto& s : contexts) words.insert(words.end(), s.begin(), s.end());
  HardEMConfig hc;
  hc.n_experts = 2;
  hc.prefix_len = 5;
  hc.seed = seed;
  const auto prefixes = init_experts(hc, words);
  for (auto& ex : f.data)
    for (std::size_t i = 0; i < 2; ++i) ex.inputs[i].expert = prefixes[i];
  std::vector<const TokenSeq*> sources;
  for (const auto& s : contexts) sources.push_back(&s);
  f.model = generation::GeneratorModel::create({}, prefixes, sources, concepts, targets, seed);
  return f;
}

/// Fraction of (pair, expert) inputs matched to the target of their own style.
inline double style_purity(const generation::EMTrainResult& r) {
  std::size_t hit = 0, total = 0;
  for (const auto& per_input : r.chosen)
    for (std::size_t i = 0; i < per_input.size(); ++i) {
      hit += per_input[i] == i;
      ++total;
    }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

inline generation::EMTrainResult train_two_style(const TwoStyle& f, std::uint64_t seed) {
  generation::EMTrainConfig cfg;
  cfg.iters = 10;
  cfg.seed = seed;
  cfg.random_init = false;
  return generation::train_em(f.model, f.data, cfg);
}

}  // namespace fixtures
