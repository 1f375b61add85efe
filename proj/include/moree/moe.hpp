#pragma once

// Mixture-of-experts machinery shared by the retriever and the generator:
// random prefix identifiers for experts, and a generic hard-EM loop.
//
// Under a uniform prior over experts, argmax_i p(z_i | x, y) is the same as
// argmax_i p(y | z_i, x), so the E-step only needs per-expert log-likelihoods.
// The training objective is the mean over examples of min_i -log p(y | z_i, x).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "moree/common.hpp"
#include "moree/text.hpp"

namespace moree {

struct ExpertIdentifier {
  std::size_t index = 0;
  TokenSeq prefix;

  bool operator==(const ExpertIdentifier&) const = default;
};

struct HardEMConfig {
  std::size_t n_experts = 3;
  std::size_t prefix_len = 5;
  std::size_t max_iters = 20;
  std::uint64_t seed = 1;
  // Batch mode: E-step and M-step alternate per batch of this many examples
  // (0 = full-data iterations).
  std::size_t batch_size = 0;
  // Stop once an E-step reproduces the previous assignment.
  bool stop_at_fixed_point = true;

  void validate() const {
    if (n_experts == 0) throw UsageError("hard-EM: n_experts must be >= 1");
    if (prefix_len == 0) throw UsageError("hard-EM: prefix_len must be >= 1");
  }
};

/// Samples n distinct prefixes of length m from `vocab`, uniformly with
/// replacement; a prefix that collides with an earlier one is redrawn.
inline std::vector<ExpertIdentifier> init_experts(const HardEMConfig& cfg, const std::vector<Token>& vocab) {
  cfg.validate();
  if (vocab.empty()) throw UsageError("init_experts: empty vocabulary");
  const std::set<Token> distinct(vocab.begin(), vocab.end());
  // Need |distinct|^m >= n.
  double capacity = 1.0;
  for (std::size_t i = 0; i < cfg.prefix_len && capacity < 1e18; ++i) capacity *= static_cast<double>(distinct.size());
  if (capacity < static_cast<double>(cfg.n_experts))
    throw UsageError("init_experts: cannot draw " + std::to_string(cfg.n_experts) + " distinct prefixes of length " +
                     std::to_string(cfg.prefix_len) + " from " + std::to_string(distinct.size()) + " tokens");
  Rng rng(derive_seed(cfg.seed, "experts"));
  std::vector<ExpertIdentifier> experts;
  std::set<TokenSeq> seen;
  while (experts.size() < cfg.n_experts) {
    TokenSeq prefix;
    for (std::size_t j = 0; j < cfg.prefix_len; ++j) prefix.push_back(vocab[rng.uniform_index(vocab.size())]);
    if (!seen.insert(prefix).second) continue;
    experts.push_back({experts.size(), std::move(prefix)});
  }
  return experts;
}

/// example id -> chosen expert.
struct Assignment {
  std::map<std::size_t, std::size_t> expert_of;

  bool operator==(const Assignment&) const = default;
  std::size_t operator[](std::size_t example) const { return expert_of.at(example); }
  std::size_t size() const { return expert_of.size(); }
};

/// log p(example | expert); -inf allowed, NaN is an error.
using ScoreFn = std::function<double(std::size_t example, std::size_t expert)>;

/// Assigns each example to its highest-scoring expert, ties to the lowest index.
inline Assignment e_step(const std::vector<std::size_t>& example_ids, std::size_t n_experts, const ScoreFn& score) {
  Assignment a;
  for (std::size_t ex : example_ids) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < n_experts; ++e) {
      const double s = score(ex, e);
      if (std::isnan(s))
        throw NumericError("e_step: NaN score for example " + std::to_string(ex) + ", expert " + std::to_string(e));
      if (e == 0 || s > best_score) {
        best = e;
        best_score = s;
      }
    }
    a.expert_of[ex] = best;
  }
  return a;
}

/// Mean of -score(ex, assigned expert) over the assignment.
inline double assignment_loss(const Assignment& a, const ScoreFn& score) {
  if (a.expert_of.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [ex, e] : a.expert_of) total -= score(ex, e);
  return total / static_cast<double>(a.expert_of.size());
}

struct EMIteration {
  std::size_t iteration = 0;
  // Objective under the current parameters with the previous assignment
  // (absent on the first E-step).
  std::optional<double> loss_before_estep;
  // Objective right after the E-step: mean_ex min_i -log p.
  double loss = 0.0;
  std::size_t reassigned = 0;
};

template <class Params>
struct HardEMResult {
  Params params;
  Assignment assignment;
  std::vector<EMIteration> trace;
  bool converged = false;
};

/// Alternates an assignment step and m_step. `score(params, example, expert)`
/// returns a log-likelihood, `assign(params, example_ids, score_fn)` returns
/// the assignment for those examples, and `m_step(params, assignment)` returns
/// updated parameters. When `initial` is given, the loop starts with an M-step
/// on it.
template <class Params, class Score, class Assign, class MStep>
HardEMResult<Params> run_hard_em_with(std::size_t n_examples, Params params, Score&& score, Assign&& assign,
                                      MStep&& m_step, const HardEMConfig& cfg,
                                      std::optional<Assignment> initial = std::nullopt) {
  cfg.validate();
  HardEMResult<Params> res{std::move(params), {}, {}, false};
  std::vector<std::size_t> all(n_examples);
  for (std::size_t i = 0; i < n_examples; ++i) all[i] = i;

  std::optional<Assignment> prev = std::move(initial);
  if (prev) {
    res.params = m_step(static_cast<const Params&>(res.params), *prev);
    res.assignment = *prev;
  }

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    ScoreFn fn = [&](std::size_t ex, std::size_t e) { return score(res.params, ex, e); };
    EMIteration rec;
    rec.iteration = it;
    Assignment a;
    if (cfg.batch_size == 0) {
      if (prev) rec.loss_before_estep = assignment_loss(*prev, fn);
      a = assign(static_cast<const Params&>(res.params), all, fn);
      rec.loss = assignment_loss(a, fn);
    } else {
      // Batch mode: each batch gets its own E-step under the latest parameters
      // and is followed immediately by an M-step on that batch.
      std::vector<std::size_t> order = all;
      Rng rng(derive_seed(cfg.seed, "em-batch-" + std::to_string(it)));
      rng.shuffle(order);
      double loss_sum = 0.0;
      for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
        std::vector<std::size_t> batch(
            order.begin() + static_cast<std::ptrdiff_t>(lo),
            order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), lo + cfg.batch_size)));
        Assignment part = assign(static_cast<const Params&>(res.params), batch, fn);
        loss_sum += assignment_loss(part, fn) * static_cast<double>(part.size());
        for (const auto& [ex, e] : part.expert_of) a.expert_of[ex] = e;
        res.params = m_step(static_cast<const Params&>(res.params), part);
      }
      rec.loss = n_examples ? loss_sum / static_cast<double>(n_examples) : 0.0;
    }
    if (std::isnan(rec.loss)) throw NumericError("hard-EM: NaN objective at iteration " + std::to_string(it));
    for (const auto& [ex, e] : a.expert_of) rec.reassigned += !prev || prev->expert_of.at(ex) != e;
    res.trace.push_back(rec);
    const bool fixed = prev && *prev == a;
    res.assignment = a;
    if (fixed && cfg.stop_at_fixed_point) {
      res.converged = true;
      break;
    }
    if (cfg.batch_size == 0) res.params = m_step(static_cast<const Params&>(res.params), a);
    prev = std::move(a);
  }
  return res;
}

/// Hard-EM with the argmax E-step.
template <class Params, class Score, class MStep>
HardEMResult<Params> run_hard_em(std::size_t n_examples, Params params, Score&& score, MStep&& m_step,
                                 const HardEMConfig& cfg, std::optional<Assignment> initial = std::nullopt) {
  const std::size_t n = cfg.n_experts;
  auto argmax = [n](const Params&, const std::vector<std::size_t>& ids, const ScoreFn& fn) {
    return e_step(ids, n, fn);
  };
  return run_hard_em_with(n_examples, std::move(params), std::forward<Score>(score), argmax,
                          std::forward<MStep>(m_step), cfg, std::move(initial));
}

/// Fraction of examples whose expert's majority label equals their own label.
inline double assignment_purity(const Assignment& a, const std::vector<int>& labels) {
  if (a.expert_of.empty()) return 1.0;
  std::map<std::size_t, std::map<int, std::size_t>> counts;
  for (const auto& [ex, e] : a.expert_of) ++counts[e][labels.at(ex)];
  std::size_t majority = 0;
  for (const auto& [e, by_label] : counts) {
    std::size_t best = 0;
    for (const auto& [l, c] : by_label) best = std::max(best, c);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(a.expert_of.size());
}

}  // namespace moree
