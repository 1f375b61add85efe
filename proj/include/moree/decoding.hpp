#pragma once

// Decoders for the mixture of generators: constrained beam search and the
// top-k / top-p / typical sampling baselines.
//
// Constraints (when enabled): EOS is masked until both concepts have appeared
// (stem match). Once the remaining length budget is no larger than the number
// of unmet concepts, only unmet concept tokens may be emitted. At max_len the
// hypothesis is closed with EOS whether or not the constraints hold; such
// outputs carry the unsatisfied flag. BOS and <unk> are never emitted.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "moree/common.hpp"
#include "moree/generator.hpp"
#include "moree/text.hpp"

namespace moree::generation {

enum class DecoderKind { kBeam, kTopK, kTopP, kTypical };

inline std::string decoder_name(DecoderKind k) {
  switch (k) {
    case DecoderKind::kBeam: return "beam";
    case DecoderKind::kTopK: return "topk";
    case DecoderKind::kTopP: return "topp";
    case DecoderKind::kTypical: return "typical";
  }
  return "?";
}

inline DecoderKind parse_decoder(const std::string& s) {
  if (s == "beam") return DecoderKind::kBeam;
  if (s == "topk") return DecoderKind::kTopK;
  if (s == "topp") return DecoderKind::kTopP;
  if (s == "typical") return DecoderKind::kTypical;
  throw UsageError("unknown decoder '" + s + "' (expected beam|topk|topp|typical)");
}

struct DecoderConfig {
  DecoderKind kind = DecoderKind::kBeam;
  std::size_t beam = 4;
  std::size_t max_len = 25;
  bool require_concepts = true;
  std::size_t top_k = 10;
  double temperature = 1.0;
  double top_p = 0.9;
  double tau = 0.9;
  std::uint64_t seed = 1;

  void validate() const {
    if (max_len == 0) throw UsageError("decoder: max_len must be >= 1");
    if (kind == DecoderKind::kBeam && beam == 0) throw UsageError("decoder: beam must be >= 1");
    if (kind == DecoderKind::kTopK && top_k == 0) throw UsageError("decoder: top_k must be >= 1");
    if (kind == DecoderKind::kTopK && !(temperature > 0.0)) throw UsageError("decoder: temperature must be > 0");
    if (kind == DecoderKind::kTopP && !(top_p > 0.0 && top_p <= 1.0)) throw UsageError("decoder: top_p must be in (0, 1]");
    if (kind == DecoderKind::kTypical && !(tau > 0.0 && tau <= 1.0)) throw UsageError("decoder: tau must be in (0, 1]");
  }
};

struct Decoded {
  TokenSeq tokens;
  double log_prob = 0.0;  // under the unmasked model, EOS included
  bool unsatisfied = false;
};

// ---- truncation filters on a plain probability vector ------------------------
// Each returns the kept indices in rank order; masses are not renormalized.

/// The k most probable entries, ties to the lower index.
inline std::vector<std::size_t> topk_support(const std::vector<double>& p, std::size_t k) {
  if (k == 0) throw UsageError("topk_support: k must be >= 1");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

namespace detail {

// Mass threshold with slack for float accumulation: keeps p = 1 at full
// support and lets a token whose mass equals the threshold close the prefix.
inline std::vector<std::size_t> mass_prefix(const std::vector<double>& p, const std::vector<std::size_t>& order,
                                            double threshold) {
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  std::vector<std::size_t> keep;
  double cum = 0.0;
  for (std::size_t i : order) {
    keep.push_back(i);
    cum += p[i];
    if (threshold < 1.0 && cum >= threshold * total - 1e-12) break;
  }
  return keep;
}

}  // namespace detail

/// Smallest probability-sorted prefix with cumulative mass >= top_p.
inline std::vector<std::size_t> topp_support(const std::vector<double>& p, double top_p) {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw UsageError("topp_support: p must be in (0, 1]");
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  return detail::mass_prefix(p, order, top_p);
}

/// Entries ranked by |-ln p - H| ascending (H in nats). Distances are compared
/// on a 1e-9 grid; equal distances put the less probable entry first, then
/// the lower index.
inline std::vector<std::size_t> typical_ranking(const std::vector<double>& p) {
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= (x / total) * std::log(x / total);
  std::vector<std::size_t> order;
  std::vector<std::int64_t> dist(p.size(), 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) continue;
    order.push_back(i);
    dist[i] = std::llround(std::fabs(-std::log(p[i] / total) - h) * 1e9);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return p[a] < p[b];
  });
  return order;
}

inline std::vector<std::size_t> typical_support(const std::vector<double>& p, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw UsageError("typical_support: tau must be in (0, 1]");
  return detail::mass_prefix(p, typical_ranking(p), tau);
}

// ---- constrained decoding state --------------------------------------------------

namespace detail {

struct ConceptIds {
  std::vector<TokenId> a, b;  // vocabulary ids that stem-match each concept
};

inline ConceptIds concept_ids(const GeneratorModel& m, const ConceptPair& pair) {
  ConceptIds c;
  for (TokenId id = 3; id < m.vocab.size(); ++id) {
    if (stem_match(m.vocab.token(id), pair.a)) c.a.push_back(id);
    if (stem_match(m.vocab.token(id), pair.b)) c.b.push_back(id);
  }
  return c;
}

struct Hyp {
  std::vector<TokenId> ids;
  double logp = 0.0;
  bool met_a = false, met_b = false;
  bool finished = false;
};

/// Multiplies `p` by the allowed-token mask for hypothesis `h`.
inline void mask(std::vector<double>& p, const Hyp& h, const ConceptIds& c, std::size_t max_len, bool require) {
  p[kBos] = 0.0;
  p[kUnk] = 0.0;
  const std::size_t len = h.ids.size();
  if (len >= max_len) {
    std::fill(p.begin(), p.end(), 0.0);
    p[kEos] = 1.0;
    return;
  }
  if (!require) return;
  const std::size_t unmet = (h.met_a ? 0 : 1) + (h.met_b ? 0 : 1);
  if (unmet > 0) p[kEos] = 0.0;
  if (unmet > 0 && max_len - len <= unmet) {
    std::vector<bool> allowed(p.size(), false);
    bool any = false;
    for (const auto* ids : {h.met_a ? nullptr : &c.a, h.met_b ? nullptr : &c.b}) {
      if (!ids) continue;
      for (TokenId id : *ids) allowed[id] = any = true;
    }
    if (!any) return;  // unsatisfiable: leave the distribution alone
    for (std::size_t w = 0; w < p.size(); ++w)
      if (!allowed[w]) p[w] = 0.0;
  }
}

inline void advance(Hyp& h, TokenId w, const ConceptIds& c) {
  if (w == kEos) {
    h.finished = true;
    return;
  }
  h.ids.push_back(w);
  if (std::find(c.a.begin(), c.a.end(), w) != c.a.end()) h.met_a = true;
  if (std::find(c.b.begin(), c.b.end(), w) != c.b.end()) h.met_b = true;
}

inline Decoded finish(const GeneratorModel& m, const Hyp& h, bool require) {
  return {m.decode(h.ids), h.logp, require && !(h.met_a && h.met_b)};
}

inline TokenId tail(const std::vector<TokenId>& ids, std::size_t back) {
  return ids.size() >= back ? ids[ids.size() - back] : kBos;
}

}  // namespace detail

/// Beam search; finished hypotheses keep their beam slot and decoding stops
/// once every slot is finished. Ties break by score, then parent rank, then
/// token id. With constraints and beam > 1 the slots are shared out between
/// banks of hypotheses that have met 0, 1 or 2 concepts (higher banks get the
/// remainder), and unused quota goes to the best leftover candidates. With
/// beam = 1 this is greedy decoding.
inline Decoded generate_beam(const GeneratorModel& m, const ComposedGeneratorInput& in, std::size_t beam,
                             std::size_t max_len, bool require_concepts) {
  if (beam == 0) throw UsageError("generate_beam: beam must be >= 1");
  if (max_len == 0) throw UsageError("generate_beam: max_len must be >= 1");
  const StepModel step(m, in);
  const auto cids = detail::concept_ids(m, in.pair);
  std::vector<detail::Hyp> hyps(1);
  std::vector<double> dist;
  const bool banks = require_concepts && beam > 1;

  struct Cand {
    double score;
    std::size_t parent;
    TokenId token;  // kBos marks "carry a finished hypothesis"
    detail::Hyp hyp;
  };
  auto better = [](const Cand& x, const Cand& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.parent != y.parent) return x.parent < y.parent;
    return x.token < y.token;
  };

  for (std::size_t guard = 0; guard <= max_len + 1; ++guard) {
    std::vector<Cand> cands;
    for (std::size_t r = 0; r < hyps.size(); ++r) {
      const auto& h = hyps[r];
      if (h.finished) {
        cands.push_back({h.logp, r, kBos, h});
        continue;
      }
      step.distribution(detail::tail(h.ids, 2), detail::tail(h.ids, 1), dist);
      std::vector<double> allowed = dist;
      detail::mask(allowed, h, cids, max_len, require_concepts);
      for (std::size_t w = 0; w < dist.size(); ++w) {
        if (!(allowed[w] > 0.0)) continue;
        detail::Hyp next = h;
        next.logp += std::log(dist[w]);
        detail::advance(next, static_cast<TokenId>(w), cids);
        cands.push_back({next.logp, r, static_cast<TokenId>(w), std::move(next)});
      }
    }
    std::sort(cands.begin(), cands.end(), better);
    std::vector<bool> picked(cands.size(), false);
    std::vector<std::size_t> chosen;
    if (banks) {
      std::size_t quota[3] = {beam / 3, beam / 3, beam / 3};
      for (std::size_t r = 0; r < beam % 3; ++r) ++quota[2 - r];
      for (std::size_t i = 0; i < cands.size(); ++i) {
        const std::size_t b = cands[i].hyp.met_a + cands[i].hyp.met_b;
        if (quota[b] == 0) continue;
        --quota[b];
        picked[i] = true;
        chosen.push_back(i);
      }
    }
    for (std::size_t i = 0; i < cands.size() && chosen.size() < beam; ++i)
      if (!picked[i]) {
        picked[i] = true;
        chosen.push_back(i);
      }
    std::sort(chosen.begin(), chosen.end());
    std::vector<detail::Hyp> next;
    bool all_done = true;
    for (std::size_t i : chosen) {
      all_done = all_done && cands[i].hyp.finished;
      next.push_back(std::move(cands[i].hyp));
    }
    hyps = std::move(next);
    if (all_done) break;
  }
  // Best satisfied hypothesis, else the best one.
  for (const auto& h : hyps)
    if (!require_concepts || (h.met_a && h.met_b)) return detail::finish(m, h, require_concepts);
  return detail::finish(m, hyps.front(), require_concepts);
}

namespace detail {

template <class Filter>
Decoded sample_with(const GeneratorModel& m, const ComposedGeneratorInput& in, std::size_t max_len,
                    bool require, std::uint64_t seed, double temperature, Filter&& filter) {
  if (max_len == 0) throw UsageError("sampling: max_len must be >= 1");
  const StepModel step(m, in);
  const auto cids = concept_ids(m, in.pair);
  Rng rng(seed);
  Hyp h;
  std::vector<double> dist;
  while (!h.finished) {
    step.distribution(tail(h.ids, 2), tail(h.ids, 1), dist);
    std::vector<double> q = dist;
    mask(q, h, cids, max_len, require);
    if (temperature != 1.0)
      for (double& x : q) x = x > 0.0 ? std::pow(x, 1.0 / temperature) : 0.0;
    const std::vector<std::size_t> support = filter(q);
    std::vector<double> w(q.size(), 0.0);
    for (std::size_t i : support) w[i] = q[i];
    const auto tok = static_cast<TokenId>(rng.categorical(w));
    h.logp += std::log(dist[tok]);
    advance(h, tok, cids);
  }
  return finish(m, h, require);
}

}  // namespace detail

inline Decoded sample_topk(const GeneratorModel& m, const ComposedGeneratorInput& in, std::size_t k,
                           double temperature, std::uint64_t seed, std::size_t max_len = 25,
                           bool require_concepts = true) {
  if (k == 0) throw UsageError("sample_topk: k must be >= 1");
  if (!(temperature > 0.0)) throw UsageError("sample_topk: temperature must be > 0");
  return detail::sample_with(m, in, max_len, require_concepts, seed, temperature,
                             [k](const std::vector<double>& q) { return topk_support(q, k); });
}

inline Decoded sample_topp(const GeneratorModel& m, const ComposedGeneratorInput& in, double p, std::uint64_t seed,
                           std::size_t max_len = 25, bool require_concepts = true) {
  if (!(p > 0.0 && p <= 1.0)) throw UsageError("sample_topp: p must be in (0, 1]");
  return detail::sample_with(m, in, max_len, require_concepts, seed, 1.0,
                             [p](const std::vector<double>& q) { return topp_support(q, p); });
}

inline Decoded sample_typical(const GeneratorModel& m, const ComposedGeneratorInput& in, double tau,
                              std::uint64_t seed, std::size_t max_len = 25, bool require_concepts = true) {
  if (!(tau > 0.0 && tau <= 1.0)) throw UsageError("sample_typical: tau must be in (0, 1]");
  return detail::sample_with(m, in, max_len, require_concepts, seed, 1.0,
                             [tau](const std::vector<double>& q) { return typical_support(q, tau); });
}

inline Decoded decode(const GeneratorModel& m, const ComposedGeneratorInput& in, const DecoderConfig& cfg,
                      std::uint64_t seed) {
  cfg.validate();
  switch (cfg.kind) {
    case DecoderKind::kBeam: return generate_beam(m, in, cfg.beam, cfg.max_len, cfg.require_concepts);
    case DecoderKind::kTopK:
      return sample_topk(m, in, cfg.top_k, cfg.temperature, seed, cfg.max_len, cfg.require_concepts);
    case DecoderKind::kTopP: return sample_topp(m, in, cfg.top_p, seed, cfg.max_len, cfg.require_concepts);
    case DecoderKind::kTypical: return sample_typical(m, in, cfg.tau, seed, cfg.max_len, cfg.require_concepts);
  }
  throw UsageError("decode: unknown decoder");
}

struct GenerationSet {
  ConceptPair pair;
  std::vector<TokenSeq> outputs;
  std::vector<bool> unsatisfied;
};

/// One output per expert; expert i reads context_sets[i].
inline GenerationSet generate_set(const GeneratorModel& m, const ConceptPair& pair,
                                  const std::vector<std::vector<TokenSeq>>& context_sets, const DecoderConfig& cfg) {
  if (context_sets.size() != m.n_experts())
    throw UsageError("generate_set: " + std::to_string(context_sets.size()) + " context sets for " +
                     std::to_string(m.n_experts()) + " experts");
  GenerationSet out{pair, {}, {}};
  for (std::size_t i = 0; i < m.n_experts(); ++i) {
    const ComposedGeneratorInput in{m.prefixes[i], pair, context_sets[i]};
    const auto d = decode(m, in, cfg, derive_seed(cfg.seed, pair.str() + "#" + std::to_string(i)));
    out.outputs.push_back(d.tokens);
    out.unsatisfied.push_back(d.unsatisfied);
  }
  return out;
}

}  // namespace moree::generation
