#pragma once

// External sentence corpora, the inverted index over them, and per-pair
// candidate pools (with word-vector substitution when a pair is rare).

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "moree/common.hpp"
#include "moree/text.hpp"
#include "moree/vectors.hpp"

namespace moree {

using SentenceId = std::uint32_t;

struct Corpus {
  std::vector<TokenSeq> sentences;  // dense ids 0..N-1
  std::vector<std::string> sources;

  std::size_t size() const { return sentences.size(); }

  /// Appends a sentence; empty sequences are not stored.
  bool add(TokenSeq tokens, std::string source = {}) {
    if (tokens.empty()) return false;
    sentences.push_back(std::move(tokens));
    sources.push_back(std::move(source));
    return true;
  }
};

enum class CorpusFormat { kPlain, kJsonl };

inline CorpusFormat parse_corpus_format(const std::string& s) {
  if (s == "plain" || s == "txt") return CorpusFormat::kPlain;
  if (s == "jsonl") return CorpusFormat::kJsonl;
  throw UsageError("unknown corpus format '" + s + "' (expected plain|jsonl)");
}

/// Appends every sentence of `path` to `corpus`. Plain files hold one sentence
/// per line; JSONL records need a string "text" field and may carry "source".
inline void ingest_into(Corpus& corpus, const std::string& path, CorpusFormat format,
                        const std::string& default_source = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (format == CorpusFormat::kPlain) {
      corpus.add(tokenize(line), default_source);
      continue;
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": invalid JSON (" + e.what() + ")");
    }
    if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string())
      throw DataError(path + ":" + std::to_string(lineno) + ": record has no string \"text\" field");
    std::string source = default_source;
    if (rec.contains("source") && rec["source"].is_string()) source = rec["source"].get<std::string>();
    corpus.add(tokenize(rec["text"].get<std::string>()), std::move(source));
  }
}

inline Corpus ingest(const std::string& path, CorpusFormat format) {
  Corpus c;
  ingest_into(c, path, format);
  return c;
}

class InvertedIndex {
 public:
  const std::map<Token, std::vector<SentenceId>>& postings() const { return postings_; }

  const std::vector<SentenceId>& lookup(const Token& t) const {
    static const std::vector<SentenceId> kEmpty;
    auto it = postings_.find(t);
    return it == postings_.end() ? kEmpty : it->second;
  }

  /// Ids of sentences holding any token that stem-matches `concept_token`,
  /// ascending.
  std::vector<SentenceId> matching(const Token& concept_token) const {
    std::vector<SentenceId> ids;
    for (const auto& form : stem_forms(concept_token)) {
      auto it = tokens_by_form_.find(form);
      if (it == tokens_by_form_.end()) continue;
      for (const auto& tok : it->second) {
        const auto& p = lookup(tok);
        ids.insert(ids.end(), p.begin(), p.end());
      }
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }

  /// Merges a partial index built over a disjoint, higher id range.
  void merge(InvertedIndex&& other) {
    for (auto& [tok, ids] : other.postings_) {
      auto& dst = postings_[tok];
      dst.insert(dst.end(), ids.begin(), ids.end());
    }
  }

  void add_sentence(SentenceId id, const TokenSeq& seq) {
    for (const auto& t : seq) {
      auto& p = postings_[t];
      if (p.empty() || p.back() != id) p.push_back(id);
    }
  }

  /// Rebuilds an index from saved postings (ids sorted, deduplicated).
  static InvertedIndex from_postings(std::map<Token, std::vector<SentenceId>> postings) {
    InvertedIndex idx;
    idx.postings_ = std::move(postings);
    idx.finalize();
    return idx;
  }

  void finalize() {
    tokens_by_form_.clear();
    for (auto& [tok, ids] : postings_) {
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      for (auto& f : stem_forms(tok)) tokens_by_form_[f].push_back(tok);
    }
  }

 private:
  std::map<Token, std::vector<SentenceId>> postings_;
  std::map<std::string, std::vector<Token>> tokens_by_form_;
};

/// Builds postings over the corpus. With workers > 1 the id range is split into
/// contiguous chunks and merged in chunk order, so output does not depend on
/// the worker count.
inline InvertedIndex build_index(const Corpus& corpus, unsigned workers = 1) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, corpus.size()))));
  std::vector<InvertedIndex> parts(workers);
  const std::size_t chunk = (corpus.size() + workers - 1) / workers;
  auto work = [&](unsigned w) {
    const std::size_t lo = w * chunk, hi = std::min(corpus.size(), lo + chunk);
    for (std::size_t i = lo; i < hi; ++i)
      parts[w].add_sentence(static_cast<SentenceId>(i), corpus.sentences[i]);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  InvertedIndex index = std::move(parts[0]);
  for (unsigned w = 1; w < workers; ++w) index.merge(std::move(parts[w]));
  index.finalize();
  return index;
}

struct PoolMember {
  SentenceId id = 0;
  bool substituted = false;
  TokenSeq tokens;  // rewritten text for substituted members
};

struct CandidatePool {
  ConceptPair pair;
  std::vector<PoolMember> members;
  std::vector<std::string> warnings;
};

struct Rewrite {
  SentenceId id = 0;
  TokenSeq tokens;
  double similarity = 0.0;  // cosine of the replaced token to the missing concept
};

struct FallbackResult {
  std::vector<Rewrite> rewrites;
  std::vector<std::string> warnings;
};

/// Rewrites sentences that mention exactly one concept of the pair: the token
/// most similar to the missing concept (by cosine) is replaced with it.
/// Rewrites are ranked by that similarity, descending, ties to lower id.
inline FallbackResult substitute_fallback(const Corpus& corpus, const ConceptPair& pair,
                                          std::size_t needed, const WordVectors& vectors) {
  FallbackResult out;
  if (needed == 0) return out;
  for (const Token* c : {&pair.a, &pair.b}) {
    if (!vectors.contains(*c)) {
      out.warnings.push_back("no embedding for concept '" + *c + "'; substitution disabled");
      return out;
    }
  }
  for (SentenceId id = 0; id < corpus.size(); ++id) {
    const auto& seq = corpus.sentences[id];
    const bool has_a = contains_concept(seq, pair.a), has_b = contains_concept(seq, pair.b);
    if (has_a == has_b) continue;
    const Token& present = has_a ? pair.a : pair.b;
    const Token& missing = has_a ? pair.b : pair.a;
    const auto& target = *vectors.find(missing);
    std::size_t best_pos = seq.size();
    double best_sim = -2.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (stem_match(seq[i], present)) continue;
      const auto* v = vectors.find(seq[i]);
      if (!v) continue;
      double sim;
      try {
        sim = cosine(*v, target);
      } catch (const UsageError&) {
        continue;  // zero vector
      }
      if (sim > best_sim) {
        best_sim = sim;
        best_pos = i;
      }
    }
    if (best_pos == seq.size()) continue;
    Rewrite r{id, seq, best_sim};
    r.tokens[best_pos] = missing;
    out.rewrites.push_back(std::move(r));
  }
  std::stable_sort(out.rewrites.begin(), out.rewrites.end(), [](const Rewrite& x, const Rewrite& y) {
    if (x.similarity != y.similarity) return x.similarity > y.similarity;
    return x.id < y.id;
  });
  if (out.rewrites.size() > needed) out.rewrites.resize(needed);
  return out;
}

/// Sentences containing both concepts (ascending id), topped up to `min_size`
/// with substituted rewrites appended after the exact matches.
inline CandidatePool candidate_pool(const InvertedIndex& index, const Corpus& corpus,
                                    const ConceptPair& pair, std::size_t min_size,
                                    const WordVectors& vectors) {
  if (min_size == 0) throw UsageError("candidate_pool: min_size must be >= 1");
  CandidatePool pool{pair, {}, {}};
  const auto ids_a = index.matching(pair.a);
  const auto ids_b = index.matching(pair.b);
  std::vector<SentenceId> both;
  std::set_intersection(ids_a.begin(), ids_a.end(), ids_b.begin(), ids_b.end(), std::back_inserter(both));
  for (SentenceId id : both) pool.members.push_back({id, false, corpus.sentences[id]});
  if (pool.members.size() < min_size) {
    auto fb = substitute_fallback(corpus, pair, min_size - pool.members.size(), vectors);
    for (auto& r : fb.rewrites) pool.members.push_back({r.id, true, std::move(r.tokens)});
    for (auto& w : fb.warnings) pool.warnings.push_back(std::move(w));
  }
  return pool;
}

}  // namespace moree
