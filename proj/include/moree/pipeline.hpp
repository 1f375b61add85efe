#pragma once

// End-to-end experiment driver: configuration, run manifests and one function
// per pipeline stage. Every artifact carries a config hash in its "run" field:
// the hash of the settings its stage reads (see stage_hash), or of the whole
// resolved config for generation outputs.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "moree/common.hpp"
#include "moree/corpus.hpp"
#include "moree/dataset.hpp"
#include "moree/decoding.hpp"
#include "moree/generator.hpp"
#include "moree/metrics.hpp"
#include "moree/moe.hpp"
#include "moree/retriever.hpp"

namespace moree::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

struct CorpusSpec {
  std::string path;
  std::string format = "plain";
};

struct PipelineConfig {
  // paths
  std::vector<CorpusSpec> corpora;
  std::string word_vectors, records, graph, sentence_vectors;
  std::string dataset_dir = "dataset";
  std::string workdir = "run";

  // dataset builder
  std::size_t max_depth = 3;
  std::vector<std::string> relations;
  double dedup_threshold = 0.75;
  bool first_five = false;
  std::size_t dev_size = 0, test_size = 0;
  double dev_unseen = 0.9173, test_unseen = 0.9831;
  std::size_t move_budget = 20000;
  std::uint64_t dataset_seed = 1;

  // retriever
  std::size_t retriever_n = 3;
  std::size_t prefix_len = 5;
  std::size_t k = 3;
  double alpha = 1.0;
  std::size_t epochs = 20;
  double learning_rate = 0.5;
  std::size_t batch_size = 16;
  std::size_t hash_dim = 1u << 16;
  std::size_t pool_min = 3;
  bool distinct_contexts = false;
  std::string regularizer_mode = "per_example";
  std::uint64_t retriever_seed = 1;

  // generator
  std::size_t generator_n = 3;
  double lambda = 0.5, beta = 0.7, add_k = 0.01;
  std::size_t em_iters = 10;
  bool one_to_one = false;
  bool random_init = false;
  std::uint64_t generator_seed = 1;

  // decoder
  generation::DecoderConfig decoder;

  // ablations
  bool single_retriever = false;
  bool no_regularizer = false;
  bool random_matching = false;

  // metrics
  bool success_per_set = false;

  unsigned workers = 1;

  void set_seed(std::uint64_t s) { dataset_seed = retriever_seed = generator_seed = decoder.seed = s; }

  std::size_t effective_retrievers() const { return single_retriever ? 1 : retriever_n; }
  double effective_alpha() const { return no_regularizer ? 0.0 : alpha; }

  void validate() const {
    if (retriever_n == 0 || generator_n == 0) throw UsageError("config: expert counts must be >= 1");
    if (k == 0) throw UsageError("config: retriever.k must be >= 1");
    if (pool_min == 0) throw UsageError("config: retriever.pool_min must be >= 1");
    if (regularizer_mode != "per_example" && regularizer_mode != "batch_marginal")
      throw UsageError("config: retriever.regularizer must be per_example|batch_marginal");
    generation::GeneratorConfig{lambda, beta, add_k}.validate();
    decoder.validate();
  }
};

namespace detail {

// Reads known keys from `obj`, rejecting unknown ones.
class Reader {
 public:
  Reader(const json& obj, std::string section) : obj_(obj), section_(std::move(section)) {
    if (!obj_.is_object()) throw UsageError("config: section '" + section_ + "' must be an object");
  }
  template <class T>
  void get(const char* key, T& dst) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      dst = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw UsageError("config: bad value for " + section_ + "." + key);
    }
  }
  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) throw UsageError("config: unknown key " + section_ + "." + k);
  }

 private:
  const json& obj_;
  std::string section_;
  std::set<std::string> seen_;
};

inline std::string resolve(const std::string& p, const fs::path& base) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace detail

inline json to_json(const PipelineConfig& c) {
  json corpora = json::array();
  for (const auto& s : c.corpora) corpora.push_back({{"path", s.path}, {"format", s.format}});
  const auto& d = c.decoder;
  return {
      {"paths",
       {{"corpora", corpora},
        {"word_vectors", c.word_vectors},
        {"records", c.records},
        {"graph", c.graph},
        {"sentence_vectors", c.sentence_vectors},
        {"dataset_dir", c.dataset_dir},
        {"workdir", c.workdir}}},
      {"dataset",
       {{"max_depth", c.max_depth},
        {"relations", c.relations},
        {"dedup_threshold", c.dedup_threshold},
        {"first_five", c.first_five},
        {"dev_size", c.dev_size},
        {"test_size", c.test_size},
        {"dev_unseen", c.dev_unseen},
        {"test_unseen", c.test_unseen},
        {"move_budget", c.move_budget},
        {"seed", c.dataset_seed}}},
      {"retriever",
       {{"n", c.retriever_n},
        {"m", c.prefix_len},
        {"k", c.k},
        {"alpha", c.alpha},
        {"epochs", c.epochs},
        {"lr", c.learning_rate},
        {"batch", c.batch_size},
        {"hash_dim", c.hash_dim},
        {"pool_min", c.pool_min},
        {"distinct_contexts", c.distinct_contexts},
        {"regularizer", c.regularizer_mode},
        {"seed", c.retriever_seed}}},
      {"generator",
       {{"n", c.generator_n},
        {"lambda", c.lambda},
        {"beta", c.beta},
        {"add_k", c.add_k},
        {"em_iters", c.em_iters},
        {"one_to_one", c.one_to_one},
        {"random_init", c.random_init},
        {"seed", c.generator_seed}}},
      {"decoder",
       {{"kind", generation::decoder_name(d.kind)},
        {"beam", d.beam},
        {"max_len", d.max_len},
        {"require_concepts", d.require_concepts},
        {"top_k", d.top_k},
        {"temperature", d.temperature},
        {"top_p", d.top_p},
        {"tau", d.tau},
        {"seed", d.seed}}},
      {"ablation",
       {{"single_retriever", c.single_retriever},
        {"no_regularizer", c.no_regularizer},
        {"random_matching", c.random_matching}}},
      {"metrics", {{"success_per_set", c.success_per_set}}},
      {"workers", c.workers},
  };
}

/// Applies a (possibly partial) config object on top of `c`. Relative paths
/// are resolved against `base`.
inline void apply_json(PipelineConfig& c, const json& j, const fs::path& base = {}) {
  detail::Reader top(j, "config");
  if (j.contains("paths")) {
    detail::Reader r(j["paths"], "paths");
    json corpora;
    r.get("corpora", corpora);
    if (!corpora.is_null()) {
      c.corpora.clear();
      for (const auto& e : corpora) {
        CorpusSpec s;
        if (e.is_string()) {
          s.path = e.get<std::string>();
        } else {
          detail::Reader cr(e, "paths.corpora[]");
          cr.get("path", s.path);
          cr.get("format", s.format);
          cr.finish();
        }
        s.path = detail::resolve(s.path, base);
        c.corpora.push_back(s);
      }
    }
    for (auto [key, dst] : {std::pair{"word_vectors", &c.word_vectors}, std::pair{"records", &c.records},
                            std::pair{"graph", &c.graph}, std::pair{"sentence_vectors", &c.sentence_vectors},
                            std::pair{"dataset_dir", &c.dataset_dir}, std::pair{"workdir", &c.workdir}}) {
      std::string before = *dst;
      r.get(key, *dst);
      if (*dst != before) *dst = detail::resolve(*dst, base);
    }
    r.finish();
  }
  if (j.contains("dataset")) {
    detail::Reader r(j["dataset"], "dataset");
    r.get("max_depth", c.max_depth);
    r.get("relations", c.relations);
    r.get("dedup_threshold", c.dedup_threshold);
    r.get("first_five", c.first_five);
    r.get("dev_size", c.dev_size);
    r.get("test_size", c.test_size);
    r.get("dev_unseen", c.dev_unseen);
    r.get("test_unseen", c.test_unseen);
    r.get("move_budget", c.move_budget);
    r.get("seed", c.dataset_seed);
    r.finish();
  }
  if (j.contains("retriever")) {
    detail::Reader r(j["retriever"], "retriever");
    r.get("n", c.retriever_n);
    r.get("m", c.prefix_len);
    r.get("k", c.k);
    r.get("alpha", c.alpha);
    r.get("epochs", c.epochs);
    r.get("lr", c.learning_rate);
    r.get("batch", c.batch_size);
    r.get("hash_dim", c.hash_dim);
    r.get("pool_min", c.pool_min);
    r.get("distinct_contexts", c.distinct_contexts);
    r.get("regularizer", c.regularizer_mode);
    r.get("seed", c.retriever_seed);
    r.finish();
  }
  if (j.contains("generator")) {
    detail::Reader r(j["generator"], "generator");
    r.get("n", c.generator_n);
    r.get("lambda", c.lambda);
    r.get("beta", c.beta);
    r.get("add_k", c.add_k);
    r.get("em_iters", c.em_iters);
    r.get("one_to_one", c.one_to_one);
    r.get("random_init", c.random_init);
    r.get("seed", c.generator_seed);
    r.finish();
  }
  if (j.contains("decoder")) {
    detail::Reader r(j["decoder"], "decoder");
    std::string kind = generation::decoder_name(c.decoder.kind);
    r.get("kind", kind);
    c.decoder.kind = generation::parse_decoder(kind);
    r.get("beam", c.decoder.beam);
    r.get("max_len", c.decoder.max_len);
    r.get("require_concepts", c.decoder.require_concepts);
    r.get("top_k", c.decoder.top_k);
    r.get("temperature", c.decoder.temperature);
    r.get("top_p", c.decoder.top_p);
    r.get("tau", c.decoder.tau);
    r.get("seed", c.decoder.seed);
    r.finish();
  }
  if (j.contains("ablation")) {
    detail::Reader r(j["ablation"], "ablation");
    r.get("single_retriever", c.single_retriever);
    r.get("no_regularizer", c.no_regularizer);
    r.get("random_matching", c.random_matching);
    r.finish();
  }
  if (j.contains("metrics")) {
    detail::Reader r(j["metrics"], "metrics");
    r.get("success_per_set", c.success_per_set);
    r.finish();
  }
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    top.get("seed", s);
    c.set_seed(s);
  }
  top.get("workers", c.workers);
  for (const char* k : {"paths", "dataset", "retriever", "generator", "decoder", "ablation", "metrics"}) {
    json unused;
    top.get(k, unused);
  }
  top.finish();
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  PipelineConfig c;
  apply_json(c, j, fs::absolute(path).parent_path());
  return c;
}

/// Hash of the resolved config, ignoring output locations and worker count.
inline std::string config_hash(const PipelineConfig& c) {
  json j = to_json(c);
  j["paths"].erase("workdir");
  j["paths"].erase("dataset_dir");
  j.erase("workers");
  return hex64(fnv1a64(j.dump()));
}

/// Hash of the config sections one stage reads: "dataset" (records, graph,
/// sentence vectors, builder settings), "index" (corpora), "retriever" (all
/// inputs plus dataset and retriever settings) and "generator" (adds the
/// generator settings). Artifacts carry the hash of their own stage, so
/// toggling a later stage's options leaves earlier artifacts byte-identical.
inline std::string stage_hash(const PipelineConfig& c, const std::string& stage) {
  json full = to_json(c);
  json j;
  if (stage == "dataset") {
    j["paths"] = {{"records", c.records}, {"graph", c.graph}, {"sentence_vectors", c.sentence_vectors}};
    j["dataset"] = full["dataset"];
  } else if (stage == "index") {
    j["corpora"] = full["paths"]["corpora"];
  } else if (stage == "retriever" || stage == "generator") {
    j["paths"] = full["paths"];
    j["paths"].erase("workdir");
    j["paths"].erase("dataset_dir");
    j["dataset"] = full["dataset"];
    j["retriever"] = full["retriever"];
    j["ablation"] = {{"single_retriever", c.single_retriever}, {"no_regularizer", c.no_regularizer}};
    if (stage == "generator") {
      j["generator"] = full["generator"];
      j["ablation"]["random_matching"] = c.random_matching;
    }
  } else {
    throw UsageError("stage_hash: unknown stage '" + stage + "'");
  }
  return hex64(fnv1a64(j.dump()));
}

// ---- file helpers -------------------------------------------------------------------

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_jsonl(const std::string& path, const std::vector<json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + "\n";
  write_text(path, text);
}

inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

/// Re-raises any library error with the stage name prefixed, keeping its type.
template <class Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const UsageError& e) {
    throw UsageError(name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(name + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(name + ": " + e.what());
  }
}

using Log = std::function<void(const std::string&)>;
inline void quiet(const std::string&) {}

/// Writes <dir>/manifest-<command>.json before the command's artifacts. The
/// manifest is the only file with a timestamp.
inline void write_manifest(const PipelineConfig& c, const std::string& dir, const std::string& command,
                           const std::vector<std::string>& artifacts) {
  ensure_dir(dir);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json m{{"command", command},
         {"config_hash", config_hash(c)},
         {"config", to_json(c)},
         {"seeds",
          {{"dataset", c.dataset_seed},
           {"retriever", c.retriever_seed},
           {"generator", c.generator_seed},
           {"decoder", c.decoder.seed}}},
         {"versions",
          {{"moree", kVersion},
           {"retriever_checkpoint", "moree-retriever/1"},
           {"generator_checkpoint", "moree-generator/1"}}},
         {"created_at", stamp},
         {"artifacts", artifacts}};
  write_text((fs::path(dir) / ("manifest-" + command + ".json")).string(), m.dump(2) + "\n");
}

inline std::string in_dir(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

inline json pair_json(const ConceptPair& p) { return json::array({p.a, p.b}); }

inline ConceptPair pair_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw DataError("\"pair\" must hold two concepts");
  return ConceptPair::make(j[0].get<std::string>(), j[1].get<std::string>());
}

// ---- build-dataset ----------------------------------------------------------------------

struct BuildDatasetResult {
  dataset::SplitResult split;
  dataset::DatasetStats stats;
  dataset::BuildResult build;
};

inline BuildDatasetResult cmd_build_dataset(const PipelineConfig& c, const Log& log = quiet) {
  c.validate();
  for (auto [what, p] : {std::pair{"records", &c.records}, std::pair{"graph", &c.graph},
                         std::pair{"sentence_vectors", &c.sentence_vectors}})
    if (p->empty()) throw UsageError(std::string("build-dataset: paths.") + what + " is not set");
  const std::string dir = c.dataset_dir;
  write_manifest(c, dir, "build-dataset", {"train.jsonl", "dev.jsonl", "test.jsonl", "stats.json", "stats.txt"});
  auto recs = stage("load records", [&] { return dataset::load_records(c.records); });
  for (const auto& w : recs.warnings) log("warning: " + w);
  auto graph = stage("load graph", [&] { return dataset::ConceptGraph::load_tsv(c.graph); });
  auto emb = stage("load sentence vectors", [&] { return WordVectors::load(c.sentence_vectors); });
  dataset::BuildOptions opt;
  opt.path.max_depth = c.max_depth;
  opt.path.relations = {c.relations.begin(), c.relations.end()};
  opt.dedup_threshold = c.dedup_threshold;
  opt.first_five = c.first_five;
  BuildDatasetResult r;
  r.build = stage("build", [&] { return dataset::build_examples(recs.records, graph, emb, opt); });
  log("pairs seen " + std::to_string(r.build.pairs_seen) + ", kept " + std::to_string(r.build.examples.size()));
  dataset::SplitSpec spec;
  const std::size_t n = r.build.examples.size();
  if (c.dev_size + c.test_size > n)
    throw UsageError("build-dataset: dev+test sizes exceed the " + std::to_string(n) + " built examples");
  spec.dev = c.dev_size;
  spec.test = c.test_size;
  spec.train = n - spec.dev - spec.test;
  spec.dev_unseen = c.dev_unseen;
  spec.test_unseen = c.test_unseen;
  spec.move_budget = c.move_budget;
  spec.seed = c.dataset_seed;
  r.split = stage("split", [&] { return dataset::split(r.build.examples, spec); });
  for (const auto& w : r.split.warnings) log("warning: " + w);
  r.stats = dataset::stats(r.split);
  dataset::write_examples(in_dir(dir, "train.jsonl"), r.split.train);
  dataset::write_examples(in_dir(dir, "dev.jsonl"), r.split.dev);
  dataset::write_examples(in_dir(dir, "test.jsonl"), r.split.test);
  json sj = dataset::stats_json(r.stats);
  sj["run"] = stage_hash(c, "dataset");
  write_text(in_dir(dir, "stats.json"), sj.dump(2) + "\n");
  write_text(in_dir(dir, "stats.txt"), dataset::render_stats(r.stats));
  return r;
}

/// "key <TAB> sentence" for every record sentence, the keys sentence vectors
/// must be stored under.
inline std::string sentence_keys(const std::string& records_path) {
  const auto recs = dataset::load_records(records_path);
  std::set<std::pair<std::string, std::string>> rows;
  for (const auto& r : recs.records) rows.insert({dataset::sentence_key(r.sentence), detokenize(r.sentence)});
  std::string out;
  for (const auto& [k, s] : rows) out += k + "\t" + s + "\n";
  return out;
}

// ---- index -----------------------------------------------------------------------------

inline void cmd_index(const PipelineConfig& c, const Log& log = quiet) {
  c.validate();
  if (c.corpora.empty()) throw UsageError("index: paths.corpora is empty");
  write_manifest(c, c.workdir, "index", {"corpus.jsonl", "index.json"});
  Corpus corpus;
  stage("ingest", [&] {
    for (const auto& s : c.corpora)
      ingest_into(corpus, s.path, parse_corpus_format(s.format), fs::path(s.path).stem().string());
  });
  const auto index = build_index(corpus, c.workers);
  const std::string run = stage_hash(c, "index");
  std::vector<json> rows;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    rows.push_back({{"id", i}, {"text", detokenize(corpus.sentences[i])}, {"source", corpus.sources[i]}});
  write_jsonl(in_dir(c.workdir, "corpus.jsonl"), rows);
  write_text(in_dir(c.workdir, "index.json"), json{{"run", run}, {"postings", index.postings()}}.dump() + "\n");
  log("indexed " + std::to_string(corpus.size()) + " sentences, " + std::to_string(index.postings().size()) +
      " tokens");
}

struct IndexedCorpus {
  Corpus corpus;
  InvertedIndex index;
};

inline IndexedCorpus load_index(const std::string& workdir) {
  IndexedCorpus ic;
  ic.corpus = ingest(in_dir(workdir, "corpus.jsonl"), CorpusFormat::kJsonl);
  const auto j = read_json(in_dir(workdir, "index.json"));
  auto postings = j.at("postings").get<std::map<Token, std::vector<SentenceId>>>();
  for (const auto& [t, ids] : postings)
    for (SentenceId id : ids)
      if (id >= ic.corpus.size()) throw DataError("index.json: posting id " + std::to_string(id) + " out of range");
  ic.index = InvertedIndex::from_postings(std::move(postings));
  return ic;
}

// ---- train ------------------------------------------------------------------------------

inline WordVectors load_word_vectors(const PipelineConfig& c) {
  return c.word_vectors.empty() ? WordVectors{} : WordVectors::load(c.word_vectors);
}

inline std::vector<Token> prefix_vocabulary(const Corpus& corpus) {
  std::set<Token> v;
  for (const auto& s : corpus.sentences)
    for (const auto& t : s)
      if (!is_reserved(t)) v.insert(t);
  return {v.begin(), v.end()};
}

inline std::map<ConceptPair, CandidatePool> pools_for(const IndexedCorpus& ic, const std::vector<ConceptPair>& pairs,
                                                      std::size_t min_size, const WordVectors& wv, const Log& log) {
  std::map<ConceptPair, CandidatePool> pools;
  for (const auto& p : pairs) {
    if (pools.count(p)) continue;
    auto pool = candidate_pool(ic.index, ic.corpus, p, min_size, wv);
    for (const auto& w : pool.warnings) log("warning: " + w);
    pools.emplace(p, std::move(pool));
  }
  return pools;
}

/// Context sets per generator: generator i reads the retriever set i mod n_r.
inline std::vector<std::vector<TokenSeq>> contexts_for_generators(const retrieval::RetrievalResult& rr,
                                                                  std::size_t n_generators) {
  std::vector<std::vector<TokenSeq>> out;
  for (std::size_t i = 0; i < n_generators; ++i) out.push_back(rr.sets.at(i % rr.sets.size()).sentences);
  return out;
}

inline json context_json(const retrieval::ContextSet& cs, const std::string& run) {
  std::vector<std::string> text;
  for (const auto& s : cs.sentences) text.push_back(detokenize(s));
  return {{"pair", pair_json(cs.pair)}, {"expert", cs.expert}, {"ids", cs.ids},
          {"scores", cs.scores},        {"sentences", text},     {"run", run}};
}

struct TrainArtifacts {
  retrieval::TrainResult retriever;
  std::vector<ExpertIdentifier> retriever_experts;
  generation::EMTrainResult generator;
};

inline std::vector<DatasetExample> load_split(const PipelineConfig& c, const std::string& split) {
  return dataset::read_examples(in_dir(c.dataset_dir, split + ".jsonl"));
}

inline TrainArtifacts cmd_train(const PipelineConfig& c, const Log& log = quiet) {
  c.validate();
  write_manifest(c, c.workdir, "train",
                 {"retriever.json", "generator.json", "contexts-train.jsonl", "trace.json"});
  const std::string run = stage_hash(c, "retriever");
  const auto train = stage("load dataset", [&] { return load_split(c, "train"); });
  if (train.empty()) throw DataError("train: training split is empty");
  std::vector<ConceptPair> all_pairs;
  for (const char* s : {"train", "dev", "test"}) {
    if (!fs::exists(in_dir(c.dataset_dir, std::string(s) + ".jsonl"))) continue;
    for (const auto& ex : load_split(c, s)) all_pairs.push_back(ex.pair);
  }
  const auto ic = stage("load index", [&] { return load_index(c.workdir); });
  const auto wv = stage("load word vectors", [&] { return load_word_vectors(c); });
  std::vector<ConceptPair> train_pairs;
  for (const auto& ex : train) train_pairs.push_back(ex.pair);
  const auto pools = pools_for(ic, train_pairs, c.pool_min, wv, log);
  const auto prefix_vocab = prefix_vocabulary(ic.corpus);

  TrainArtifacts out;
  // Retrieval stage.
  stage("retriever", [&] {
    HardEMConfig hc;
    hc.n_experts = c.effective_retrievers();
    hc.prefix_len = c.prefix_len;
    hc.seed = c.retriever_seed;
    out.retriever_experts = init_experts(hc, prefix_vocab);
    auto ts = retrieval::build_training_set(train, pools, c.retriever_seed);
    for (const auto& w : ts.warnings) log("warning: " + w);
    retrieval::FeatureSpace fsp;
    fsp.hash_dim = c.hash_dim;
    fsp.salt = c.retriever_seed;
    retrieval::TrainConfig tc;
    tc.alpha = c.effective_alpha();
    tc.epochs = c.epochs;
    tc.learning_rate = c.learning_rate;
    tc.batch_size = c.batch_size;
    tc.seed = c.retriever_seed;
    tc.mode = c.regularizer_mode == "per_example" ? retrieval::RegularizerMode::kPerExample
                                                  : retrieval::RegularizerMode::kBatchMarginal;
    out.retriever = retrieval::train(retrieval::RelevanceModel(fsp), out.retriever_experts, ts.examples, wv, tc);
    log("retriever trained: " + std::to_string(ts.examples.size()) + " examples, " +
        std::to_string(out.retriever_experts.size()) + " experts");
  });

  // Contexts for every training pair.
  std::vector<generation::GeneratorExample> gex;
  std::vector<json> ctx_rows;
  stage("retrieve", [&] {
    for (const auto& ex : train) {
      const auto rr = retrieval::retrieve_contexts(out.retriever.model, ex.pair, pools.at(ex.pair), c.k,
                                                   out.retriever_experts, wv, c.distinct_contexts);
      for (const auto& cs : rr.sets) ctx_rows.push_back(context_json(cs, run));
      gex.push_back({ex.pair, ex.targets, {}});
      const auto ctx = contexts_for_generators(rr, c.generator_n);
      for (std::size_t i = 0; i < c.generator_n; ++i) gex.back().inputs.push_back({{i, {}}, ex.pair, ctx[i]});
    }
  });

  // Generation stage.
  stage("generator", [&] {
    HardEMConfig hc;
    hc.n_experts = c.generator_n;
    hc.prefix_len = c.prefix_len;
    hc.seed = c.generator_seed;
    auto prefixes = init_experts(hc, prefix_vocab);
    for (auto& ex : gex)
      for (std::size_t i = 0; i < ex.inputs.size(); ++i) ex.inputs[i].expert = prefixes[i];
    std::vector<const TokenSeq*> sources;
    for (const auto& s : ic.corpus.sentences) sources.push_back(&s);
    std::vector<Token> concepts;
    for (const auto& p : all_pairs) {
      concepts.push_back(p.a);
      concepts.push_back(p.b);
    }
    std::vector<TokenSeq> targets;
    for (const auto& ex : train) targets.insert(targets.end(), ex.targets.begin(), ex.targets.end());
    const auto model = generation::GeneratorModel::create({c.lambda, c.beta, c.add_k}, prefixes, sources, concepts,
                                                          targets, c.generator_seed);
    generation::EMTrainConfig ec;
    ec.iters = c.em_iters;
    ec.seed = c.generator_seed;
    ec.one_to_one = c.one_to_one;
    ec.random_matching = c.random_matching;
    ec.random_init = c.random_init;
    out.generator = generation::train_em(model, gex, ec);
    for (const auto& w : out.generator.warnings) log("warning: " + w);
    log("generator trained: " + std::to_string(out.generator.trace.size()) + " EM iterations");
  });

  json rj = retrieval::to_json(out.retriever.model, out.retriever_experts);
  rj["run"] = run;
  write_text(in_dir(c.workdir, "retriever.json"), rj.dump() + "\n");
  json gj = generation::to_json(out.generator.model);
  gj["run"] = stage_hash(c, "generator");
  write_text(in_dir(c.workdir, "generator.json"), gj.dump() + "\n");
  write_jsonl(in_dir(c.workdir, "contexts-train.jsonl"), ctx_rows);

  json trace{{"run", stage_hash(c, "generator")}, {"retriever", json::array()}, {"generator", json::array()}};
  for (const auto& e : out.retriever.trace)
    trace["retriever"].push_back({{"epoch", e.epoch},
                                  {"estep_loss", e.estep_loss},
                                  {"classification_loss", e.classification_loss},
                                  {"regularizer", e.regularizer},
                                  {"total_loss", e.total_loss}});
  for (const auto& it : out.generator.trace)
    trace["generator"].push_back({{"iteration", it.iteration}, {"loss", it.loss}, {"reassigned", it.reassigned}});
  trace["generator_matching"] = out.generator.chosen;
  write_text(in_dir(c.workdir, "trace.json"), trace.dump(2) + "\n");
  return out;
}

// ---- generate ---------------------------------------------------------------------------

struct GenerateResult {
  std::vector<generation::GenerationSet> sets;
};

inline GenerateResult cmd_generate(const PipelineConfig& c, const std::string& split, const Log& log = quiet) {
  c.validate();
  const std::string out_name = "generations-" + split + ".jsonl";
  write_manifest(c, c.workdir, "generate-" + split, {out_name, "contexts-" + split + ".jsonl"});
  const std::string run = config_hash(c);
  const auto data = stage("load dataset", [&] { return load_split(c, split); });
  const auto ic = stage("load index", [&] { return load_index(c.workdir); });
  const auto wv = stage("load word vectors", [&] { return load_word_vectors(c); });
  const auto retriever = stage("load retriever", [&] {
    const std::string p = in_dir(c.workdir, "retriever.json");
    if (!fs::exists(p)) throw DataError("missing checkpoint " + p);
    return retrieval::from_json(read_json(p));
  });
  const auto& rmodel = retriever.first;
  const auto& rexperts = retriever.second;
  const auto gmodel = stage("load generator", [&] {
    const std::string p = in_dir(c.workdir, "generator.json");
    if (!fs::exists(p)) throw DataError("missing checkpoint " + p);
    return generation::generator_from_json(read_json(p));
  });
  std::vector<ConceptPair> pairs;
  for (const auto& ex : data) pairs.push_back(ex.pair);
  const auto pools = pools_for(ic, pairs, c.pool_min, wv, log);
  GenerateResult res;
  std::vector<json> rows, ctx_rows;
  stage("generate", [&] {
    for (const auto& p : pairs) {
      const auto rr = retrieval::retrieve_contexts(rmodel, p, pools.at(p), c.k, rexperts, wv, c.distinct_contexts);
      for (const auto& cs : rr.sets) ctx_rows.push_back(context_json(cs, run));
      auto set = generation::generate_set(gmodel, p, contexts_for_generators(rr, gmodel.n_experts()), c.decoder);
      std::vector<std::string> text;
      std::vector<std::size_t> experts;
      for (std::size_t i = 0; i < set.outputs.size(); ++i) {
        text.push_back(detokenize(set.outputs[i]));
        experts.push_back(i);
      }
      rows.push_back({{"pair", pair_json(p)},
                      {"outputs", text},
                      {"expert", experts},
                      {"decoder", generation::decoder_name(c.decoder.kind)},
                      {"unsatisfied", set.unsatisfied},
                      {"run", run}});
      res.sets.push_back(std::move(set));
    }
  });
  write_jsonl(in_dir(c.workdir, out_name), rows);
  write_jsonl(in_dir(c.workdir, "contexts-" + split + ".jsonl"), ctx_rows);
  log("generated " + std::to_string(rows.size()) + " sets");
  return res;
}

// ---- evaluate / report --------------------------------------------------------------

/// Pairs generations (JSONL with "pair" and "outputs") with references
/// (dataset JSONL with "pair" and "targets"). Every generated pair must have
/// references; offending pairs are listed in the error.
inline std::vector<metrics::EvalItem> align_for_eval(const std::string& generations_path,
                                                     const std::string& references_path) {
  const auto gen = read_jsonl(generations_path);
  if (gen.empty()) throw DataError("evaluate: " + generations_path + " holds no generations");
  std::map<ConceptPair, std::vector<TokenSeq>> refs;
  for (const auto& ex : dataset::read_examples(references_path)) refs[ex.pair.canonical()] = ex.targets;
  std::vector<metrics::EvalItem> items;
  std::vector<std::string> missing;
  for (const auto& g : gen) {
    metrics::EvalItem it;
    try {
      it.pair = pair_from_json(g.at("pair"));
      for (const auto& s : g.at("outputs")) it.candidates.push_back(tokenize(s.get<std::string>()));
    } catch (const json::exception& e) {
      throw DataError(std::string("evaluate: malformed generation record: ") + e.what());
    }
    auto r = refs.find(it.pair.canonical());
    if (r == refs.end()) {
      missing.push_back(it.pair.str());
      continue;
    }
    it.references = r->second;
    items.push_back(std::move(it));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw DataError("evaluate: no references for pairs: " + list);
  }
  return items;
}

/// Reads {"pair", "candidates", "references"} records.
inline std::vector<metrics::EvalItem> read_eval_items(const std::string& path) {
  std::vector<metrics::EvalItem> items;
  for (const auto& r : read_jsonl(path)) {
    metrics::EvalItem it;
    try {
      it.pair = pair_from_json(r.at("pair"));
      for (const auto& s : r.at("candidates")) it.candidates.push_back(tokenize(s.get<std::string>()));
      for (const auto& s : r.at("references")) it.references.push_back(tokenize(s.get<std::string>()));
    } catch (const json::exception& e) {
      throw DataError(path + ": " + e.what());
    }
    items.push_back(std::move(it));
  }
  if (items.empty()) throw DataError("evaluate: " + path + " holds no records");
  return items;
}

inline metrics::MetricReport evaluate_and_write(const std::vector<metrics::EvalItem>& items, bool per_set,
                                                const std::string& name, const std::string& out_prefix) {
  const auto rep = metrics::evaluate_all(items, per_set, name);
  if (!out_prefix.empty()) {
    write_text(out_prefix + ".tsv", metrics::render_tsv({rep}));
    write_text(out_prefix + ".txt", metrics::render_table({rep}));
  }
  return rep;
}

/// Aligned table over several report TSV files.
inline std::string cmd_report(const std::vector<std::string>& tsv_paths) {
  std::vector<metrics::MetricReport> rows;
  for (const auto& p : tsv_paths)
    for (auto& r : metrics::parse_tsv(read_text(p))) rows.push_back(std::move(r));
  return metrics::render_table(rows);
}

}  // namespace moree::pipeline
