// moree: command-line driver for the retrieval + generation pipeline.
//
//   moree build-dataset --config cfg.json
//   moree index         --config cfg.json
//   moree train         --config cfg.json [--single-retriever] [--no-regularizer] [--random-matching]
//   moree generate      --config cfg.json [--split test] [--decoder beam|topk|topp|typical]
//   moree evaluate      --generations g.jsonl --references test.jsonl [--out report]
//   moree report        a.tsv b.tsv ...
//   moree grid          --config cfg.json --grid grid.json
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "moree/moree.hpp"

namespace {

using moree::pipeline::PipelineConfig;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string workdir;
  bool single_retriever = false, no_regularizer = false, random_matching = false;
  std::string decoder;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c, bool ablations) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Override every seed in the config");
  app->add_option("--workdir", c.workdir, "Override paths.workdir");
  app->add_flag("-q,--quiet", c.quiet, "Suppress progress messages");
  if (ablations) {
    app->add_flag("--single-retriever", c.single_retriever, "Ablation: one retriever expert");
    app->add_flag("--no-regularizer", c.no_regularizer, "Ablation: alpha = 0");
    app->add_flag("--random-matching", c.random_matching, "Ablation: random target matching");
    app->add_option("--decoder", c.decoder, "beam|topk|topp|typical")
        ->check(CLI::IsMember({"beam", "topk", "topp", "typical"}));
  }
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : moree::pipeline::load_config(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  if (!c.workdir.empty()) cfg.workdir = c.workdir;
  cfg.single_retriever = cfg.single_retriever || c.single_retriever;
  cfg.no_regularizer = cfg.no_regularizer || c.no_regularizer;
  cfg.random_matching = cfg.random_matching || c.random_matching;
  if (!c.decoder.empty()) cfg.decoder.kind = moree::generation::parse_decoder(c.decoder);
  cfg.validate();
  return cfg;
}

moree::pipeline::Log logger(const Common& c) {
  if (c.quiet) return moree::pipeline::quiet;
  return [](const std::string& m) { std::cerr << "moree: " << m << "\n"; };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture of retrievers and generators for diverse concept-pair sentences"};
  app.require_subcommand(1);
  app.set_version_flag("--version", moree::pipeline::kVersion);

  Common common;
  auto* build = app.add_subcommand("build-dataset", "Cluster, verify, dedup and split concept-pair records");
  add_common(build, common, false);
  std::string keys_out;
  build->add_option("--print-keys", keys_out, "Write sentence-vector keys to this file and exit");

  auto* index = app.add_subcommand("index", "Ingest corpora and build the inverted index");
  add_common(index, common, false);

  auto* train = app.add_subcommand("train", "Train the retriever and generator mixtures");
  add_common(train, common, true);

  auto* generate = app.add_subcommand("generate", "Retrieve contexts and decode one sentence per expert");
  add_common(generate, common, true);
  std::string split = "test";
  generate->add_option("--split", split, "Dataset split to generate for")->check(CLI::IsMember({"train", "dev", "test"}));

  auto* evaluate = app.add_subcommand("evaluate", "Score generations against references");
  std::string gen_path, ref_path, input_path, out_prefix, name = "model";
  bool per_set = false;
  evaluate->add_option("--generations", gen_path, "Generations JSONL")->check(CLI::ExistingFile);
  evaluate->add_option("--references", ref_path, "Dataset split JSONL")->check(CLI::ExistingFile);
  evaluate->add_option("--input", input_path, "JSONL of {pair, candidates, references}")->check(CLI::ExistingFile);
  evaluate->add_option("--out", out_prefix, "Write <out>.tsv and <out>.txt");
  evaluate->add_option("--name", name, "Row label");
  evaluate->add_flag("--per-set", per_set, "Success rate per set instead of per sentence");

  auto* report = app.add_subcommand("report", "Render report TSV files as one table");
  std::vector<std::string> tsvs;
  report->add_option("tsv", tsvs, "Report TSV files")->required()->check(CLI::ExistingFile);

  auto* grid = app.add_subcommand("grid", "Run train/generate/evaluate for each override in a grid file");
  add_common(grid, common, true);
  std::string grid_path;
  grid->add_option("--grid", grid_path, "JSON array of partial config objects")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    namespace pl = moree::pipeline;
    if (*build) {
      const auto cfg = resolve(common);
      if (!keys_out.empty()) {
        pl::write_text(keys_out, pl::sentence_keys(cfg.records));
        return 0;
      }
      const auto r = pl::cmd_build_dataset(cfg, logger(common));
      std::cout << moree::dataset::render_stats(r.stats);
    } else if (*index) {
      pl::cmd_index(resolve(common), logger(common));
    } else if (*train) {
      pl::cmd_train(resolve(common), logger(common));
    } else if (*generate) {
      pl::cmd_generate(resolve(common), split, logger(common));
    } else if (*evaluate) {
      std::vector<moree::metrics::EvalItem> items;
      if (!input_path.empty()) {
        items = pl::read_eval_items(input_path);
      } else {
        if (gen_path.empty() || ref_path.empty())
          throw moree::UsageError("evaluate: need --input, or --generations with --references");
        items = pl::align_for_eval(gen_path, ref_path);
      }
      const auto rep = pl::evaluate_and_write(items, per_set, name, out_prefix);
      std::cout << moree::metrics::render_table({rep});
    } else if (*report) {
      std::cout << pl::cmd_report(tsvs);
    } else if (*grid) {
      const auto base = resolve(common);
      const auto overrides = pl::read_json(grid_path);
      if (!overrides.is_array()) throw moree::UsageError("grid: file must hold a JSON array");
      std::vector<moree::metrics::MetricReport> rows;
      for (std::size_t i = 0; i < overrides.size(); ++i) {
        PipelineConfig cfg = base;
        pl::apply_json(cfg, overrides[i]);
        cfg.workdir = pl::in_dir(base.workdir, "grid-" + std::to_string(i));
        cfg.validate();
        pl::ensure_dir(cfg.workdir);
        for (const char* f : {"corpus.jsonl", "index.json"})
          std::filesystem::copy_file(pl::in_dir(base.workdir, f), pl::in_dir(cfg.workdir, f),
                                     std::filesystem::copy_options::overwrite_existing);
        pl::cmd_train(cfg, logger(common));
        pl::cmd_generate(cfg, "dev", logger(common));
        const auto items = pl::align_for_eval(pl::in_dir(cfg.workdir, "generations-dev.jsonl"),
                                              pl::in_dir(cfg.dataset_dir, "dev.jsonl"));
        rows.push_back(pl::evaluate_and_write(items, cfg.success_per_set, "grid-" + std::to_string(i),
                                              pl::in_dir(cfg.workdir, "report-dev")));
      }
      pl::write_text(pl::in_dir(base.workdir, "grid.tsv"), moree::metrics::render_tsv(rows));
      std::cout << moree::metrics::render_table(rows);
    }
  } catch (const moree::UsageError& e) {
    std::cerr << "moree: usage error: " << e.what() << "\n";
    return 1;
  } catch (const moree::DataError& e) {
    std::cerr << "moree: data error: " << e.what() << "\n";
    return 2;
  } catch (const moree::NumericError& e) {
    std::cerr << "moree: numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "moree: data error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
