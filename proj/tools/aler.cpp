// aler: staged entity-resolution pipeline.
//
//   aler synth --out DIR [--records N] [--seed S] [--match-rate X]
//   aler ingest|index|partition|resolve|eval --manifest FILE [--override key=value]...
//   aler train --manifest FILE [--oracle file|http] [--strategy NAME] [--override key=value]...
//
// Exit codes: 0 success, 2 validation error, 3 budget exhausted, 1 internal error.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aler/label_server.hpp"
#include "aler/manifest.hpp"
#include "aler/oracle.hpp"
#include "aler/pipeline.hpp"
#include "aler/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;
constexpr int kExitBudget = 3;

struct StageArgs {
  std::string manifest;
  std::vector<std::string> overrides;
};

aler::RunManifest load_manifest(const StageArgs& args, aler::Stage stage) {
  auto manifest = aler::RunManifest::load(args.manifest);
  for (const auto& item : args.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw aler::ValidationError("--override: expected key=value, got \"" + item + "\"");
    }
    manifest.set(item.substr(0, eq), item.substr(eq + 1));
  }
  manifest.validate(stage);
  return manifest;
}

void print_ledger(const aler::BudgetLedger& ledger) {
  std::fprintf(stderr, "labels: seed %zu, validation %zu, loop %zu, total %zu%s\n", ledger.seed(),
               ledger.validation(), ledger.loop(), ledger.total(),
               ledger.truncated ? " (truncated by budget)" : "");
}

int train(const aler::RunManifest& manifest, const std::string& oracle_kind) {
  const auto inputs = aler::load_train_inputs(manifest);
  aler::OracleBudget budget(manifest.budget_cap);
  aler::TrainedArtifacts art;

  if (oracle_kind == "file") {
    if (manifest.truth.empty()) throw aler::ValidationError("truth: required for --oracle=file");
    const auto truth = aler::load_match_set(manifest.resolve(manifest.truth), &inputs.records_r,
                                            &inputs.records_s, manifest.delimiter);
    aler::GroundTruthOracle oracle(truth, budget);
    art = aler::run_train(manifest, inputs, oracle, [](const aler::IterationRecord& r) {
      std::fprintf(stderr, "chunk %zu iteration %zu: F1 %.4f, queried %zu%s\n", r.chunk,
                   r.iteration, r.f1, r.queried, r.stopped ? " (early stop)" : "");
    });
  } else {
    aler::LabelQueue queue(budget);
    aler::RunStatusBoard board;
    aler::LabelServerOptions options;
    options.host = manifest.http_host;
    options.port = manifest.http_port;
    if (!manifest.http_token.empty()) options.token = manifest.http_token;
    if (!manifest.static_dir.empty()) options.static_dir = manifest.resolve(manifest.static_dir);
    aler::LabelServer server(queue, board, options);
    const int port = server.start();
    std::fprintf(stderr, "labeling service on http://%s:%d\n", manifest.http_host.c_str(), port);

    std::optional<std::chrono::milliseconds> timeout;
    if (manifest.label_timeout_s > 0) {
      timeout = std::chrono::milliseconds(1000 * manifest.label_timeout_s);
    }
    aler::HumanOracle oracle(queue, inputs.records_r, inputs.records_s, timeout);
    board.set_phase("labeling");
    try {
      art = aler::run_train(manifest, inputs, oracle, [&board](const aler::IterationRecord& r) {
        board.update(r.chunk, r.iteration, r.f1);
        std::fprintf(stderr, "chunk %zu iteration %zu: F1 %.4f, queried %zu\n", r.chunk,
                     r.iteration, r.f1, r.queried);
      });
    } catch (...) {
      board.set_phase("aborted");
      server.stop();
      throw;
    }
    board.set_phase("done");
    server.stop();
  }

  print_ledger(art.ledger);
  std::fprintf(stderr, "thresholds: recall %.4f (F1 %.4f), precision %.4f (F1 %.4f)\n",
               art.recall_threshold, art.recall_f1, art.precision_threshold, art.precision_f1);
  return art.ledger.truncated ? kExitBudget : kExitOk;
}

int synth(const std::filesystem::path& out, std::size_t records, std::uint64_t seed,
          std::size_t dim, double match_rate) {
  aler::PerturbationSpec spec;
  spec.seed = seed;
  aler::SyntheticOptions options;
  options.dim = dim;
  options.match_rate = match_rate;
  const auto corpus = aler::generate(records, spec, options);
  aler::write_corpus(corpus, out);

  aler::RunManifest manifest;
  manifest.records_r = "records_r.csv";
  manifest.records_s = "records_s.csv";
  manifest.embeddings_r = "emb_r.txt";
  manifest.embeddings_s = "emb_s.txt";
  manifest.truth = "truth.csv";
  manifest.key_attrs = {"title", "code"};
  manifest.output_dir = "artifacts";
  manifest.seed = seed;
  aler::write_key_values(manifest.to_key_values(), out / "manifest.txt",
                         {"aler synth", "records=" + std::to_string(records)});
  std::fprintf(stderr, "wrote %zu R records, %zu S records, %zu matches to %s\n",
               corpus.records_r.size(), corpus.records_s.size(), corpus.truth.size(),
               out.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partitioned active-learning entity resolution"};
  app.require_subcommand(1);

  struct Command {
    aler::Stage stage;
    CLI::App* app;
    StageArgs args;
  };
  std::vector<Command> commands;
  commands.reserve(6);
  const std::vector<std::pair<aler::Stage, const char*>> stages = {
      {aler::Stage::ingest, "Load records and embeddings into the artifact directory"},
      {aler::Stage::index, "Build the HNSW index over S"},
      {aler::Stage::partition, "Sample R and partition the sample into chunks"},
      {aler::Stage::train, "Run the active-learning loop and train both classifiers"},
      {aler::Stage::resolve, "Resolve every non-excluded R record"},
      {aler::Stage::eval, "Score matches against the truth file"},
  };
  std::string oracle_kind = "file";
  std::string strategy;
  for (const auto& [stage, help] : stages) {
    commands.push_back({stage, app.add_subcommand(aler::to_string(stage), help), {}});
    auto& cmd = commands.back();
    cmd.app->add_option("--manifest", cmd.args.manifest, "Run manifest (key = value)")->required();
    cmd.app->add_option("--override", cmd.args.overrides, "Replace a manifest value: key=value");
    if (stage == aler::Stage::train) {
      cmd.app->add_option("--oracle", oracle_kind, "Label source")
          ->check(CLI::IsMember({"file", "http"}));
      cmd.app->add_option("--strategy", strategy, "Selection policy")
          ->check(CLI::IsMember({"hybrid", "uncertainty", "random"}));
    }
  }

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus and a manifest for it");
  std::string synth_out;
  std::size_t synth_records = 5000;
  std::uint64_t synth_seed = 0;
  std::size_t synth_dim = 64;
  double synth_match_rate = 1.0;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--records", synth_records, "Base records in R")->check(CLI::Range(10, 10'000'000));
  synth_cmd->add_option("--seed", synth_seed, "Generator and run seed");
  synth_cmd->add_option("--dim", synth_dim, "Embedding dimension")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--match-rate", synth_match_rate, "Share of R records with a copy in S")
      ->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (synth_cmd->parsed()) return synth(synth_out, synth_records, synth_seed, synth_dim, synth_match_rate);
    for (const auto& cmd : commands) {
      if (!cmd.app->parsed()) continue;
      StageArgs args = cmd.args;
      if (cmd.stage == aler::Stage::train && !strategy.empty()) {
        args.overrides.push_back("strategy=" + strategy);
      }
      const auto manifest = load_manifest(args, cmd.stage);
      switch (cmd.stage) {
        case aler::Stage::ingest:
          aler::run_ingest(manifest);
          break;
        case aler::Stage::index:
          aler::run_index(manifest);
          break;
        case aler::Stage::partition:
          aler::run_partition(manifest);
          break;
        case aler::Stage::train:
          return train(manifest, oracle_kind);
        case aler::Stage::resolve: {
          const auto res = aler::run_resolve(manifest);
          std::fprintf(stderr, "candidates %zu, stage-1 survivors %zu, matches %zu\n",
                       res.candidates, res.stage1_survivors, res.matches.size());
          break;
        }
        case aler::Stage::eval: {
          const auto m = aler::run_eval(manifest);
          std::printf("precision %.4f\nrecall %.4f\nf1 %.4f\nblocking_recall %.4f\n", m.precision,
                      m.recall, m.f1, m.blocking_recall);
          break;
        }
      }
      return kExitOk;
    }
  } catch (const aler::RunAborted& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    print_ledger(e.ledger());
    return kExitBudget;
  } catch (const aler::BudgetExhausted& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBudget;
  } catch (const aler::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const aler::SingleClassError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
