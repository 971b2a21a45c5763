// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <filesystem>
#include <functional>
#include <ostream>
#include <utility>

#include "CLI11.hpp"
#include "commands.hpp"
#include "stgsnas/arch_io.hpp"
#include "stgsnas/errors.hpp"
#include "stgsnas/oracle.hpp"

namespace stgsnas::cli {
namespace fs = std::filesystem;

namespace {

void add_data_flags(CLI::App& app, Options& o) {
  app.add_option("--dataset", o.dataset, "Directory holding train.bmnf, val.bmnf and optionally test.bmnf");
  app.add_option("--synthetic", o.synthetic, "Planted task rule")
      ->check(CLI::IsMember({"xor", "xor-crossmodal", "unimodal-image", "unimodal-speech"}));
  app.add_option("--data-seed", o.data_seed, "Seed of the synthetic data (defaults to --seed)");
  app.add_option("--n-train", o.n_train)->check(CLI::PositiveNumber);
  app.add_option("--n-val", o.n_val)->check(CLI::PositiveNumber);
  app.add_option("--n-test", o.n_test)->check(CLI::PositiveNumber);
  app.add_option("--image-features", o.image_features)->check(CLI::PositiveNumber);
  app.add_option("--speech-features", o.speech_features)->check(CLI::PositiveNumber);
  app.add_option("--noise-sigma", o.noise_sigma)->check(CLI::NonNegativeNumber);
  app.add_option("--signal-margin", o.signal_margin)->check(CLI::NonNegativeNumber);
  app.add_option("--width", o.width, "Feature width C")->check(CLI::PositiveNumber);
}

void add_space_flags(CLI::App& app, Options& o) {
  app.add_option("--cells", o.cells, "Cells in the search space")->check(CLI::PositiveNumber);
  app.add_option("--steps", o.steps, "Fusion steps per cell")->check(CLI::PositiveNumber);
}

void add_search_flags(CLI::App& app, Options& o) {
  app.add_option("--lambda", o.lambda, "Gumbel-Softmax temperature")->check(CLI::PositiveNumber);
  app.add_option("--samples", o.samples, "Relaxed samples averaged per step (M)")->check(CLI::PositiveNumber);
  app.add_option("--relaxation", o.relaxation)->check(CLI::IsMember({"stgs", "plain-softmax"}));
  app.add_option("--epochs", o.epochs, "Maximum search epochs")->check(CLI::PositiveNumber);
  app.add_option("--batch-size", o.batch_size)->check(CLI::PositiveNumber);
  app.add_option("--arch-lr", o.arch_lr)->check(CLI::PositiveNumber);
  app.add_option("--arch-weight-decay", o.arch_weight_decay)->check(CLI::NonNegativeNumber);
  app.add_option("--window", o.window, "Entropy convergence window (epochs)")->check(CLI::PositiveNumber);
  app.add_option("--tol", o.tol, "Entropy convergence tolerance")->check(CLI::PositiveNumber);
}

void add_weight_flags(CLI::App& app, Options& o) {
  app.add_option("--lr-max", o.lr_max)->check(CLI::PositiveNumber);
  app.add_option("--lr-min", o.lr_min)->check(CLI::NonNegativeNumber);
  app.add_option("--weight-decay", o.weight_decay)->check(CLI::NonNegativeNumber);
}

void add_retrain_flags(CLI::App& app, Options& o) {
  app.add_option("--retrain-epochs", o.retrain_epochs)->check(CLI::PositiveNumber);
  app.add_option("--retrain-batch", o.retrain_batch)->check(CLI::PositiveNumber);
  app.add_option("--patience", o.patience, "Early-stopping patience (0 disables)");
}

void add_common_flags(CLI::App& app, Options& o) {
  app.add_option("--seed", o.seed);
  app.add_option("--out-dir", o.out_dir, "Output directory");
  app.add_flag("--verbose", o.verbose, "Progress on stderr");
}

/// Every option of `sub` as flag/value pairs, defaults materialized.
std::vector<std::string> canonical_args(const CLI::App& sub) {
  std::vector<std::string> args{sub.get_name()};
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name();
    if (name == "--help") continue;
    if (opt->get_expected_max() == 0) {
      if (opt->count() > 0) args.push_back(name);
      continue;
    }
    const std::string value = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
    if (value.empty()) continue;
    args.push_back(name);
    args.push_back(value);
  }
  return args;
}

json config_json(const std::vector<std::string>& args) {
  json cfg = json::object();
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string key = args[i].substr(2);
    if (i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0) {
      cfg[key] = args[++i];
    } else {
      cfg[key] = true;
    }
  }
  return cfg;
}

int run_replay(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.manifest.empty()) throw UsageError("replay requires --manifest");
  if (!fs::exists(o.manifest)) throw UsageError("manifest not found: " + o.manifest);
  json recorded;
  try {
    recorded = json::parse(read_text_file(o.manifest));
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, "manifest " + o.manifest + ": " + e.what());
  }
  if (!recorded.contains("argv") || !recorded.contains("outputs")) throw DataError("not a run manifest: " + o.manifest);
  const fs::path original_dir = fs::path(o.manifest).parent_path();
  const fs::path replay_dir = o.out_dir;
  if (fs::weakly_canonical(replay_dir) == fs::weakly_canonical(original_dir))
    throw UsageError("replay --out-dir must differ from the recorded run directory");

  std::vector<std::string> argv;
  const auto recorded_argv = recorded["argv"].get<std::vector<std::string>>();
  for (std::size_t i = 0; i < recorded_argv.size(); ++i) {
    if (recorded_argv[i] == "--out-dir") {
      ++i;
      continue;
    }
    argv.push_back(recorded_argv[i]);
  }
  argv.push_back("--out-dir");
  argv.push_back(replay_dir.string());
  const int code = run(argv, out, err);
  if (code != kExitOk) return code;

  std::size_t mismatches = 0;
  for (const auto& rec : recorded["outputs"]) {
    const std::string rel = rec["path"].get<std::string>();
    const fs::path p = replay_dir / rel;
    if (!fs::exists(p) || record_file(p, rel).crc32 != rec["crc32"].get<std::uint32_t>()) {
      err << "replay mismatch: " << rel << "\n";
      ++mismatches;
    }
  }
  out << "replay: " << recorded["outputs"].size() - mismatches << "/" << recorded["outputs"].size()
      << " outputs identical\n";
  return mismatches == 0 ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Differentiable multimodal fusion architecture search with straight-through Gumbel-Softmax",
               "stgsnas"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  using Command = std::function<void(CommandContext&)>;
  std::vector<std::pair<CLI::App*, Command>> commands;

  auto* gen = app.add_subcommand("generate", "Write a planted synthetic dataset as BMNF files");
  add_data_flags(*gen, o);
  add_common_flags(*gen, o);
  commands.emplace_back(gen, cmd_generate);

  auto* srch = app.add_subcommand("search", "Run the architecture search");
  add_data_flags(*srch, o);
  add_space_flags(*srch, o);
  add_search_flags(*srch, o);
  add_weight_flags(*srch, o);
  add_common_flags(*srch, o);
  commands.emplace_back(srch, cmd_search);

  auto* abl = app.add_subcommand("ablate", "Search and retrain over a (lambda, samples) grid");
  add_data_flags(*abl, o);
  add_space_flags(*abl, o);
  add_search_flags(*abl, o);
  add_weight_flags(*abl, o);
  add_retrain_flags(*abl, o);
  abl->add_option("--lambda-grid", o.lambda_grid, "Comma-separated temperatures");
  abl->add_option("--samples-grid", o.samples_grid, "Comma-separated sample counts");
  abl->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  add_common_flags(*abl, o);
  commands.emplace_back(abl, cmd_ablate);

  auto* ev = app.add_subcommand("eval", "Retrain a derived architecture and report ACC/AUC");
  ev->add_option("--arch", o.arch, "Architecture JSON");
  add_data_flags(*ev, o);
  add_weight_flags(*ev, o);
  add_retrain_flags(*ev, o);
  add_common_flags(*ev, o);
  commands.emplace_back(ev, cmd_eval);

  auto* der = app.add_subcommand("derive", "Extract the discrete architecture from a checkpoint");
  der->add_option("--checkpoint", o.checkpoint, "Checkpoint directory");
  add_common_flags(*der, o);
  commands.emplace_back(der, cmd_derive);

  auto* orc = app.add_subcommand("oracle", "Retrain every architecture of a small space and rank them");
  orc->add_option("--arch", o.arch, "Architecture JSON to rank");
  add_data_flags(*orc, o);
  add_space_flags(*orc, o);
  add_weight_flags(*orc, o);
  add_retrain_flags(*orc, o);
  orc->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  add_common_flags(*orc, o);
  commands.emplace_back(orc, cmd_oracle);

  auto* rep = app.add_subcommand("replay", "Re-run a recorded manifest and compare outputs");
  rep->add_option("--manifest", o.manifest, "manifest.json of the recorded run");
  rep->add_option("--out-dir", o.out_dir, "Directory for the replayed outputs");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  auto given = [chosen](const char* name) {
    const CLI::Option* opt = chosen->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  o.width_set = given("--width");
  o.data_seed_set = given("--data-seed");
  o.lambda_set = given("--lambda");
  o.samples_set = given("--samples");

  try {
    if (chosen == rep) return run_replay(o, out, err);
    Command command;
    for (const auto& [sub, fn] : commands)
      if (sub == chosen) command = fn;

    std::vector<std::string> argv = canonical_args(*chosen);
    for (std::size_t i = 0; i + 1 < argv.size(); ++i)
      if (argv[i] == "--data-seed" && !o.data_seed_set) argv[i + 1] = std::to_string(o.seed);
    json config = config_json(argv);
    RunManifest manifest(o.out_dir, chosen->get_name(), argv, std::move(config), o.seed);
    manifest.begin();
    CommandContext ctx{o, manifest, out, err};
    try {
      command(ctx);
    } catch (const std::exception& e) {
      manifest.finish(false, e.what());
      throw;
    }
    manifest.finish(true);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << chosen->help();
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ContractError& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace stgsnas::cli
