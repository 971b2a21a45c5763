// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <sstream>

#include "stgsnas/arch_io.hpp"
#include "stgsnas/checkpoint.hpp"
#include "stgsnas/csv.hpp"
#include "stgsnas/derived_net.hpp"
#include "stgsnas/errors.hpp"
#include "stgsnas/oracle.hpp"
#include "stgsnas/search_space.hpp"

namespace stgsnas::cli {
namespace fs = std::filesystem;

namespace {

BimodalDataset load_split(const fs::path& dir, const char* name, Split split) {
  BimodalDataset d = load_features(dir / name);
  d.split = split;
  return d;
}

void write_arch(RunManifest& m, const std::string& stem, const DerivedArch& arch) {
  m.write_output(stem + ".json", arch_to_json(arch));
  m.write_output(stem + ".dot", arch_to_dot(arch));
}

json eval_to_json(const EvalResult& r) {
  return {{"accuracy", r.accuracy}, {"auc", r.auc}, {"loss", r.loss}};
}

void require_data_matches(const DerivedArch& arch, const LoadedData& data) {
  const SpaceConfig& c = arch.config;
  if (c.num_image_features != data.train.num_image_features() ||
      c.num_speech_features != data.train.num_speech_features() || c.feature_width != data.train.width()) {
    throw DataError("architecture expects " + std::to_string(c.num_image_features) + " image / " +
                    std::to_string(c.num_speech_features) + " speech features of width " +
                    std::to_string(c.feature_width) + ", dataset differs");
  }
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (item.empty() || end != item.c_str() + item.size()) throw UsageError(flag + ": bad number '" + item + "'");
    values.push_back(v);
  }
  if (values.empty()) throw UsageError(flag + " is empty");
  return values;
}

LoadedData load_data(const Options& o) {
  if (!o.dataset.empty() && !o.synthetic.empty()) throw UsageError("--dataset and --synthetic are exclusive");
  if (o.dataset.empty() && o.synthetic.empty()) throw UsageError("one of --dataset or --synthetic is required");
  LoadedData data;
  if (!o.dataset.empty()) {
    const fs::path dir(o.dataset);
    if (!fs::is_directory(dir)) throw UsageError("dataset directory not found: " + o.dataset);
    for (const char* name : {"train.bmnf", "val.bmnf"}) {
      if (!fs::exists(dir / name)) throw UsageError("dataset is missing " + (dir / name).string());
    }
    data.train = load_split(dir, "train.bmnf", Split::Train);
    data.val = load_split(dir, "val.bmnf", Split::Val);
    data.input_files = {(dir / "train.bmnf").string(), (dir / "val.bmnf").string()};
    if (fs::exists(dir / "test.bmnf")) {
      data.test = load_split(dir, "test.bmnf", Split::Test);
      data.input_files.push_back((dir / "test.bmnf").string());
    }
    if (o.width_set && o.width != data.train.width())
      throw UsageError("--width " + std::to_string(o.width) + " does not match dataset width " +
                       std::to_string(data.train.width()));
    if (data.val.num_image_features() != data.train.num_image_features() ||
        data.val.num_speech_features() != data.train.num_speech_features() || data.val.width() != data.train.width())
      throw FeatureShapeError("train and val feature shapes differ");
    return data;
  }
  PlantedTaskSpec spec;
  spec.rule = planted_rule_from_string(o.synthetic);
  spec.num_image_features = o.image_features;
  spec.num_speech_features = o.speech_features;
  spec.width = o.width;
  spec.noise_sigma = o.noise_sigma;
  spec.signal_margin = o.signal_margin;
  spec.n_train = o.n_train;
  spec.n_val = o.n_val;
  spec.n_test = o.n_test;
  SyntheticSplits s = generate(spec, o.data_seed_set ? o.data_seed : o.seed);
  data.train = std::move(s.train);
  data.val = std::move(s.val);
  data.test = std::move(s.test);
  return data;
}

SpaceConfig space_for(const Options& o, const LoadedData& data) {
  SpaceConfig c;
  c.num_image_features = data.train.num_image_features();
  c.num_speech_features = data.train.num_speech_features();
  c.num_cells = o.cells;
  c.steps_per_cell = o.steps;
  c.feature_width = data.train.width();
  c.validate();
  return c;
}

TrainConfig train_config(const Options& o) {
  TrainConfig cfg;
  cfg.arch_lr = o.arch_lr;
  cfg.arch_weight_decay = o.arch_weight_decay;
  cfg.weight_lr_max = o.lr_max;
  cfg.weight_lr_min = o.lr_min;
  cfg.weight_decay = o.weight_decay;
  cfg.batch_size = o.batch_size;
  cfg.max_epochs = o.epochs;
  cfg.convergence_window = o.window;
  cfg.convergence_tol = o.tol;
  cfg.relaxation.temperature = o.lambda;
  cfg.relaxation.samples = o.samples;
  cfg.relaxation.mode = relaxation_mode_from_string(o.relaxation);
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

RetrainConfig retrain_config(const Options& o) {
  RetrainConfig rc;
  rc.epochs = o.retrain_epochs;
  rc.batch_size = o.retrain_batch;
  rc.lr_max = o.lr_max;
  rc.lr_min = o.lr_min;
  rc.weight_decay = o.weight_decay;
  rc.patience = o.patience;
  rc.seed = o.seed;
  rc.validate();
  return rc;
}

void cmd_generate(CommandContext& ctx) {
  const Options& o = ctx.options;
  if (o.synthetic.empty()) throw UsageError("generate requires --synthetic");
  LoadedData data = load_data(o);
  const fs::path dir = ctx.manifest.out_dir();
  save_features(data.train, dir / "train.bmnf");
  save_features(data.val, dir / "val.bmnf");
  save_features(*data.test, dir / "test.bmnf");
  for (const char* name : {"train.bmnf", "val.bmnf", "test.bmnf"}) ctx.manifest.add_output(name);
  const BimodalDataset* splits[] = {&data.train, &data.val, &*data.test};
  ctx.manifest.write_output("labels.csv", label_manifest_csv(splits));
  ctx.manifest.set_result({{"n_train", data.train.size()}, {"n_val", data.val.size()}, {"n_test", data.test->size()},
                           {"provenance", data.train.provenance}});
  ctx.out << "wrote " << data.train.size() + data.val.size() + data.test->size() << " samples to " << dir.string()
          << "\n";
}

void cmd_search(CommandContext& ctx) {
  const Options& o = ctx.options;
  LoadedData data = load_data(o);
  for (const auto& f : data.input_files) ctx.manifest.add_input(f);
  const SpaceConfig space = space_for(o, data);
  const TrainConfig cfg = train_config(o);
  if (cfg.relaxation.mode != RelaxationMode::Stgs && cfg.relaxation.mode != RelaxationMode::PlainSoftmax)
    throw UsageError("--relaxation must be stgs or plain-softmax");

  SuperNet net(space, o.seed);
  auto progress = [&](const EntropyRow& row) {
    if (o.verbose)
      ctx.err << "epoch " << row.epoch << " E_alpha=" << row.e_alpha << " E_gamma=" << row.e_gamma
              << " val_acc=" << row.val_acc << "\n";
  };
  const SearchResult r = cfg.relaxation.mode == RelaxationMode::PlainSoftmax
                             ? baseline_softmax_search(net, data.train, data.val, cfg, progress)
                             : search(net, data.train, data.val, cfg, progress);

  write_arch(ctx.manifest, "arch", r.best);
  write_arch(ctx.manifest, "final_arch", r.final_arch);
  ctx.manifest.write_output("entropy.csv", r.trace.to_csv());
  const fs::path ckpt = ctx.manifest.out_dir() / "checkpoint";
  save_checkpoint(net, o.seed, ckpt);
  ctx.manifest.add_output("checkpoint/checkpoint.json");
  ctx.manifest.add_output("checkpoint/params.bin");

  const EntropyRow& last = r.trace.rows.back();
  ctx.manifest.set_result({{"best_arch", r.best.fingerprint()},
                           {"best_val_acc", r.best_val_acc},
                           {"best_parameter_count", count_parameters(r.best)},
                           {"final_arch", r.final_arch.fingerprint()},
                           {"epochs_run", r.trace.rows.size()},
                           {"converged", r.converged},
                           {"final_E_alpha", last.e_alpha},
                           {"final_E_gamma", last.e_gamma}});
  ctx.out << "best " << r.best.fingerprint() << " val_acc=" << format_double(r.best_val_acc)
          << " params=" << count_parameters(r.best) << " epochs=" << r.trace.rows.size()
          << (r.converged ? " converged" : "") << "\n";
}

void cmd_ablate(CommandContext& ctx) {
  const Options& o = ctx.options;
  LoadedData data = load_data(o);
  for (const auto& f : data.input_files) ctx.manifest.add_input(f);
  const SpaceConfig space = space_for(o, data);
  const std::vector<double> lambdas =
      o.lambda_set ? std::vector<double>{o.lambda} : parse_number_list(o.lambda_grid, "--lambda-grid");
  std::vector<int> samples;
  if (o.samples_set) {
    samples = {o.samples};
  } else {
    for (double v : parse_number_list(o.samples_grid, "--samples-grid")) {
      if (v < 1 || v != static_cast<int>(v)) throw UsageError("--samples-grid needs positive integers");
      samples.push_back(static_cast<int>(v));
    }
  }
  const RetrainConfig rc = retrain_config(o);
  const BimodalDataset& scored = data.test ? *data.test : data.val;

  struct Cell {
    double lambda = 0;
    int samples = 0;
    EvalResult eval;
    std::size_t params = 0;
    std::string arch;
    std::string status;
  };
  std::vector<Cell> cells;
  for (double l : lambdas)
    for (int m : samples) cells.push_back({l, m, {}, 0, {}, {}});

  std::mutex log_mu;
  parallel_for(cells.size(), o.jobs, [&](std::size_t i) {
    Cell& c = cells[i];
    try {
      Options local = o;
      local.lambda = c.lambda;
      local.samples = c.samples;
      const TrainConfig cfg = train_config(local);
      SuperNet net(space, o.seed);
      const SearchResult r = search(net, data.train, data.val, cfg);
      DerivedNet trained(r.best, o.seed);
      retrain(r.best, data.train, data.val, rc, &trained);
      c.eval = evaluate(trained, scored);
      c.params = count_parameters(r.best);
      c.arch = r.best.fingerprint();
      c.status = "ok";
    } catch (const NumericalError&) {
      c.status = "numerical_error";
    } catch (const DataError&) {
      c.status = "data_error";
    } catch (const std::exception&) {
      c.status = "error";
    }
    if (o.verbose) {
      std::lock_guard lock(log_mu);
      ctx.err << "lambda=" << c.lambda << " samples=" << c.samples << " " << c.status << "\n";
    }
  });

  CsvWriter w({"lambda", "samples", "auc", "accuracy", "params", "status", "arch"});
  std::size_t failed = 0;
  for (const Cell& c : cells) {
    const bool ok = c.status == "ok";
    failed += !ok;
    w.add_row({format_double(c.lambda), std::to_string(c.samples), ok ? format_double(c.eval.auc) : "",
               ok ? format_double(c.eval.accuracy) : "", ok ? std::to_string(c.params) : "", c.status, c.arch});
  }
  ctx.manifest.write_output("ablation.csv", w.str());
  ctx.manifest.set_result({{"rows", cells.size()}, {"failed", failed}, {"scored_split", to_string(scored.split)}});
  ctx.out << "ablation: " << cells.size() << " rows, " << failed << " failed\n";
}

void cmd_eval(CommandContext& ctx) {
  const Options& o = ctx.options;
  if (o.arch.empty()) throw UsageError("eval requires --arch");
  if (!fs::exists(o.arch)) throw UsageError("architecture file not found: " + o.arch);
  const DerivedArch arch = load_arch(o.arch);
  ctx.manifest.add_input(o.arch);
  LoadedData data = load_data(o);
  for (const auto& f : data.input_files) ctx.manifest.add_input(f);
  require_data_matches(arch, data);

  DerivedNet net(arch, o.seed);
  const RetrainResult rr = retrain(arch, data.train, data.val, retrain_config(o), &net);
  json result = {{"arch", arch.fingerprint()},
                 {"parameter_count", rr.parameter_count},
                 {"best_epoch", rr.best_epoch},
                 {"epochs_run", rr.epochs_run},
                 {"best_val_accuracy", rr.val_accuracy},
                 {"best_val_auc", rr.val_auc},
                 {"val", eval_to_json(evaluate(net, data.val))}};
  if (data.test) result["test"] = eval_to_json(evaluate(net, *data.test));
  ctx.manifest.write_output("eval.json", result.dump(2) + "\n");
  ctx.manifest.set_result(result);
  const json& shown = data.test ? result["test"] : result["val"];
  ctx.out << (data.test ? "test" : "val") << " accuracy=" << format_double(shown["accuracy"].get<double>())
          << " auc=" << format_double(shown["auc"].get<double>()) << " params=" << rr.parameter_count << "\n";
}

void cmd_derive(CommandContext& ctx) {
  const Options& o = ctx.options;
  if (o.checkpoint.empty()) throw UsageError("derive requires --checkpoint");
  if (!fs::is_directory(o.checkpoint)) throw UsageError("checkpoint directory not found: " + o.checkpoint);
  ctx.manifest.add_input(o.checkpoint);
  const SuperNet net = load_checkpoint(o.checkpoint);
  const DerivedArch arch = net.derive();
  write_arch(ctx.manifest, "arch", arch);
  ctx.manifest.set_result({{"arch", arch.fingerprint()}, {"parameter_count", count_parameters(arch)}});
  ctx.out << arch.fingerprint() << " params=" << count_parameters(arch) << "\n";
}

void cmd_oracle(CommandContext& ctx) {
  const Options& o = ctx.options;
  LoadedData data = load_data(o);
  for (const auto& f : data.input_files) ctx.manifest.add_input(f);
  const SpaceConfig space = space_for(o, data);
  std::optional<DerivedArch> ranked;
  if (!o.arch.empty()) {
    if (!fs::exists(o.arch)) throw UsageError("architecture file not found: " + o.arch);
    ranked = load_arch(o.arch);
    ctx.manifest.add_input(o.arch);
  }
  const std::uint64_t size = space_size(space);
  if (size > kMaxEnumeratedArchs) throw SpaceTooLargeError(size);

  OracleProgress progress;
  std::mutex mu;
  if (o.verbose) {
    progress = [&](std::size_t done, std::size_t total) {
      std::lock_guard lock(mu);
      if (done % 50 == 0 || done == total) ctx.err << "oracle " << done << "/" << total << "\n";
    };
  }
  const EnumerationReport report = run_oracle(space, data.train, data.val, retrain_config(o), o.jobs, {}, progress);
  ctx.manifest.write_output("oracle.csv", report.to_csv());
  json result = {{"space_size", size}, {"rows", report.entries.size()}};
  if (ranked) {
    const std::size_t rank = rank_search_result(*ranked, report);
    const std::size_t worst = rank_search_result(*ranked, report, TiePolicy::Pessimistic);
    result["arch"] = ranked->fingerprint();
    result["rank"] = rank;
    result["worst_rank"] = worst;
    ctx.out << ranked->fingerprint() << " rank " << rank << " (worst " << worst << ") of " << report.entries.size()
            << "\n";
  }
  ctx.manifest.set_result(result);
  ctx.out << "oracle: " << report.entries.size() << " architectures\n";
}

}  // namespace stgsnas::cli
