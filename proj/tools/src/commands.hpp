// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "manifest.hpp"
#include "stgsnas/dataset.hpp"
#include "stgsnas/space_config.hpp"
#include "stgsnas/trainer.hpp"

namespace stgsnas::cli {

/// Bad flags or missing inputs; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  // data
  std::string dataset;
  std::string synthetic;
  std::uint64_t data_seed = 0;
  bool data_seed_set = false;
  std::size_t n_train = 512;
  std::size_t n_val = 512;
  std::size_t n_test = 256;
  int image_features = 1;
  int speech_features = 1;
  double noise_sigma = 0.1;
  double signal_margin = 0.5;

  // space
  int cells = 1;
  int steps = 2;
  int width = 8;
  bool width_set = false;

  // search
  double lambda = 10.0;
  int samples = 15;
  std::uint64_t seed = 1;
  std::string relaxation = "stgs";
  std::size_t epochs = 300;
  std::size_t batch_size = 16;
  double arch_lr = 0.03;
  double arch_weight_decay = 5e-5;
  double lr_max = 0.003;
  double lr_min = 0.0006;
  double weight_decay = 0.003;
  std::size_t window = 20;
  double tol = 1e-3;

  // retrain
  std::size_t retrain_epochs = 30;
  std::size_t retrain_batch = 16;
  std::size_t patience = 5;

  // ablate
  std::string lambda_grid = "5,10,15,20";
  std::string samples_grid = "5,10,15,20";
  bool lambda_set = false;
  bool samples_set = false;

  // io
  std::string out_dir = "stgsnas-out";
  std::string arch;
  std::string checkpoint;
  std::string manifest;
  std::size_t jobs = 1;
  bool verbose = false;
};

struct LoadedData {
  BimodalDataset train;
  BimodalDataset val;
  std::optional<BimodalDataset> test;
  std::vector<std::string> input_files;
};

LoadedData load_data(const Options& o);
SpaceConfig space_for(const Options& o, const LoadedData& data);
TrainConfig train_config(const Options& o);
RetrainConfig retrain_config(const Options& o);

struct CommandContext {
  const Options& options;
  RunManifest& manifest;
  std::ostream& out;
  std::ostream& err;
};

void cmd_generate(CommandContext& ctx);
void cmd_search(CommandContext& ctx);
void cmd_ablate(CommandContext& ctx);
void cmd_eval(CommandContext& ctx);
void cmd_derive(CommandContext& ctx);
void cmd_oracle(CommandContext& ctx);

/// Splits "5,10,15" into values; UsageError on junk.
std::vector<double> parse_number_list(const std::string& text, const std::string& flag);

}  // namespace stgsnas::cli
