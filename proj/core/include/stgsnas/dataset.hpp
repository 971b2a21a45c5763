// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stgsnas/tensor.hpp"

namespace stgsnas {

enum class Split { Train, Val, Test };
std::string_view to_string(Split split);

enum class PlantedRule { XorCrossModal, UnimodalImage, UnimodalSpeech };
std::string_view to_string(PlantedRule rule);
/// Accepts "xor-crossmodal" (alias "xor"), "unimodal-image", "unimodal-speech".
PlantedRule planted_rule_from_string(std::string_view name);

/// Recipe for a synthetic bimodal task.
///
/// Each sample draws a latent scalar per modality, u for image and v for
/// speech, with |latent| = signal_margin + |N(0, 1)|. The latent is written
/// into the signal dims of every feature node of its modality; every entry
/// also gets N(0, noise_sigma) noise.
///   xor-crossmodal : label = [sign(u) != sign(v)], sign(u) uniform
///   unimodal-image : label = [u > 0], v independent of the label
///   unimodal-speech: label = [v > 0], u independent of the label
/// Labels are exactly balanced within each split.
struct PlantedTaskSpec {
  PlantedRule rule = PlantedRule::XorCrossModal;
  int num_image_features = 2;
  int num_speech_features = 2;
  int width = 64;
  std::vector<int> image_signal_dims = {0};
  std::vector<int> speech_signal_dims = {0};
  double noise_sigma = 0.1;
  double signal_margin = 0.5;
  std::size_t n_train = 4096;
  std::size_t n_val = 1024;
  std::size_t n_test = 1024;

  /// Throws ContractError on dims outside [0, width), negative sigma or
  /// empty splits.
  void validate() const;
};

/// Labeled bimodal features of one split.
struct BimodalDataset {
  Tensor image;             // [n, N_I, C]
  Tensor speech;            // [n, N_S, C]
  std::vector<int> labels;  // each 0 or 1
  Split split = Split::Train;
  std::string provenance;   // "synthetic:<rule>:seed=<s>" or "file:<path>:crc32=<hex>"
  /// Global construction index of each sample (synthetic data only).
  std::vector<std::uint64_t> sample_ids;

  std::size_t size() const noexcept { return labels.size(); }
  int num_image_features() const { return static_cast<int>(image.dim(1)); }
  int num_speech_features() const { return static_cast<int>(speech.dim(1)); }
  int width() const { return static_cast<int>(image.dim(2)); }

  /// Throws DataError when field sizes disagree or a label is not 0/1.
  void validate() const;

  /// Copy of the given rows, in order.
  BimodalDataset subset(std::span<const std::size_t> rows) const;
  /// Feature tensors and labels of the given rows, in order.
  void gather(std::span<const std::size_t> rows, Tensor& image_out, Tensor& speech_out,
              std::vector<int>& labels_out) const;

  /// Content hash of one sample's features (for disjointness checks).
  std::uint64_t sample_hash(std::size_t row) const;
};

struct SyntheticSplits {
  BimodalDataset train;
  BimodalDataset val;
  BimodalDataset test;
};

/// Pure function of (spec, seed). Sample k of the concatenated
/// train/val/test sequence is drawn from its own counter stream, so splits
/// are disjoint by construction index.
SyntheticSplits generate(const PlantedTaskSpec& spec, std::uint64_t seed);

/// Bytes of the feature-file format, little-endian:
///   "BMNF" | u16 version=1 | u32 N | u32 N_I | u32 N_S | u32 C |
///   u8 labels[N] | f64 image[N*N_I*C] | f64 speech[N*N_S*C] | u32 crc32
/// The CRC covers every preceding byte.
std::vector<std::uint8_t> encode_features(const BimodalDataset& data);

/// Throws ParseError (bad magic, truncation, with the byte offset),
/// ChecksumError, or FeatureShapeError (intact file whose payload length
/// disagrees with its header).
BimodalDataset decode_features(std::span<const std::uint8_t> bytes, std::string_view source = "memory");

void save_features(const BimodalDataset& data, const std::filesystem::path& path);
BimodalDataset load_features(const std::filesystem::path& path);

/// CSV with columns index,split,label,feature_hash.
std::string label_manifest_csv(std::span<const BimodalDataset* const> splits);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace stgsnas
