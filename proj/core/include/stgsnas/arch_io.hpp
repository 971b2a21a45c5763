// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "stgsnas/derived_arch.hpp"

namespace stgsnas {

/// JSON document for a derived architecture:
///
///   {
///     "format": "stgsnas-derived-arch", "version": 1,
///     "config": {num_image_features, num_speech_features, num_cells,
///                steps_per_cell, feature_width, op_pool: [names]},
///     "first_level": {"kept_edges": [[from, to], ...]},
///     "cells": [{"inputs": [u, v], "ops": [names]}, ...],
///     "modality_dropped": bool,
///     "parameter_count": n
///   }
///
/// Output is deterministic; parse(serialize(a)) == a and re-serializing
/// reproduces the same bytes.
std::string arch_to_json(const DerivedArch& arch);
DerivedArch arch_from_json(std::string_view text);

std::string space_config_to_json(const SpaceConfig& config);
SpaceConfig space_config_from_json(std::string_view text);

/// Graphviz rendering of the derived network.
std::string arch_to_dot(const DerivedArch& arch);

void save_arch(const DerivedArch& arch, const std::filesystem::path& json_path);
DerivedArch load_arch(const std::filesystem::path& json_path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace stgsnas
