// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>

#include "stgsnas/search_space.hpp"

namespace stgsnas {

/// Writes <dir>/checkpoint.json (space config, init seed, tensor table with
/// ids, groups, shapes and element offsets, CRC32 of the blob) and
/// <dir>/params.bin (every tensor as little-endian f64, table order).
void save_checkpoint(const SuperNet& net, std::uint64_t seed, const std::filesystem::path& dir);

/// Rebuilds the supernet and overwrites every tensor from the blob. Throws
/// DataError on missing or mismatched tensors, ChecksumError on a bad blob.
SuperNet load_checkpoint(const std::filesystem::path& dir);

}  // namespace stgsnas
