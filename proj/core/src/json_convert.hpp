// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared JSON conversions for core sources. Not installed.

#include <json.hpp>

#include "stgsnas/space_config.hpp"

namespace stgsnas::detail {

using ojson = nlohmann::ordered_json;

ojson config_to_json(const SpaceConfig& config);
SpaceConfig config_from_json(const ojson& j);

/// Parses text, rethrowing nlohmann errors as ParseError.
ojson parse_json(std::string_view text);

}  // namespace stgsnas::detail
