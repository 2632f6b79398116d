// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "listenhead/acoustic.hpp"
#include "listenhead/metrics.hpp"
#include "listenhead/model.hpp"
#include "listenhead/train.hpp"

namespace listenhead {

/// Everything a CLI run can be configured with. Loaded from a JSON object
/// with flat dotted keys; the key list lives in docs/config.md.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  FrontendConfig frontend;
  CpbdConfig cpbd;
  ModelGradCheck gradcheck;  // its model/loss fields are ignored; see effective_gradcheck
};

/// Every accepted key, in documentation order.
std::vector<std::string> config_keys();

/// Builds a RunConfig. Precedence, lowest first: built-in defaults, the
/// LISTENHEAD_SEED environment variable (both seeds), the JSON file,
/// `overrides` ("key=value", value parsed as JSON and otherwise taken as a
/// string). Unknown keys, wrong types and out-of-range values throw
/// ConfigError naming the key.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides = {});

/// Checks every section against its module's preconditions.
void validate(const RunConfig& config);

/// gradcheck section combined with the model and loss sections.
ModelGradCheck effective_gradcheck(const RunConfig& config);

}  // namespace listenhead
