// SPDX-License-Identifier: Apache-2.0
#include "listenhead/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>

#include "json.hpp"
#include "listenhead/error.hpp"

namespace listenhead {

namespace {

using nlohmann::json;
using Setter = std::function<void(RunConfig&, const json&)>;

struct Key {
  const char* name;
  Setter set;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& expected) {
  throw ConfigError("config key '" + key + "': expected " + expected);
}

std::size_t as_count(const std::string& key, const json& v) {
  if (!v.is_number_integer() || v.get<long long>() < 0) bad_value(key, "a non-negative integer");
  return v.get<std::size_t>();
}

std::uint64_t as_seed(const std::string& key, const json& v) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    bad_value(key, "a non-negative integer seed");
  return v.get<std::uint64_t>();
}

double as_real(const std::string& key, const json& v) {
  if (!v.is_number()) bad_value(key, "a number");
  return v.get<double>();
}

bool as_bool(const std::string& key, const json& v) {
  if (!v.is_boolean()) bad_value(key, "true or false");
  return v.get<bool>();
}

#define COUNT(key, field) \
  {key, [](RunConfig& c, const json& v) { c.field = as_count(key, v); }}
#define REAL(key, field) \
  {key, [](RunConfig& c, const json& v) { c.field = as_real(key, v); }}
#define FLAG(key, field) \
  {key, [](RunConfig& c, const json& v) { c.field = as_bool(key, v); }}
#define SEED(key, field) \
  {key, [](RunConfig& c, const json& v) { c.field = as_seed(key, v); }}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      COUNT("model.residual_channels", model.residual_channels),
      COUNT("model.skip_channels", model.skip_channels),
      COUNT("model.kernel_size", model.kernel_size),
      {"model.dilations",
       [](RunConfig& c, const json& v) {
         if (!v.is_array()) bad_value("model.dilations", "an array of positive integers");
         std::vector<std::size_t> d;
         for (const auto& e : v) d.push_back(as_count("model.dilations", e));
         c.model.dilations = std::move(d);
       }},
      COUNT("model.lstm_hidden", model.lstm_hidden),
      COUNT("model.angle_dims", model.coeff_dims.angle),
      COUNT("model.translation_dims", model.coeff_dims.translation),
      COUNT("model.expression_dims", model.coeff_dims.expression),
      FLAG("model.autoregressive", model.autoregressive),
      SEED("model.seed", model.seed),
      COUNT("train.epochs", train.epochs),
      REAL("train.lr", train.adam.lr),
      REAL("train.beta1", train.adam.beta1),
      REAL("train.beta2", train.adam.beta2),
      REAL("train.eps", train.adam.eps),
      REAL("train.clip_norm", train.clip_norm),
      FLAG("train.motion_on_angle", train.loss.motion_on_angle),
      SEED("train.seed", train.seed),
      COUNT("frontend.window_len", frontend.window_len),
      COUNT("frontend.n_mels", frontend.n_mels),
      REAL("gradcheck.epsilon", gradcheck.epsilon),
      REAL("gradcheck.tolerance", gradcheck.tolerance),
      COUNT("gradcheck.frames", gradcheck.frames),
      REAL("cpbd.beta", cpbd.beta),
      REAL("cpbd.jnb_width_low_contrast", cpbd.jnb_width_low_contrast),
      REAL("cpbd.jnb_width_high_contrast", cpbd.jnb_width_high_contrast),
      REAL("cpbd.contrast_split", cpbd.contrast_split),
      REAL("cpbd.detection_threshold", cpbd.detection_threshold),
      REAL("cpbd.edge_threshold_factor", cpbd.edge_threshold_factor),
  };
  return table;
}

#undef COUNT
#undef REAL
#undef FLAG
#undef SEED

void apply(RunConfig& config, const std::string& key, const json& value) {
  for (const Key& k : keys())
    if (key == k.name) {
      k.set(config, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("LISTENHEAD_SEED");
  if (!raw || !*raw) return std::nullopt;
  const std::string text(raw);
  std::uint64_t seed = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("LISTENHEAD_SEED must be a non-negative integer, got '" + text + "'");
  return seed;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> names;
  for (const Key& k : keys()) names.emplace_back(k.name);
  return names;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides) {
  RunConfig config;
  if (const auto seed = env_seed()) config.model.seed = config.train.seed = *seed;

  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file: " + path->string());
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + path->string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config file " + path->string() + " must hold a JSON object");
    for (const auto& [key, value] : doc.items()) apply(config, key, value);
  }

  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override '" + item + "' is not of the form key=value");
    const std::string key = item.substr(0, eq), text = item.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    apply(config, key, value);
  }
  validate(config);
  return config;
}

void validate(const RunConfig& config) {
  try {
    validate(config.model);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("model section: ") + e.what());
  }
  try {
    validate(config.train);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("train section: ") + e.what());
  }
  try {
    validate(config.frontend);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("frontend section: ") + e.what());
  }
  try {
    validate(config.cpbd);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("cpbd section: ") + e.what());
  }
  const ModelGradCheck& g = config.gradcheck;
  if (!(g.epsilon > 0.0 && g.epsilon <= 1e-2))
    throw ConfigError("config key 'gradcheck.epsilon': must lie in (0, 1e-2]");
  if (!(g.tolerance > 0.0)) throw ConfigError("config key 'gradcheck.tolerance': must be > 0");
  if (g.frames == 0) throw ConfigError("config key 'gradcheck.frames': must be >= 1");
}

ModelGradCheck effective_gradcheck(const RunConfig& config) {
  ModelGradCheck g = config.gradcheck;
  g.model = config.model;
  g.loss = config.train.loss;
  return g;
}

}  // namespace listenhead
