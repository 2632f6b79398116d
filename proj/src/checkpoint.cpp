// SPDX-License-Identifier: Apache-2.0
#include "listenhead/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace listenhead {

namespace {

using json = nlohmann::json;
using Kind = CheckpointError::Kind;

template <class T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(const std::string& bytes, std::size_t pos) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  return value;
}

json config_json(const ModelConfig& c, const FrontendConfig& f) {
  return json{
      {"in_dim", c.in_dim},
      {"residual_channels", c.residual_channels},
      {"skip_channels", c.skip_channels},
      {"kernel_size", c.kernel_size},
      {"dilations", c.dilations},
      {"lstm_hidden", c.lstm_hidden},
      {"angle_dim", c.coeff_dims.angle},
      {"translation_dim", c.coeff_dims.translation},
      {"expression_dim", c.coeff_dims.expression},
      {"seed", c.seed},
      {"autoregressive", c.autoregressive},
      {"frontend", {{"window_len", f.window_len}, {"n_mels", f.n_mels}}},
  };
}

std::pair<ModelConfig, FrontendConfig> config_from_json(const json& j) {
  ModelConfig c;
  c.in_dim = j.at("in_dim").get<std::size_t>();
  c.residual_channels = j.at("residual_channels").get<std::size_t>();
  c.skip_channels = j.at("skip_channels").get<std::size_t>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.dilations = j.at("dilations").get<std::vector<std::size_t>>();
  c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  c.coeff_dims.angle = j.at("angle_dim").get<std::size_t>();
  c.coeff_dims.translation = j.at("translation_dim").get<std::size_t>();
  c.coeff_dims.expression = j.at("expression_dim").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.autoregressive = j.at("autoregressive").get<bool>();
  FrontendConfig f;
  f.window_len = j.at("frontend").at("window_len").get<std::size_t>();
  f.n_mels = j.at("frontend").at("n_mels").get<std::size_t>();
  return {c, f};
}

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

std::vector<NamedTensor> collect_tensors(const Checkpoint& ckpt) {
  std::vector<NamedTensor> out;
  const auto names = parameter_names(ckpt.model.params);
  const auto values = flatten(ckpt.model.params);
  for (std::size_t i = 0; i < names.size(); ++i) out.push_back({"model." + names[i], values[i]});
  out.push_back({"normalizer.shift", Tensor::vector(ckpt.model.normalizer.shift)});
  out.push_back({"normalizer.scale", Tensor::vector(ckpt.model.normalizer.scale)});
  for (std::size_t i = 0; i < ckpt.optimizer.first_moment.size(); ++i)
    out.push_back({"adam.m." + names[i], ckpt.optimizer.first_moment[i]});
  for (std::size_t i = 0; i < ckpt.optimizer.second_moment.size(); ++i)
    out.push_back({"adam.v." + names[i], ckpt.optimizer.second_moment[i]});
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto tensors = collect_tensors(ckpt);
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    manifest.push_back({{"name", t.name}, {"shape", t.tensor.shape()}, {"offset", offset}});
    offset += t.tensor.size() * sizeof(double);
  }
  const OptimizerState& opt = ckpt.optimizer;
  const json header{
      {"config", config_json(ckpt.model.config, ckpt.frontend)},
      {"epoch", ckpt.epoch},
      {"optimizer",
       {{"algorithm", opt.algorithm},
        {"step", opt.step},
        {"lr", opt.hyper.lr},
        {"beta1", opt.hyper.beta1},
        {"beta2", opt.hyper.beta2},
        {"eps", opt.hyper.eps},
        {"has_moments", !opt.first_moment.empty()}}},
      {"rng", ckpt.rng.serialize()},
      {"tensors", manifest},
  };
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& t : tensors)
    for (double v : t.tensor.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw CheckpointError(Kind::kNotACheckpoint, "not a checkpoint (bad magic bytes)");
  if (bytes.size() < 8) throw CheckpointError(Kind::kTruncated, "truncated checkpoint: no version");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::kUnsupportedVersion,
                          "unsupported checkpoint version " + std::to_string(version));
  if (bytes.size() < 16)
    throw CheckpointError(Kind::kTruncated, "truncated checkpoint: no header length");
  const auto header_len = get_le<std::uint64_t>(bytes, 8);
  if (header_len > bytes.size() - 16)
    throw CheckpointError(Kind::kTruncated, "truncated checkpoint: header cut short");

  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::kMalformed, std::string("malformed checkpoint header: ") + e.what());
  }

  try {
    const auto [model_config, frontend] = config_from_json(header.at("config"));
    validate(model_config);
    validate(frontend);
    Checkpoint ckpt;
    ckpt.model = init_params(model_config);
    ckpt.frontend = frontend;
    ckpt.epoch = header.at("epoch").get<std::uint64_t>();
    ckpt.rng = Rng::deserialize(header.at("rng").get<std::string>());
    const json& opt = header.at("optimizer");
    ckpt.optimizer.algorithm = opt.at("algorithm").get<std::string>();
    ckpt.optimizer.step = opt.at("step").get<std::uint64_t>();
    ckpt.optimizer.hyper = {opt.at("lr").get<double>(), opt.at("beta1").get<double>(),
                            opt.at("beta2").get<double>(), opt.at("eps").get<double>()};
    const bool has_moments = opt.at("has_moments").get<bool>();

    // Expected manifest, derived from the config.
    Checkpoint shape_ref;
    shape_ref.model = ckpt.model;
    if (has_moments) shape_ref.optimizer = make_adam_state(flatten(ckpt.model.params), {});
    const auto expected = collect_tensors(shape_ref);

    const json& manifest = header.at("tensors");
    if (!manifest.is_array() || manifest.size() != expected.size())
      throw CheckpointError(Kind::kManifestMismatch,
                            "checkpoint manifest lists " + std::to_string(manifest.size()) +
                                " tensors, config implies " + std::to_string(expected.size()));
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const json& entry = manifest[i];
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      if (name != expected[i].name || shape != expected[i].tensor.shape() ||
          entry.at("offset").get<std::uint64_t>() != offset)
        throw CheckpointError(Kind::kManifestMismatch,
                              "checkpoint manifest entry " + std::to_string(i) + " (" + name +
                                  ") does not match the configured model");
      offset += shape_size(shape) * sizeof(double);
    }
    const std::uint64_t blob_begin = 16 + header_len;
    const std::uint64_t available = bytes.size() - blob_begin;
    if (available < offset)
      throw CheckpointError(Kind::kTruncated, "truncated checkpoint: tensor data cut short (" +
                                                  std::to_string(available) + " of " +
                                                  std::to_string(offset) + " bytes)");
    if (available > offset)
      throw CheckpointError(Kind::kManifestMismatch,
                            "checkpoint has " + std::to_string(available - offset) +
                                " bytes beyond the manifest");

    std::vector<Tensor> loaded;
    std::size_t pos = blob_begin;
    for (const auto& e : expected) {
      std::vector<double> values(e.tensor.size());
      for (double& v : values) {
        v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
        pos += sizeof(double);
      }
      loaded.emplace_back(e.tensor.shape(), std::move(values));
    }

    const std::size_t n_params = flatten(ckpt.model.params).size();
    std::vector<Tensor> params(loaded.begin(), loaded.begin() + static_cast<long>(n_params));
    assign(ckpt.model.params, std::move(params));
    ckpt.model.normalizer.shift = loaded[n_params].values();
    ckpt.model.normalizer.scale = loaded[n_params + 1].values();
    if (has_moments) {
      const auto m_begin = loaded.begin() + static_cast<long>(n_params + 2);
      ckpt.optimizer.first_moment.assign(m_begin, m_begin + static_cast<long>(n_params));
      ckpt.optimizer.second_moment.assign(m_begin + static_cast<long>(n_params), loaded.end());
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::kMalformed, std::string("malformed checkpoint header: ") + e.what());
  } catch (const ContractError& e) {
    throw CheckpointError(Kind::kMalformed, std::string("invalid checkpoint contents: ") + e.what());
  } catch (const NumericError& e) {
    throw CheckpointError(Kind::kMalformed, std::string("invalid checkpoint contents: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace listenhead
