// SPDX-License-Identifier: Apache-2.0
// Command-line front end: features, synth-data, train, infer, eval, grad-check.
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "listenhead/acoustic.hpp"
#include "listenhead/checkpoint.hpp"
#include "listenhead/config.hpp"
#include "listenhead/dataset.hpp"
#include "listenhead/error.hpp"
#include "listenhead/metrics.hpp"
#include "listenhead/train.hpp"
#include "listenhead/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace listenhead;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int fail(ExitCode code, const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

// Expression width of a headerless coefficient CSV, read from its first row.
CoeffDims sniff_dims(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open coefficient file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw DataError(path.string() + ": no rows");
  const std::size_t cols = 1 + static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (cols < 6) throw DataError(path.string() + ": fewer than 6 columns");
  CoeffDims dims;
  dims.expression = cols - 6;
  return dims;
}

struct Options {
  std::string audio, out, config, data, ckpt, ref_coeffs, pred, gt, frames_pred, frames_gt;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::size_t clips = 0;
  std::size_t ref_frame = 0;
  double duration = 0.0;
};

int cmd_features(const Options& o) {
  const RunConfig config = load_run_config(optional_path(o.config), o.overrides);
  write_feature_csv(o.out, extract_features(load_wav(o.audio), config.frontend));
  return kOk;
}

int cmd_synth_data(const Options& o) {
  const RunConfig config = load_run_config(optional_path(o.config), o.overrides);
  generate_synthetic(o.seed, o.clips, o.duration, config.model.coeff_dims, o.out);
  return kOk;
}

int cmd_train(const Options& o) {
  RunConfig config = load_run_config(optional_path(o.config), o.overrides);
  std::vector<ClipRecord> records;
  for (auto& r : load_manifest(o.data))
    if (r.split == Split::kTrain) records.push_back(std::move(r));
  if (records.empty()) throw DataError("manifest " + o.data + " has no train clips");
  const auto clips = load_clips(records, config.model.coeff_dims, config.frontend);

  config.train.checkpoint_path = fs::path(o.out);
  Checkpoint state = begin_training(init_params(config.model), config.frontend, clips, config.train);
  train(state, clips, config.train, [](const EpochReport& r) {
    json line{{"epoch", r.epoch},
              {"angle", r.mean.angle},
              {"translation", r.mean.translation},
              {"expression", r.mean.expression},
              {"motion", r.mean.motion},
              {"total", r.mean.total},
              {"total_per_frame", r.mean_total_per_frame}};
    std::cout << line.dump() << std::endl;
  });
  if (config.train.epochs == 0) save_checkpoint(state, o.out);
  return kOk;
}

int cmd_infer(const Options& o) {
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  const CoeffDims& dims = ckpt.model.config.coeff_dims;
  const CoeffSequence ref = load_coeffs(o.ref_coeffs, dims);
  if (o.ref_frame >= ref.frames())
    throw DataError(o.ref_coeffs + ": reference frame " + std::to_string(o.ref_frame) +
                    " not present (" + std::to_string(ref.frames()) + " rows)");
  const AcousticFeatures features = extract_features(load_wav(o.audio), ckpt.frontend);
  const CoeffSequence pred = predict(ckpt.model, features, ref.frame(o.ref_frame));
  if (!all_finite(pred.values.values())) throw NumericError("prediction is not finite");
  write_coeffs(o.out, pred);
  return kOk;
}

int cmd_eval(const Options& o) {
  const CoeffDims dims = sniff_dims(o.pred);
  const CoeffSequence pred = load_coeffs(o.pred, dims);
  const CoeffSequence gt = load_coeffs(o.gt, dims);
  if (pred.frames() != gt.frames())
    throw DataError("row count mismatch: " + std::to_string(pred.frames()) + " predicted vs " +
                    std::to_string(gt.frames()) + " ground-truth frames");
  if (pred.frames() == 0) throw DataError("coefficient files are empty");
  if (o.frames_pred.empty() != o.frames_gt.empty())
    throw ConfigError("--frames-pred and --frames-gt must be given together");

  const RunConfig config = load_run_config(optional_path(o.config), o.overrides);
  EvalReport report;
  report.distance = feature_distance(pred, gt);
  if (!o.frames_pred.empty())
    report.frames = evaluate_frames(o.frames_pred, o.frames_gt, config.cpbd);
  std::cout << to_json(report) << '\n';
  return kOk;
}

int cmd_grad_check(const Options& o, bool seed_given) {
  const RunConfig config = load_run_config(optional_path(o.config), o.overrides);
  // Seed precedence: --seed, then model.seed (config or LISTENHEAD_SEED).
  const std::uint64_t seed = seed_given ? o.seed : config.model.seed;
  const ModelGradCheck check = effective_gradcheck(config);
  const GradCheckReport r = check_model_gradients(check, seed);
  const auto names = parameter_names(init_params(check.model).params);
  json line{{"max_relative_error", r.max_relative_error},
            {"worst_tensor", names.at(r.worst_tensor)},
            {"max_entry_error", r.max_entry_error},
            {"entries_checked", r.entries_checked},
            {"tolerance", check.tolerance},
            {"pass", r.pass}};
  std::cout << line.dump() << '\n';
  return r.pass ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Listener head-motion generation from speaker audio"};
  app.require_subcommand(1);
  Options o;

  const auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--config", o.config, "Flat dotted-key JSON config");
    if (required) opt->required();
    sub->add_option("--set", o.overrides, "Override a config key (key=value), repeatable");
  };

  auto* features = app.add_subcommand("features", "Write the 45-column feature CSV for a WAV file");
  features->add_option("--audio", o.audio)->required();
  features->add_option("--out", o.out)->required();
  add_config(features, false);

  auto* synth = app.add_subcommand("synth-data", "Generate a deterministic synthetic dataset");
  synth->add_option("--seed", o.seed)->required();
  synth->add_option("--clips", o.clips)->required();
  synth->add_option("--duration", o.duration)->required();
  synth->add_option("--out", o.out)->required();
  add_config(synth, false);

  auto* train_cmd = app.add_subcommand("train", "Train on a manifest; one JSON line per epoch");
  train_cmd->add_option("--data", o.data, "Manifest CSV")->required();
  train_cmd->add_option("--out", o.out, "Checkpoint path, rewritten every epoch")->required();
  add_config(train_cmd, true);

  auto* infer = app.add_subcommand("infer", "Predict listener coefficients for a WAV file");
  infer->add_option("--ckpt", o.ckpt)->required();
  infer->add_option("--audio", o.audio)->required();
  infer->add_option("--ref-coeffs", o.ref_coeffs, "Coefficient CSV holding the reference frame")
      ->required();
  infer->add_option("--ref-frame", o.ref_frame, "Row of --ref-coeffs to use (default 0)");
  infer->add_option("--out", o.out)->required();

  auto* eval = app.add_subcommand("eval", "Feature distance and optional image metrics as JSON");
  eval->add_option("--pred", o.pred)->required();
  eval->add_option("--gt", o.gt)->required();
  eval->add_option("--frames-pred", o.frames_pred);
  eval->add_option("--frames-gt", o.frames_gt);
  add_config(eval, false);

  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of model gradients");
  auto* seed_opt = grad->add_option("--seed", o.seed);
  add_config(grad, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  }

  try {
    if (*features) return cmd_features(o);
    if (*synth) return cmd_synth_data(o);
    if (*train_cmd) return cmd_train(o);
    if (*infer) return cmd_infer(o);
    if (*eval) return cmd_eval(o);
    if (*grad) return cmd_grad_check(o, seed_opt->count() > 0);
  } catch (const ConfigError& e) {
    return fail(kUsage, "config", e.what());
  } catch (const ContractError& e) {
    return fail(kUsage, "usage", e.what());
  } catch (const NumericError& e) {
    return fail(kNumeric, "numeric", e.what());
  } catch (const DataError& e) {
    return fail(kData, "data", e.what());
  } catch (const std::exception& e) {
    return fail(kData, "internal", e.what());
  }
  return kUsage;
}
