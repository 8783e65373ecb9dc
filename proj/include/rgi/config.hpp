#pragma once

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "rgi/core.hpp"
#include "rgi/mask.hpp"

namespace rgi {

using json = nlohmann::json;

struct ModelConfig {
  int image_size = 256;
  int style_dim = 512;      // D
  int num_categories = 12;  // C
  int masked_layers = 0;    // K; 0 selects the default max(1, L-5)
  int encoder_scales = 3;   // N
  int base_channels = 32;
  int max_channels = 512;

  int num_layers() const { return 2 * ilog2(image_size) - 2; }
  int effective_masked_layers() const {
    return masked_layers > 0 ? masked_layers : std::max(1, num_layers() - 5);
  }
  // generator channel width at a given feature resolution
  int channels_at(int res) const {
    int c = base_channels;
    for (int r = res; r < image_size; r *= 2) c *= 2;
    return std::min(c, max_channels);
  }

  void validate() const {
    if (!is_pow2(image_size) || image_size < 32 || image_size > 1024)
      throw config_error("model.image_size must be a power of two in [32,1024]");
    if (style_dim < 1) throw config_error("model.style_dim must be >= 1");
    if (num_categories < 1) throw config_error("model.num_categories must be >= 1");
    if (encoder_scales < 1) throw config_error("model.encoder_scales must be >= 1");
    if (masked_layers < 0 || masked_layers > num_layers())
      throw config_error("model.masked_layers must be in [1, num_layers]");
    if (base_channels < 1 || max_channels < base_channels)
      throw config_error("model.base/max_channels invalid");
    if (image_size >> (encoder_scales + 2) < 1)
      throw config_error("model.encoder_scales too deep for image_size");
  }
};

struct TrainSchedule {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999;
  std::vector<long> milestones;  // steps at which lr decays by 0.1
  double flip_prob = 0.5;
  int d_period = 15;  // discriminator updates once per this many generator steps
  long iterations = 0;
  int batch_size = 1;

  void validate(const char* who) const {
    if (lr <= 0) throw config_error(std::string(who) + ".lr must be > 0");
    if (d_period < 1) throw config_error(std::string(who) + ".d_period must be >= 1");
    if (batch_size < 1) throw config_error(std::string(who) + ".batch_size must be >= 1");
    if (iterations < 0) throw config_error(std::string(who) + ".iterations must be >= 0");
    if (flip_prob < 0 || flip_prob > 1)
      throw config_error(std::string(who) + ".flip_prob must be in [0,1]");
    for (size_t i = 1; i < milestones.size(); ++i)
      if (milestones[i] <= milestones[i - 1])
        throw config_error(std::string(who) + ".milestones must be increasing");
  }
};

struct LossWeights {
  double lambda_lpips = 0.8;
  double lambda_id = 0.1;
  double lambda_parsing = 0.1;
  double lambda_adv = 0.01;
  double recolor_l2 = 1.0;
  double recolor_lpips = 1.0;
  double inpaint_l2 = 1.0;
  double inpaint_lpips = 5.0;

  void validate() const {
    const double all[] = {lambda_lpips, lambda_id,    lambda_parsing, lambda_adv,
                          recolor_l2,   recolor_lpips, inpaint_l2,    inpaint_lpips};
    for (double v : all)
      if (v < 0) throw config_error("loss weights must be >= 0");
  }
};

struct RecolorConfig {
  int resolution = 256;
  int feature_channels = 64;
  int feature_stride = 4;  // attention runs at resolution / stride
  double brightness = 0.2;
  double contrast_lo = 0.8, contrast_hi = 1.2;
  double sobel_threshold = 0.05;

  void validate() const {
    if (!is_pow2(resolution) || resolution < 16)
      throw config_error("recolor.resolution must be a power of two >= 16");
    if (feature_stride < 1 || !is_pow2(feature_stride))
      throw config_error("recolor.feature_stride must be a power of two");
    if (sobel_threshold < 0) throw config_error("recolor.sobel_threshold must be >= 0");
  }
};

struct InpaintConfig {
  int resolution = 256;
  std::string mode = "erase";  // or "rgi-edit"
  MismatchBandParams band;
  double fill = 0.5;

  void validate() const {
    if (!is_pow2(resolution) || resolution < 16)
      throw config_error("inpaint.resolution must be a power of two >= 16");
    if (mode != "erase" && mode != "rgi-edit")
      throw config_error("inpaint.mode must be 'erase' or 'rgi-edit'");
    if (band.band_width < 0) throw config_error("inpaint.band_width must be >= 0");
    if (band.keep_prob < 0 || band.keep_prob > 1)
      throw config_error("inpaint.keep_prob must be in [0,1]");
  }
};

struct PasteConfig {
  int levels = 5;
  int feather = 8;
};

enum class NoiseMode { kZero, kFresh, kFrozen };

struct NoiseConfig {
  NoiseMode mode = NoiseMode::kZero;
  uint64_t seed = 0;
};

struct RunPaths {
  std::string rgi_checkpoint;
  std::string recolor_checkpoint;
  std::string inpaint_checkpoint;
  std::string pretrained_generator;  // when set, only the first K layers train
  std::string taxonomy_file;
  std::string train_log;
};

struct RunHooks {
  std::string reenact_cmd;   // external reenactment command; empty = identity
  std::string embedder_cmd;  // external identity embedder command
  std::string enhance_cmd;   // external super-resolution command; empty = identity
};

struct RunConfig {
  std::string preset = "toy";
  uint64_t seed = 1;
  ModelConfig model;
  TrainSchedule rgi;
  TrainSchedule recolor_sched;
  TrainSchedule inpaint_sched;
  LossWeights weights;
  RecolorConfig recolor;
  InpaintConfig inpaint;
  PasteConfig paste;
  NoiseConfig noise;
  RunPaths paths;
  RunHooks hooks;

  // multi-scale perceptual-loss sizes, clipped to the working resolution
  std::vector<int> lpips_scales() const {
    std::vector<int> s;
    for (int f = 4; f >= 1; f /= 2) {
      const int sz = model.image_size / f;
      if (sz >= 16) s.push_back(sz);
    }
    if (s.empty()) s.push_back(model.image_size);
    return s;
  }

  void validate() const {
    model.validate();
    rgi.validate("rgi");
    recolor_sched.validate("recolor_sched");
    inpaint_sched.validate("inpaint_sched");
    weights.validate();
    recolor.validate();
    inpaint.validate();
    if (paste.levels < 1) throw config_error("paste.levels must be >= 1");
    if (paste.feather < 0) throw config_error("paste.feather must be >= 0");
  }
};

inline RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "toy") {
    c.model = {64, 64, 12, 0, 3, 32, 64};
    c.rgi = {1e-3, 0.9, 0.999, {}, 0.5, 15, 2000, 1};
    c.recolor_sched = {2e-3, 0.9, 0.999, {}, 0.5, 15, 300, 1};
    c.inpaint_sched = {2e-3, 0.9, 0.999, {}, 0.5, 15, 300, 1};
    c.recolor.resolution = 64;
    c.inpaint.resolution = 64;
    c.inpaint.band = {4, 6, 0.5};
  } else if (name == "small") {
    c.model = {128, 128, 12, 0, 3, 32, 128};
    c.rgi = {1e-4, 0.9, 0.999, {10000, 15000}, 0.5, 15, 20000, 2};
    c.recolor_sched = {1e-4, 0.9, 0.999, {}, 0.5, 15, 5000, 2};
    c.inpaint_sched = {1e-4, 0.9, 0.999, {}, 0.5, 15, 5000, 2};
    c.recolor.resolution = 128;
    c.inpaint.resolution = 128;
    c.inpaint.band = {6, 8, 0.5};
  } else if (name == "paper") {
    // full-scale settings; not runnable in CI but kept as the reference preset
    c.model = {1024, 512, 12, 13, 3, 64, 512};
    c.rgi = {1e-4, 0.9, 0.999, {100000, 150000}, 0.5, 15, 200000, 16};
    c.recolor_sched = {1e-4, 0.9, 0.999, {}, 0.5, 15, 100000, 16};
    c.inpaint_sched = {1e-4, 0.9, 0.999, {}, 0.5, 15, 100000, 16};
    c.recolor.resolution = 256;
    c.inpaint.resolution = 256;
    c.inpaint.band = {24, 10, 0.5};
  } else {
    throw config_error("unknown preset: " + name + " (expected toy|small|paper)");
  }
  return c;
}

// --- JSON (de)serialization -------------------------------------------------

namespace detail {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline void apply_json_overlay(RunConfig& c, const json& j) {
  detail::get_if(j, "preset", c.preset);
  detail::get_if(j, "seed", c.seed);
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::get_if(m, "image_size", c.model.image_size);
    detail::get_if(m, "style_dim", c.model.style_dim);
    detail::get_if(m, "num_categories", c.model.num_categories);
    detail::get_if(m, "masked_layers", c.model.masked_layers);
    detail::get_if(m, "encoder_scales", c.model.encoder_scales);
    detail::get_if(m, "base_channels", c.model.base_channels);
    detail::get_if(m, "max_channels", c.model.max_channels);
  }
  auto sched = [](const json& s, TrainSchedule& t) {
    detail::get_if(s, "lr", t.lr);
    detail::get_if(s, "beta1", t.beta1);
    detail::get_if(s, "beta2", t.beta2);
    detail::get_if(s, "milestones", t.milestones);
    detail::get_if(s, "flip_prob", t.flip_prob);
    detail::get_if(s, "d_period", t.d_period);
    detail::get_if(s, "iterations", t.iterations);
    detail::get_if(s, "batch_size", t.batch_size);
  };
  if (j.contains("rgi")) sched(j.at("rgi"), c.rgi);
  if (j.contains("recolor_sched")) sched(j.at("recolor_sched"), c.recolor_sched);
  if (j.contains("inpaint_sched")) sched(j.at("inpaint_sched"), c.inpaint_sched);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    detail::get_if(w, "lambda_lpips", c.weights.lambda_lpips);
    detail::get_if(w, "lambda_id", c.weights.lambda_id);
    detail::get_if(w, "lambda_parsing", c.weights.lambda_parsing);
    detail::get_if(w, "lambda_adv", c.weights.lambda_adv);
    detail::get_if(w, "recolor_l2", c.weights.recolor_l2);
    detail::get_if(w, "recolor_lpips", c.weights.recolor_lpips);
    detail::get_if(w, "inpaint_l2", c.weights.inpaint_l2);
    detail::get_if(w, "inpaint_lpips", c.weights.inpaint_lpips);
  }
  if (j.contains("recolor")) {
    const auto& r = j.at("recolor");
    detail::get_if(r, "resolution", c.recolor.resolution);
    detail::get_if(r, "feature_channels", c.recolor.feature_channels);
    detail::get_if(r, "feature_stride", c.recolor.feature_stride);
    detail::get_if(r, "brightness", c.recolor.brightness);
    detail::get_if(r, "contrast_lo", c.recolor.contrast_lo);
    detail::get_if(r, "contrast_hi", c.recolor.contrast_hi);
    detail::get_if(r, "sobel_threshold", c.recolor.sobel_threshold);
  }
  if (j.contains("inpaint")) {
    const auto& p = j.at("inpaint");
    detail::get_if(p, "resolution", c.inpaint.resolution);
    detail::get_if(p, "mode", c.inpaint.mode);
    detail::get_if(p, "band_width", c.inpaint.band.band_width);
    detail::get_if(p, "blob_count", c.inpaint.band.blob_count);
    detail::get_if(p, "keep_prob", c.inpaint.band.keep_prob);
    detail::get_if(p, "fill", c.inpaint.fill);
  }
  if (j.contains("paste")) {
    detail::get_if(j.at("paste"), "levels", c.paste.levels);
    detail::get_if(j.at("paste"), "feather", c.paste.feather);
  }
  if (j.contains("noise")) {
    std::string mode = "zero";
    detail::get_if(j.at("noise"), "mode", mode);
    if (mode == "zero")
      c.noise.mode = NoiseMode::kZero;
    else if (mode == "fresh")
      c.noise.mode = NoiseMode::kFresh;
    else if (mode == "frozen")
      c.noise.mode = NoiseMode::kFrozen;
    else
      throw config_error("noise.mode must be zero|fresh|frozen");
    detail::get_if(j.at("noise"), "seed", c.noise.seed);
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    detail::get_if(p, "rgi_checkpoint", c.paths.rgi_checkpoint);
    detail::get_if(p, "recolor_checkpoint", c.paths.recolor_checkpoint);
    detail::get_if(p, "inpaint_checkpoint", c.paths.inpaint_checkpoint);
    detail::get_if(p, "pretrained_generator", c.paths.pretrained_generator);
    detail::get_if(p, "taxonomy_file", c.paths.taxonomy_file);
    detail::get_if(p, "train_log", c.paths.train_log);
  }
  if (j.contains("hooks")) {
    const auto& hk = j.at("hooks");
    detail::get_if(hk, "reenact_cmd", c.hooks.reenact_cmd);
    detail::get_if(hk, "embedder_cmd", c.hooks.embedder_cmd);
    detail::get_if(hk, "enhance_cmd", c.hooks.enhance_cmd);
  }
}

inline json config_to_json(const RunConfig& c) {
  json j;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["model"] = {{"image_size", c.model.image_size},
                {"style_dim", c.model.style_dim},
                {"num_categories", c.model.num_categories},
                {"masked_layers", c.model.masked_layers},
                {"encoder_scales", c.model.encoder_scales},
                {"base_channels", c.model.base_channels},
                {"max_channels", c.model.max_channels}};
  auto sched = [](const TrainSchedule& t) {
    return json{{"lr", t.lr},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"milestones", t.milestones},
                {"flip_prob", t.flip_prob},
                {"d_period", t.d_period},
                {"iterations", t.iterations},
                {"batch_size", t.batch_size}};
  };
  j["rgi"] = sched(c.rgi);
  j["recolor_sched"] = sched(c.recolor_sched);
  j["inpaint_sched"] = sched(c.inpaint_sched);
  j["weights"] = {{"lambda_lpips", c.weights.lambda_lpips},
                  {"lambda_id", c.weights.lambda_id},
                  {"lambda_parsing", c.weights.lambda_parsing},
                  {"lambda_adv", c.weights.lambda_adv},
                  {"recolor_l2", c.weights.recolor_l2},
                  {"recolor_lpips", c.weights.recolor_lpips},
                  {"inpaint_l2", c.weights.inpaint_l2},
                  {"inpaint_lpips", c.weights.inpaint_lpips}};
  j["recolor"] = {{"resolution", c.recolor.resolution},
                  {"feature_channels", c.recolor.feature_channels},
                  {"feature_stride", c.recolor.feature_stride},
                  {"brightness", c.recolor.brightness},
                  {"contrast_lo", c.recolor.contrast_lo},
                  {"contrast_hi", c.recolor.contrast_hi},
                  {"sobel_threshold", c.recolor.sobel_threshold}};
  j["inpaint"] = {{"resolution", c.inpaint.resolution},
                  {"mode", c.inpaint.mode},
                  {"band_width", c.inpaint.band.band_width},
                  {"blob_count", c.inpaint.band.blob_count},
                  {"keep_prob", c.inpaint.band.keep_prob},
                  {"fill", c.inpaint.fill}};
  j["paste"] = {{"levels", c.paste.levels}, {"feather", c.paste.feather}};
  const char* nm = c.noise.mode == NoiseMode::kZero    ? "zero"
                   : c.noise.mode == NoiseMode::kFresh ? "fresh"
                                                       : "frozen";
  j["noise"] = {{"mode", nm}, {"seed", c.noise.seed}};
  j["paths"] = {{"rgi_checkpoint", c.paths.rgi_checkpoint},
                {"recolor_checkpoint", c.paths.recolor_checkpoint},
                {"inpaint_checkpoint", c.paths.inpaint_checkpoint},
                {"pretrained_generator", c.paths.pretrained_generator},
                {"taxonomy_file", c.paths.taxonomy_file},
                {"train_log", c.paths.train_log}};
  j["hooks"] = {{"reenact_cmd", c.hooks.reenact_cmd},
                {"embedder_cmd", c.hooks.embedder_cmd},
                {"enhance_cmd", c.hooks.enhance_cmd}};
  return j;
}

// Load order: preset defaults, then the file overlay (explicit path or the
// RGI_E4S_CONFIG environment variable as fallback).
inline RunConfig load_config(const std::string& file_path, const std::string& preset) {
  RunConfig c = preset_config(preset.empty() ? "toy" : preset);
  std::string path = file_path;
  if (path.empty()) {
    if (const char* env = std::getenv("RGI_E4S_CONFIG")) path = env;
  }
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw config_error("config parse error in " + path + ": " + e.what());
    }
    if (j.contains("preset") && preset.empty()) {
      c = preset_config(j.at("preset").get<std::string>());
    }
    try {
      apply_json_overlay(c, j);
    } catch (const json::exception& e) {
      throw config_error("config schema error in " + path + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

// Taxonomy + aggregation table file ({"names": [...], "inner": [...], ...}).
inline std::pair<CategoryTaxonomy, std::vector<uint8_t>> load_taxonomy(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open taxonomy file: " + path);
  json j;
  in >> j;
  CategoryTaxonomy t;
  t.names = j.at("names").get<std::vector<std::string>>();
  auto ids_of = [&t](const json& arr) {
    std::set<int> out;
    for (const auto& v : arr) out.insert(t.id_of(v.get<std::string>()));
    return out;
  };
  t.inner_set = ids_of(j.at("inner"));
  t.exchange_set = ids_of(j.at("exchange_from_driven"));
  t.stitch_target_first = ids_of(j.at("stitch_target_first"));
  t.stitch_target_last = ids_of(j.at("stitch_target_last"));
  t.validate();
  std::vector<uint8_t> mapping;
  for (const auto& v : j.at("aggregation_19_to_12"))
    mapping.push_back(static_cast<uint8_t>(t.id_of(v.get<std::string>())));
  return {t, mapping};
}

}  // namespace rgi
