#pragma once

#include <filesystem>
#include <fstream>
#include <optional>

#include "rgi/checkpoint.hpp"
#include "rgi/encoder.hpp"
#include "rgi/generator.hpp"
#include "rgi/image_io.hpp"
#include "rgi/losses.hpp"

namespace rgi {

struct Sample {
  Image image;
  LabelMask mask;
};
using Dataset = std::vector<Sample>;

// Directory layout: <name>.png with sibling <name>.mask.png.
inline Dataset load_dataset_dir(const std::string& dir, int num_categories = 12) {
  namespace fs = std::filesystem;
  Dataset out;
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string p = e.path().string();
    if (p.size() > 4 && p.substr(p.size() - 4) == ".png" &&
        p.find(".mask.png") == std::string::npos &&
        p.find(".mismatch.png") == std::string::npos)
      names.push_back(p);
  }
  std::sort(names.begin(), names.end());
  for (const auto& p : names) {
    const std::string mask_path = p.substr(0, p.size() - 4) + ".mask.png";
    if (!fs::exists(mask_path)) continue;
    out.push_back({read_image_png(p), read_mask_png(mask_path, num_categories)});
  }
  return out;
}

// Encoder + generator + critic + fixed loss backends built from one seed.
template <typename T>
struct RgiModels {
  ModelConfig config;
  StyleEncoder<T> encoder;
  MaskedGenerator<T> generator;
  Discriminator<T> discriminator;
  LossBackends<T> backends;

  RgiModels(const ModelConfig& cfg, uint64_t seed)
      : config(cfg),
        encoder(cfg, seed_rng(seed, 1)),
        generator(cfg, seed_rng(seed, 2)),
        discriminator(cfg, seed_rng(seed, 3)) {}

  static Rng seed_rng(uint64_t seed, uint64_t tag) {
    Rng root(seed);
    return root.fork(tag);
  }

  ParamList<T> generator_side_params(bool pretrained_generator) const {
    ParamList<T> out = encoder.parameters();
    auto gp = pretrained_generator ? generator.parameters_first_k()
                                   : generator.parameters();
    out.insert(out.end(), gp.begin(), gp.end());
    return out;
  }

  Checkpoint to_checkpoint(const json& config_echo = {}) const {
    Checkpoint ck;
    ck.config_echo = config_echo;
    ck.put_params(encoder.parameters());
    ck.put_params(generator.parameters());
    ck.put_params(discriminator.parameters());
    return ck;
  }

  void load(const Checkpoint& ck) {
    ck.load_params(encoder.parameters());
    ck.load_params(generator.parameters());
    if (ck.has("discriminator.stem.weight"))
      ck.load_params(discriminator.parameters());
  }
};

struct StepMetrics {
  long step = 0;
  double total = 0, mse = 0, lpips = 0, id = 0, parsing = 0, adv = 0;
  double d_loss = 0;
  bool d_updated = false;
  double lr = 0;

  json to_json() const {
    return json{{"step", step},     {"total", total}, {"mse", mse},
                {"lpips", lpips},   {"id", id},       {"parsing", parsing},
                {"adv", adv},       {"d_loss", d_loss},
                {"d_updated", d_updated}, {"lr", lr}};
  }
};

namespace detail {

inline std::ofstream open_train_log(const std::string& path) {
  std::ofstream out;
  if (!path.empty()) {
    out.open(path, std::ios::app);
    if (!out) throw io_error("cannot open training log: " + path);
  }
  return out;
}

}  // namespace detail

// Reconstruction-as-proxy training of the regional inversion models.
// The generator updates every step; the critic updates once per
// schedule.d_period generator steps. When a pretrained generator checkpoint
// is configured, only its first K style slots receive gradients.
template <typename T>
std::vector<StepMetrics> train_rgi(RgiModels<T>& m, const Dataset& data,
                                   const RunConfig& cfg, uint64_t seed) {
  if (data.empty()) throw precondition_error("train_rgi: empty dataset");
  const TrainSchedule& sched = cfg.rgi;
  const bool pretrained = !cfg.paths.pretrained_generator.empty();
  if (pretrained) {
    const Checkpoint ck = load_checkpoint(cfg.paths.pretrained_generator);
    ck.load_params(m.generator.parameters());
    // freeze everything outside the first K slots
    auto all = m.generator.parameters();
    auto sub = m.generator.parameters_first_k();
    std::set<TensorNode<T>*> keep;
    for (auto& np : sub) keep.insert(np.tensor.raw());
    for (auto& np : all)
      if (!keep.count(np.tensor.raw())) np.tensor.raw()->requires_grad = false;
  }
  const ParamList<T> g_params = m.generator_side_params(pretrained);
  const ParamList<T> d_params = m.discriminator.parameters();
  const bool use_adv = cfg.weights.lambda_adv > 0;
  const auto scales = cfg.lpips_scales();

  Adam<T> g_opt(static_cast<T>(sched.lr), static_cast<T>(sched.beta1),
                static_cast<T>(sched.beta2));
  Adam<T> d_opt(static_cast<T>(sched.lr), static_cast<T>(sched.beta1),
                static_cast<T>(sched.beta2));
  Rng rng(seed);
  auto log_stream = detail::open_train_log(cfg.paths.train_log);

  if (cfg.noise.mode == NoiseMode::kFrozen)
    m.generator.set_noise(m.generator.make_frozen_noise(cfg.noise.seed));

  std::vector<StepMetrics> metrics;
  metrics.reserve(static_cast<size_t>(sched.iterations));
  for (long step = 1; step <= sched.iterations; ++step) {
    const T lr = static_cast<T>(milestone_lr(sched.lr, sched.milestones, step));
    g_opt.set_lr(lr);
    d_opt.set_lr(lr);
    if (cfg.noise.mode == NoiseMode::kFresh)
      m.generator.set_noise(
          NoisePolicy<T>::fresh(cfg.noise.seed + static_cast<uint64_t>(step)));

    // draw the batch and augmentation decisions up front
    std::vector<int> idx(sched.batch_size);
    std::vector<bool> flip(sched.batch_size);
    for (int b = 0; b < sched.batch_size; ++b) {
      idx[b] = rng.uniform_int(static_cast<int>(data.size()));
      flip[b] = rng.bernoulli(sched.flip_prob);
    }

    StepMetrics sm;
    sm.step = step;
    sm.lr = lr;

    Adam<T>::zero_grads(g_params);
    Adam<T>::zero_grads(d_params);
    Tensor<T> g_total;
    std::vector<Tensor<T>> recon_detached(sched.batch_size);
    std::vector<Tensor<T>> input_tensors(sched.batch_size);
    for (int b = 0; b < sched.batch_size; ++b) {
      const Sample& s = data[idx[b]];
      const Image img = flip[b] ? hflip(s.image) : s.image;
      const LabelMask mask = flip[b] ? hflip(s.mask) : s.mask;
      auto input = image_to_tensor<T>(img);
      auto styles = m.encoder.encode(input, mask);
      auto recon = m.generator.synthesize_t(styles, mask);
      Tensor<T> d_fake;
      if (use_adv) d_fake = m.discriminator(recon);
      auto breakdown =
          loss_rgi_total(recon, input, cfg.weights, m.backends, scales, d_fake);
      sm.mse += breakdown.mse.item();
      sm.lpips += breakdown.lpips.item();
      sm.id += breakdown.id.item();
      sm.parsing += breakdown.parsing.item();
      if (use_adv) sm.adv += breakdown.adv.item();
      sm.total += breakdown.total.item();
      g_total = g_total.defined() ? add(g_total, breakdown.total) : breakdown.total;
      recon_detached[b] = recon.detach();
      input_tensors[b] = input;
    }
    const double inv_b = 1.0 / sched.batch_size;
    sm.mse *= inv_b;
    sm.lpips *= inv_b;
    sm.id *= inv_b;
    sm.parsing *= inv_b;
    sm.adv *= inv_b;
    sm.total *= inv_b;
    g_total = mul_scalar(g_total, static_cast<T>(inv_b));
    g_total.backward();
    g_opt.step(g_params);

    if (use_adv && step % sched.d_period == 0) {
      Adam<T>::zero_grads(d_params);
      Tensor<T> d_total;
      for (int b = 0; b < sched.batch_size; ++b) {
        auto d_real = m.discriminator(input_tensors[b].detach());
        auto d_fake = m.discriminator(recon_detached[b]);
        auto dl = loss_adversarial(d_real, d_fake, GanSide::kDiscriminator);
        d_total = d_total.defined() ? add(d_total, dl) : dl;
      }
      d_total = mul_scalar(d_total, static_cast<T>(inv_b));
      sm.d_loss = d_total.item();
      d_total.backward();
      d_opt.step(d_params);
      sm.d_updated = true;
    }

    if (log_stream.is_open()) log_stream << sm.to_json().dump() << "\n";
    metrics.push_back(sm);
  }
  return metrics;
}

// Reconstruction loss without the adversarial term (code optimization and
// per-frame fine-tuning target).
template <typename T>
Tensor<T> recon_loss(const RgiModels<T>& m, const Tensor<T>& recon,
                     const Tensor<T>& input, const RunConfig& cfg) {
  auto bd = loss_rgi_total(recon, input, cfg.weights, m.backends, cfg.lpips_scales());
  return bd.total;
}

// Gradient descent on the style codes with the generator frozen.
template <typename T>
RegionalStyles<T> optimize_codes(const RgiModels<T>& m, const Image& image,
                                 const LabelMask& mask,
                                 const RegionalStyles<T>& init, const RunConfig& cfg,
                                 int steps = 50, double lr = 1e-2) {
  RegionalStyles<T> cur{init.codes.detach().set_requires_grad(true), init.present};
  if (steps <= 0) return cur;
  auto input = image_to_tensor<T>(image);
  Adam<T> opt(static_cast<T>(lr));
  const ParamList<T> params{{"codes", cur.codes}};
  for (int s = 0; s < steps; ++s) {
    Adam<T>::zero_grads(params);
    auto recon = m.generator.synthesize_t(cur, mask);
    auto loss = recon_loss(m, recon, input, cfg);
    loss.backward();
    opt.step(params);
  }
  return cur;
}

// Fine-tune the generator on a frame sequence, pivoting on the encoder codes.
template <typename T>
void finetune_video(RgiModels<T>& m, const Dataset& frames, const RunConfig& cfg,
                    int steps_per_frame = 200, double lr = 1e-3) {
  if (frames.empty()) throw precondition_error("finetune_video: empty frame list");
  std::vector<RegionalStyles<T>> pivots;
  for (const auto& f : frames)
    pivots.push_back(m.encoder.encode(image_to_tensor<T>(f.image), f.mask).detached());
  const ParamList<T> g_params = m.generator.parameters();
  Adam<T> opt(static_cast<T>(lr));
  for (size_t i = 0; i < frames.size(); ++i) {
    auto input = image_to_tensor<T>(frames[i].image);
    for (int s = 0; s < steps_per_frame; ++s) {
      Adam<T>::zero_grads(g_params);
      auto recon = m.generator.synthesize_t(pivots[i], frames[i].mask);
      auto loss = recon_loss(m, recon, input, cfg);
      loss.backward();
      opt.step(g_params);
    }
  }
}

}  // namespace rgi
