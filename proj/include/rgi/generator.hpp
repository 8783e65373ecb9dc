#pragma once

#include "rgi/config.hpp"
#include "rgi/image.hpp"
#include "rgi/nn.hpp"
#include "rgi/styles.hpp"

namespace rgi {

// Noise injection policy for the synthesis blocks. `frozen` carries one plane
// per convolution slot; `fresh` derives planes from the seed on every call.
template <typename T>
struct NoisePolicy {
  NoiseMode mode = NoiseMode::kZero;
  uint64_t seed = 0;
  std::vector<std::vector<T>> buffers;

  static NoisePolicy zero() { return {}; }
  static NoisePolicy fresh(uint64_t seed) {
    return {NoiseMode::kFresh, seed, {}};
  }
  static NoisePolicy frozen(std::vector<std::vector<T>> bufs) {
    return {NoiseMode::kFrozen, 0, std::move(bufs)};
  }
};

// Mask-guided StyleGAN-style generator.
//
// Style slots: slot 0 is the 4x4 convolution on the learned constant; each
// doubling of resolution adds an upsample+conv slot and a plain conv slot;
// the last slot is the final toRGB. Intermediate toRGB skips share the style
// slot of the following conv, so a model of size S has 2*log2(S)-2 slots.
// Slots below K run one modulated convolution per region and composite the
// outputs by the downsized label mask; the remaining slots are driven by the
// mean style over present regions.
template <typename T>
class MaskedGenerator {
 public:
  MaskedGenerator(const ModelConfig& cfg, Rng rng) : cfg_(cfg) {
    const int m = ilog2(cfg.image_size) - 2;  // resolution doublings above 4
    const int D = cfg.style_dim;
    const_input_ = Tensor<T>::randn({cfg.channels_at(4), 4, 4}, rng, T(1));
    const_input_.set_requires_grad(true);
    convs_.push_back(make_conv(cfg.channels_at(4), cfg.channels_at(4), 3, D, rng));
    for (int i = 1; i <= m; ++i) {
      const int r = 4 << i;
      convs_.push_back(make_conv(cfg.channels_at(r), cfg.channels_at(r / 2), 3, D, rng));
      convs_.push_back(make_conv(cfg.channels_at(r), cfg.channels_at(r), 3, D, rng));
    }
    for (int i = 0; i <= m; ++i) {
      const int r = 4 << i;
      torgbs_.push_back(make_conv(3, cfg.channels_at(r), 1, D, rng));
    }
    defaults_ = Tensor<T>::randn({cfg.num_categories, cfg.num_layers(), D}, rng, T(0.1));
    defaults_.set_requires_grad(true);
  }

  const ModelConfig& config() const { return cfg_; }

  int num_conv_slots() const { return static_cast<int>(convs_.size()); }
  int conv_resolution(int slot) const { return slot == 0 ? 4 : 4 << ((slot + 1) / 2); }
  int torgb_slot(int res_index) const { return 2 * res_index + 1; }

  // Noise planes a frozen policy must carry: one per conv slot, res^2 each.
  std::vector<int> noise_plane_sizes() const {
    std::vector<int> out;
    for (int l = 0; l < num_conv_slots(); ++l) {
      const int r = conv_resolution(l);
      out.push_back(r * r);
    }
    return out;
  }

  NoisePolicy<T> make_frozen_noise(uint64_t seed) const {
    Rng rng(seed);
    NoisePolicy<T> p;
    p.mode = NoiseMode::kFrozen;
    for (int sz : noise_plane_sizes()) {
      std::vector<T> plane(sz);
      for (auto& v : plane) v = static_cast<T>(rng.normal());
      p.buffers.push_back(std::move(plane));
    }
    return p;
  }

  void set_noise(NoisePolicy<T> policy) {
    if (policy.mode == NoiseMode::kFrozen) {
      const auto sizes = noise_plane_sizes();
      RGI_CHECK(policy.buffers.size() == sizes.size(),
                "set_noise: frozen policy needs one plane per conv slot");
      for (size_t i = 0; i < sizes.size(); ++i)
        RGI_CHECK(static_cast<int>(policy.buffers[i].size()) == sizes[i],
                  "set_noise: frozen noise plane has wrong size");
    }
    noise_ = std::move(policy);
  }
  const NoisePolicy<T>& noise_policy() const { return noise_; }

  // Full mask-guided forward pass; output [3,S,S] mapped to [0,1], unclamped.
  Tensor<T> synthesize_t(const RegionalStyles<T>& styles, const LabelMask& mask) const {
    check_styles(styles);
    RGI_CHECK(mask.height == cfg_.image_size && mask.width == cfg_.image_size,
              "synthesize: mask size must match config");
    const auto mask_present = regions_in_mask(mask);
    const int m = ilog2(cfg_.image_size) - 2;
    Rng noise_rng(noise_.seed);

    auto x = const_input_;
    x = conv_slot(0, x, styles, &mask, mask_present, noise_rng);
    auto rgb = torgb(0, x, styles, &mask, mask_present);
    for (int i = 1; i <= m; ++i) {
      x = upsample_bilinear2x(x);
      x = conv_slot(2 * i - 1, x, styles, &mask, mask_present, noise_rng);
      x = conv_slot(2 * i, x, styles, &mask, mask_present, noise_rng);
      auto skip = torgb(i, x, styles, &mask, mask_present);
      rgb = add(upsample_bilinear2x(rgb), skip);
    }
    return mul_scalar(add_scalar(rgb, T(1)), T(0.5));
  }

  Image synthesize(const RegionalStyles<T>& styles, const LabelMask& mask) const {
    return clamp01(tensor_to_image(synthesize_t(styles, mask)));
  }

  // Reference route: a plain single-style forward pass with the same
  // parameters, no mask anywhere. `row` is [L, D].
  Tensor<T> synthesize_global_t(const Tensor<T>& row) const {
    RGI_CHECK(row.ndim() == 2 && row.dim(0) == cfg_.num_layers() &&
                  row.dim(1) == cfg_.style_dim,
              "synthesize_global: row must be [L, D]");
    const int m = ilog2(cfg_.image_size) - 2;
    const int D = cfg_.style_dim;
    Rng noise_rng(noise_.seed);
    auto style_of = [&](int slot) { return slice_flat(row, slot * D, D); };

    auto x = const_input_;
    x = plain_conv(convs_[0], x, style_of(0), true, 0, noise_rng);
    auto rgb = plain_torgb(torgbs_[0], x, style_of(torgb_slot(0)));
    for (int i = 1; i <= m; ++i) {
      x = upsample_bilinear2x(x);
      x = plain_conv(convs_[2 * i - 1], x, style_of(2 * i - 1), true, 2 * i - 1, noise_rng);
      x = plain_conv(convs_[2 * i], x, style_of(2 * i), true, 2 * i, noise_rng);
      auto skip = plain_torgb(torgbs_[i], x, style_of(torgb_slot(i)));
      rgb = add(upsample_bilinear2x(rgb), skip);
    }
    return mul_scalar(add_scalar(rgb, T(1)), T(0.5));
  }

  // One mask-guided layer in isolation (test surface): consumes the layer
  // input at the slot resolution and the full-resolution mask.
  Tensor<T> mask_guided_layer(int slot, const Tensor<T>& f_prev,
                              const RegionalStyles<T>& styles,
                              const LabelMask& mask) const {
    check_styles(styles);
    RGI_CHECK(slot >= 0 && slot < cfg_.effective_masked_layers(),
              "mask_guided_layer: slot must be below K");
    const auto mask_present = regions_in_mask(mask);
    Rng noise_rng(noise_.seed);
    return conv_slot(slot, f_prev, styles, &mask, mask_present, noise_rng);
  }

  ParamList<T> parameters(const std::string& prefix = "generator") const {
    ParamList<T> out;
    out.push_back({prefix + ".const", const_input_});
    out.push_back({prefix + ".defaults", defaults_});
    for (size_t l = 0; l < convs_.size(); ++l)
      collect_conv(convs_[l], out, prefix + ".conv" + std::to_string(l), true);
    for (size_t i = 0; i < torgbs_.size(); ++i)
      collect_conv(torgbs_[i], out, prefix + ".torgb" + std::to_string(i), false);
    return out;
  }

  // Parameters of the first K style slots (the fine-tuning subset when a
  // pretrained generator is loaded).
  ParamList<T> parameters_first_k(const std::string& prefix = "generator") const {
    const int K = cfg_.effective_masked_layers();
    ParamList<T> out;
    out.push_back({prefix + ".const", const_input_});
    out.push_back({prefix + ".defaults", defaults_});
    for (size_t l = 0; l < convs_.size(); ++l)
      if (static_cast<int>(l) < K)
        collect_conv(convs_[l], out, prefix + ".conv" + std::to_string(l), true);
    for (size_t i = 0; i < torgbs_.size(); ++i)
      if (torgb_slot(static_cast<int>(i)) < K)
        collect_conv(torgbs_[i], out, prefix + ".torgb" + std::to_string(i), false);
    return out;
  }

  Tensor<T> default_codes() const { return defaults_; }

 private:
  struct ModConv {
    Tensor<T> w, b;
    LinearLayer<T> affine;  // style -> per-input-channel scales, bias init 1
    Tensor<T> noise_gain;
  };

  ModConv make_conv(int co, int ci, int k, int style_dim, Rng& rng) {
    ModConv c;
    c.w = init_conv_weight<T>(co, ci, k, rng);
    c.b = init_bias<T>(co);
    c.affine = LinearLayer<T>(ci, style_dim, rng, T(1));
    c.noise_gain = init_bias<T>(1);
    return c;
  }

  static void collect_conv(const ModConv& c, ParamList<T>& out, const std::string& p,
                           bool with_noise) {
    out.push_back({p + ".weight", c.w});
    out.push_back({p + ".bias", c.b});
    c.affine.collect(out, p + ".affine");
    if (with_noise) out.push_back({p + ".noise_gain", c.noise_gain});
  }

  void check_styles(const RegionalStyles<T>& s) const {
    RGI_CHECK(s.codes.ndim() == 3 && s.codes.dim(0) == cfg_.num_categories &&
                  s.codes.dim(1) == cfg_.num_layers() &&
                  s.codes.dim(2) == cfg_.style_dim,
              "styles shape must be [C, L, D]");
    RGI_CHECK(static_cast<int>(s.present.size()) == cfg_.num_categories,
              "styles present flags must have C entries");
  }

  std::vector<uint8_t> regions_in_mask(const LabelMask& mask) const {
    std::vector<uint8_t> present(cfg_.num_categories, 0);
    for (uint8_t v : mask.labels) present[v] = 1;
    return present;
  }

  // style row for region j at slot l; absent regions use the learned default
  Tensor<T> effective_code(const RegionalStyles<T>& styles, int j, int l) const {
    const int L = cfg_.num_layers(), D = cfg_.style_dim;
    if (styles.present[j]) return styles.code_at(j, l);
    return slice_flat(defaults_, (j * L + l) * D, D);
  }

  // mean style over regions present in the mask
  Tensor<T> global_code(const RegionalStyles<T>& styles, int l,
                        const std::vector<uint8_t>& mask_present) const {
    std::vector<Tensor<T>> rows;
    for (int j = 0; j < cfg_.num_categories; ++j)
      if (mask_present[j]) rows.push_back(effective_code(styles, j, l));
    RGI_CHECK(!rows.empty(), "global_code: mask names no region");
    auto acc = rows[0];
    for (size_t i = 1; i < rows.size(); ++i) acc = add(acc, rows[i]);
    return mul_scalar(acc, T(1) / static_cast<T>(rows.size()));
  }

  std::vector<T> noise_plane(int slot, Rng& noise_rng) const {
    const int r = conv_resolution(slot);
    std::vector<T> plane(static_cast<size_t>(r) * r);
    for (auto& v : plane) v = static_cast<T>(noise_rng.normal());
    return plane;
  }

  Tensor<T> apply_noise_bias_act(const ModConv& c, Tensor<T> x, int slot,
                                 Rng& noise_rng) const {
    switch (noise_.mode) {
      case NoiseMode::kZero:
        break;
      case NoiseMode::kFresh:
        x = add_noise(x, noise_plane(slot, noise_rng), c.noise_gain);
        break;
      case NoiseMode::kFrozen:
        x = add_noise(x, noise_.buffers[slot], c.noise_gain);
        break;
    }
    x = add_channel_bias(x, c.b);
    return leaky_relu(x, T(0.2));
  }

  Tensor<T> plain_conv(const ModConv& c, const Tensor<T>& x, const Tensor<T>& style,
                       bool demod, int slot, Rng& noise_rng) const {
    auto wmod = modulate(c.w, c.affine(style), demod);
    auto y = conv2d(x, wmod, Tensor<T>(), 1, c.w.dim(2) / 2);
    return apply_noise_bias_act(c, y, slot, noise_rng);
  }

  Tensor<T> plain_torgb(const ModConv& c, const Tensor<T>& x,
                        const Tensor<T>& style) const {
    auto wmod = modulate(c.w, c.affine(style), false);
    auto y = conv2d(x, wmod, Tensor<T>(), 1, 0);
    return add_channel_bias(y, c.b);
  }

  Tensor<T> conv_slot(int slot, const Tensor<T>& x, const RegionalStyles<T>& styles,
                      const LabelMask* mask, const std::vector<uint8_t>& mask_present,
                      Rng& noise_rng) const {
    const ModConv& c = convs_[slot];
    if (slot >= cfg_.effective_masked_layers())
      return plain_conv(c, x, global_code(styles, slot, mask_present), true, slot,
                        noise_rng);
    const int res = conv_resolution(slot);
    const LabelMask small = downsample_mask(*mask, res);
    auto [kernels, ids] = region_kernels(c, styles, slot, small, true);
    std::vector<int> labels(small.labels.begin(), small.labels.end());
    auto y = masked_conv2d(x, kernels, ids, labels, Tensor<T>());
    return apply_noise_bias_act(c, y, slot, noise_rng);
  }

  Tensor<T> torgb(int res_index, const Tensor<T>& x, const RegionalStyles<T>& styles,
                  const LabelMask* mask, const std::vector<uint8_t>& mask_present) const {
    const ModConv& c = torgbs_[res_index];
    const int slot = torgb_slot(res_index);
    if (slot >= cfg_.effective_masked_layers())
      return plain_torgb(c, x, global_code(styles, slot, mask_present));
    const int res = 4 << res_index;
    const LabelMask small = downsample_mask(*mask, res);
    auto [kernels, ids] = region_kernels(c, styles, slot, small, false);
    std::vector<int> labels(small.labels.begin(), small.labels.end());
    auto y = masked_conv2d(x, kernels, ids, labels, Tensor<T>());
    return add_channel_bias(y, c.b);
  }

  std::pair<std::vector<Tensor<T>>, std::vector<int>> region_kernels(
      const ModConv& c, const RegionalStyles<T>& styles, int slot,
      const LabelMask& small, bool demod) const {
    std::vector<uint8_t> here(cfg_.num_categories, 0);
    for (uint8_t v : small.labels) here[v] = 1;
    std::vector<Tensor<T>> kernels;
    std::vector<int> ids;
    for (int j = 0; j < cfg_.num_categories; ++j) {
      if (!here[j]) continue;
      auto scales = c.affine(effective_code(styles, j, slot));
      kernels.push_back(modulate(c.w, scales, demod));
      ids.push_back(j);
    }
    return {std::move(kernels), std::move(ids)};
  }

  ModelConfig cfg_;
  Tensor<T> const_input_;
  Tensor<T> defaults_;
  std::vector<ModConv> convs_;
  std::vector<ModConv> torgbs_;
  NoisePolicy<T> noise_;
};

// StyleGAN2-style residual critic.
template <typename T>
class Discriminator {
 public:
  Discriminator(const ModelConfig& cfg, Rng rng) : cfg_(cfg) {
    stem_ = ConvLayer<T>(cfg.channels_at(cfg.image_size), 3, 3, 1, rng);
    int ch = cfg.channels_at(cfg.image_size);
    for (int r = cfg.image_size; r > 4; r /= 2) {
      const int co = cfg.channels_at(r / 2);
      blocks_.emplace_back(ch, co, rng);
      ch = co;
    }
    final_conv_ = ConvLayer<T>(ch, ch, 3, 1, rng);
    fc1_ = LinearLayer<T>(ch, ch * 16, rng);
    fc2_ = LinearLayer<T>(1, ch, rng);
  }

  // logit for one image in [0,1]
  Tensor<T> operator()(const Tensor<T>& image) const {
    auto x = add_scalar(mul_scalar(image, T(2)), T(-1));
    x = leaky_relu(stem_(x), T(0.2));
    for (const auto& b : blocks_) x = b(x);
    x = leaky_relu(final_conv_(x), T(0.2));
    auto v = reshape(x, {x.numel()});
    v = leaky_relu(fc1_(v), T(0.2));
    return fc2_(v);
  }

  ParamList<T> parameters(const std::string& prefix = "discriminator") const {
    ParamList<T> out;
    stem_.collect(out, prefix + ".stem");
    for (size_t k = 0; k < blocks_.size(); ++k)
      blocks_[k].collect(out, prefix + ".block" + std::to_string(k));
    final_conv_.collect(out, prefix + ".final_conv");
    fc1_.collect(out, prefix + ".fc1");
    fc2_.collect(out, prefix + ".fc2");
    return out;
  }

 private:
  ModelConfig cfg_;
  ConvLayer<T> stem_;
  std::vector<DownBlock<T>> blocks_;
  ConvLayer<T> final_conv_;
  LinearLayer<T> fc1_, fc2_;
};

}  // namespace rgi
