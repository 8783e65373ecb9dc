#pragma once

#include "rgi/config.hpp"
#include "rgi/image.hpp"
#include "rgi/nn.hpp"
#include "rgi/styles.hpp"

namespace rgi {

// F_1..F_N at strictly increasing resolution toward N (coarsest first).
template <typename T>
struct FeaturePyramid {
  std::vector<Tensor<T>> maps;
};

// Multi-scale mask-guided texture encoder. A strided residual stack produces
// the feature pyramid; label masks enter only through region average pooling;
// per-layer MLP heads map the concatenated multi-scale vectors to one style
// code per generator layer.
template <typename T>
class StyleEncoder {
 public:
  StyleEncoder(const ModelConfig& cfg, Rng rng) : cfg_(cfg) {
    const int depth = 2 + cfg.encoder_scales;  // blocks down to /2^(2+N)
    stem_ = ConvLayer<T>(cfg.base_channels, 3, 3, 1, rng);
    int ch = cfg.base_channels;
    for (int k = 1; k <= depth; ++k) {
      const int co = std::min(cfg.max_channels, cfg.base_channels << k);
      blocks_.emplace_back(ch, co, rng);
      ch = co;
    }
    // tapped scales: the deepest N block outputs (finest tap is /8)
    int concat_dim = 0;
    for (int i = 0; i < cfg.encoder_scales; ++i) {
      const int k = depth - i;  // block index producing scale /2^k
      concat_dim += std::min(cfg.max_channels, cfg.base_channels << k);
    }
    const int hid = 2 * cfg.style_dim;
    const int L = cfg.num_layers();
    for (int l = 0; l < L; ++l) {
      heads_.push_back({LinearLayer<T>(hid, concat_dim, rng),
                        LinearLayer<T>(hid, hid, rng),
                        LinearLayer<T>(cfg.style_dim, hid, rng)});
    }
  }

  const ModelConfig& config() const { return cfg_; }

  // image in [0,1], [3,S,S]; features computed on [-1,1] internally
  FeaturePyramid<T> extract_pyramid(const Tensor<T>& image) const {
    RGI_CHECK(image.ndim() == 3 && image.dim(1) == cfg_.image_size &&
                  image.dim(2) == cfg_.image_size,
              "extract_pyramid: image size must match config.image_size");
    auto x = add_scalar(mul_scalar(image, T(2)), T(-1));
    x = leaky_relu(stem_(x), T(0.2));
    std::vector<Tensor<T>> taps(blocks_.size());
    for (size_t k = 0; k < blocks_.size(); ++k) {
      x = blocks_[k](x);
      taps[k] = x;
    }
    FeaturePyramid<T> pyr;
    for (int i = 0; i < cfg_.encoder_scales; ++i)  // coarsest first
      pyr.maps.push_back(taps[blocks_.size() - 1 - i]);
    for (size_t i = 1; i < pyr.maps.size(); ++i)
      RGI_CHECK(pyr.maps[i].dim(1) > pyr.maps[i - 1].dim(1),
                "pyramid must increase in resolution");
    return pyr;
  }

  // v_ij = mean of F_i over pixels with downsized-mask label j.
  // Returns pooled[j][i] (zero vector when absent) and per-region presence.
  std::pair<std::vector<std::vector<Tensor<T>>>, std::vector<uint8_t>>
  region_average_pool(const FeaturePyramid<T>& pyr, const LabelMask& mask) const {
    RGI_CHECK(mask.height == cfg_.image_size && mask.width == cfg_.image_size,
              "region_average_pool: mask size must match config");
    const int C = cfg_.num_categories;
    std::vector<std::vector<Tensor<T>>> pooled(C);
    std::vector<uint8_t> present(C, 0);
    for (const auto& f : pyr.maps) {
      const int res = f.dim(1);
      const LabelMask small = downsample_mask(mask, res);
      std::vector<std::vector<int>> pix(C);
      for (int p = 0; p < res * res; ++p) pix[small.labels[p]].push_back(p);
      for (int j = 0; j < C; ++j) {
        pooled[j].push_back(region_mean(f, pix[j]));
        if (!pix[j].empty()) present[j] = 1;
      }
    }
    return {std::move(pooled), std::move(present)};
  }

  RegionalStyles<T> encode(const Tensor<T>& image, const LabelMask& mask) const {
    auto pyr = extract_pyramid(image);
    auto [pooled, present] = region_average_pool(pyr, mask);
    const int C = cfg_.num_categories, L = cfg_.num_layers(), D = cfg_.style_dim;
    std::vector<Tensor<T>> rows;
    rows.reserve(static_cast<size_t>(C) * L);
    auto zero_code = Tensor<T>::zeros({D});
    for (int j = 0; j < C; ++j) {
      if (!present[j]) {
        for (int l = 0; l < L; ++l) rows.push_back(zero_code);
        continue;
      }
      auto v = concat_flat(pooled[j]);
      for (int l = 0; l < L; ++l) {
        auto h = leaky_relu(heads_[l].fc1(v), T(0.2));
        h = leaky_relu(heads_[l].fc2(h), T(0.2));
        rows.push_back(heads_[l].fc3(h));
      }
    }
    return {reshape(concat_flat(rows), {C, L, D}), present};
  }

  RegionalStyles<T> encode(const Image& img, const LabelMask& mask) const {
    return encode(image_to_tensor<T>(img), mask);
  }

  ParamList<T> parameters(const std::string& prefix = "encoder") const {
    ParamList<T> out;
    stem_.collect(out, prefix + ".stem");
    for (size_t k = 0; k < blocks_.size(); ++k)
      blocks_[k].collect(out, prefix + ".block" + std::to_string(k));
    for (size_t l = 0; l < heads_.size(); ++l) {
      const std::string p = prefix + ".head" + std::to_string(l);
      heads_[l].fc1.collect(out, p + ".fc1");
      heads_[l].fc2.collect(out, p + ".fc2");
      heads_[l].fc3.collect(out, p + ".fc3");
    }
    return out;
  }

 private:
  struct Head {
    LinearLayer<T> fc1, fc2, fc3;
  };
  ModelConfig cfg_;
  ConvLayer<T> stem_;
  std::vector<DownBlock<T>> blocks_;
  std::vector<Head> heads_;
};

}  // namespace rgi
