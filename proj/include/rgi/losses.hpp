#pragma once

#include "rgi/config.hpp"
#include "rgi/image.hpp"
#include "rgi/nn.hpp"

namespace rgi {

// Fixed random-weight CNN standing in for the pretrained perceptual, identity
// and parsing feature extractors. Five stride-2 stages; weights are seeded
// constants and never trained, so the losses stay well-defined and
// differentiable without shipping external models. A real extractor can be
// substituted by loading its weights over these parameters.
template <typename T>
class PerceptualBackend {
 public:
  static constexpr int kStages = 5;

  explicit PerceptualBackend(uint64_t seed) {
    Rng rng(seed);
    const int ch[kStages + 1] = {3, 16, 24, 32, 40, 48};
    for (int i = 0; i < kStages; ++i) {
      stages_.emplace_back(ch[i + 1], ch[i], 3, 2, rng);
      stages_.back().w.set_requires_grad(false);
      stages_.back().b.set_requires_grad(false);
    }
  }

  // feature maps of all five stages for an image in [0,1]
  std::vector<Tensor<T>> features(const Tensor<T>& image) const {
    std::vector<Tensor<T>> out;
    auto x = add_scalar(mul_scalar(image, T(2)), T(-1));
    for (const auto& s : stages_) {
      x = leaky_relu(s(x), T(0.2));
      out.push_back(x);
    }
    return out;
  }

 private:
  std::vector<ConvLayer<T>> stages_;
};

// The three fixed feature extractors used by the reconstruction losses.
template <typename T>
struct LossBackends {
  PerceptualBackend<T> lpips;    // perceptual role
  PerceptualBackend<T> id;       // identity role
  PerceptualBackend<T> parsing;  // parsing role

  LossBackends()
      : lpips(0x11c0ffee01ULL), id(0x11c0ffee02ULL), parsing(0x11c0ffee03ULL) {}
};

template <typename T>
Tensor<T> loss_mse(const Tensor<T>& recon, const Tensor<T>& input) {
  RGI_CHECK(recon.shape() == input.shape(), "loss_mse: shape mismatch");
  return mse_loss(recon, input);
}

// Sum over scales of the squared feature distance between the downsized pair.
template <typename T>
Tensor<T> loss_ms_lpips(const Tensor<T>& recon, const Tensor<T>& input,
                        const PerceptualBackend<T>& backend,
                        const std::vector<int>& scales) {
  RGI_CHECK(recon.shape() == input.shape(), "loss_ms_lpips: shape mismatch");
  Tensor<T> total = Tensor<T>::zeros({1});
  for (int s : scales) {
    const int sz = std::min(s, recon.dim(1));
    auto fa = backend.features(downsample_to(recon, sz));
    auto fb = backend.features(downsample_to(input, sz));
    for (size_t i = 0; i < fa.size(); ++i)
      total = add(total, mse_loss(fa[i], fb[i]));
  }
  return total;
}

// sum_{i=1..5} (1 - cos(R_i(input), R_i(recon)))
template <typename T>
Tensor<T> loss_ms_id(const Tensor<T>& recon, const Tensor<T>& input,
                     const PerceptualBackend<T>& backend) {
  RGI_CHECK(recon.shape() == input.shape(), "loss_ms_id: shape mismatch");
  auto fa = backend.features(input);
  auto fb = backend.features(recon);
  Tensor<T> total = Tensor<T>::zeros({1});
  for (size_t i = 0; i < fa.size(); ++i) {
    auto cos = cosine_similarity(fa[i], fb[i], T(1e-8));
    total = add(total, add_scalar(mul_scalar(cos, T(-1)), T(1)));
  }
  return total;
}

template <typename T>
Tensor<T> loss_ms_parsing(const Tensor<T>& recon, const Tensor<T>& input,
                          const PerceptualBackend<T>& backend) {
  return loss_ms_id(recon, input, backend);
}

enum class GanSide { kGenerator, kDiscriminator };

// Non-saturating logistic GAN loss on raw logits.
template <typename T>
Tensor<T> loss_adversarial(const Tensor<T>& d_real_logits,
                           const Tensor<T>& d_fake_logits, GanSide side) {
  if (side == GanSide::kDiscriminator) {
    auto fake = softplus_mean(d_fake_logits);
    auto real = softplus_mean(mul_scalar(d_real_logits, T(-1)));
    return add(fake, real);
  }
  return softplus_mean(mul_scalar(d_fake_logits, T(-1)));
}

template <typename T>
struct RgiLossBreakdown {
  Tensor<T> mse, lpips, id, parsing, adv, total;

  double term_sum(const LossWeights& w) const {
    double s = mse.item() + w.lambda_lpips * lpips.item() + w.lambda_id * id.item() +
               w.lambda_parsing * parsing.item();
    if (adv.defined()) s += w.lambda_adv * adv.item();
    return s;
  }
};

// Weighted reconstruction loss plus the optional generator-side adversarial
// term; per-term values are reported alongside the total.
template <typename T>
RgiLossBreakdown<T> loss_rgi_total(const Tensor<T>& recon, const Tensor<T>& input,
                                   const LossWeights& w,
                                   const LossBackends<T>& backends,
                                   const std::vector<int>& scales,
                                   const Tensor<T>& d_fake_logits = Tensor<T>()) {
  RgiLossBreakdown<T> out;
  out.mse = loss_mse(recon, input);
  out.lpips = loss_ms_lpips(recon, input, backends.lpips, scales);
  out.id = loss_ms_id(recon, input, backends.id);
  out.parsing = loss_ms_parsing(recon, input, backends.parsing);
  out.total = out.mse;
  out.total = add_scaled(out.total, out.lpips, static_cast<T>(w.lambda_lpips));
  out.total = add_scaled(out.total, out.id, static_cast<T>(w.lambda_id));
  out.total = add_scaled(out.total, out.parsing, static_cast<T>(w.lambda_parsing));
  if (d_fake_logits.defined()) {
    out.adv = loss_adversarial(Tensor<T>(), d_fake_logits, GanSide::kGenerator);
    out.total = add_scaled(out.total, out.adv, static_cast<T>(w.lambda_adv));
  }
  return out;
}

}  // namespace rgi
