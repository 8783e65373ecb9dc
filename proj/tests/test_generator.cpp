#include <catch2/catch_amalgamated.hpp>

#include "rgi/generator.hpp"
#include "rgi/losses.hpp"
#include "test_util.hpp"

using namespace rgi;

namespace {

ModelConfig gen_cfg(int size, int c, int d, int k = 0) {
  ModelConfig cfg;
  cfg.image_size = size;
  cfg.style_dim = d;
  cfg.num_categories = c;
  cfg.masked_layers = k;
  cfg.base_channels = 4;
  cfg.max_channels = 8;
  return cfg;
}

template <typename T>
RegionalStyles<T> random_styles(const ModelConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  RegionalStyles<T> s{
      Tensor<T>::randn({cfg.num_categories, cfg.num_layers(), cfg.style_dim}, rng,
                       T(0.7)),
      std::vector<uint8_t>(cfg.num_categories, 1)};
  return s;
}

LabelMask random_mask(int size, int c, uint64_t seed) {
  Rng rng(seed);
  LabelMask m(size, size);
  for (auto& v : m.labels) v = static_cast<uint8_t>(rng.uniform_int(c));
  return m;
}

}  // namespace

TEST_CASE("layer slots cover 2*log2(S)-2 styles") {
  auto cfg = gen_cfg(64, 3, 8);
  REQUIRE(cfg.num_layers() == 10);
  REQUIRE(cfg.effective_masked_layers() == 5);
  MaskedGenerator<float> g(cfg, Rng(1));
  REQUIRE(g.num_conv_slots() == 9);            // slots 0..8
  REQUIRE(g.conv_resolution(0) == 4);
  REQUIRE(g.conv_resolution(1) == 8);
  REQUIRE(g.conv_resolution(2) == 8);
  REQUIRE(g.conv_resolution(8) == 64);
  REQUIRE(g.torgb_slot(4) == 9);               // final toRGB is the last slot
}

TEST_CASE("zero noise policy makes synthesis bit-deterministic") {
  auto cfg = gen_cfg(32, 3, 8);
  MaskedGenerator<float> g(cfg, Rng(2));
  auto styles = random_styles<float>(cfg, 3);
  auto mask = random_mask(32, 3, 4);
  auto a = g.synthesize_t(styles, mask);
  auto b = g.synthesize_t(styles, mask);
  REQUIRE(a.values() == b.values());
}

TEST_CASE("noise policies: frozen reproducible, fresh seeds differ") {
  auto cfg = gen_cfg(32, 2, 8);
  MaskedGenerator<float> g(cfg, Rng(5));
  auto styles = random_styles<float>(cfg, 6);
  auto mask = random_mask(32, 2, 7);

  auto f1 = g.make_frozen_noise(7);
  auto f2 = g.make_frozen_noise(7);
  REQUIRE(f1.buffers == f2.buffers);

  g.set_noise(f1);
  auto a = g.synthesize_t(styles, mask);
  auto b = g.synthesize_t(styles, mask);
  REQUIRE(a.values() == b.values());

  // noise gains start at zero; give the toy model random nonzero gains so the
  // noise pathway is active
  Rng gr(99);
  for (auto& np : g.parameters())
    if (np.name.find("noise_gain") != std::string::npos)
      np.tensor.values()[0] = static_cast<float>(gr.normal());
  g.set_noise(NoisePolicy<float>::fresh(3));
  auto c = g.synthesize_t(styles, mask);
  auto c2 = g.synthesize_t(styles, mask);
  REQUIRE(c.values() == c2.values());  // fresh policy is deterministic per seed
  g.set_noise(NoisePolicy<float>::fresh(4));
  auto d = g.synthesize_t(styles, mask);
  REQUIRE(c.values() != d.values());

  // frozen buffers with wrong shapes are rejected
  auto bad = f2;
  bad.buffers[1].pop_back();
  REQUIRE_THROWS_AS(g.set_noise(bad), argument_error);
}

TEST_CASE("regional locality: perturbing s_kl is confined to pixels labeled k") {
  auto cfg = gen_cfg(16, 3, 8, 4);  // L=6, K=4
  MaskedGenerator<float> g(cfg, Rng(8));
  auto mask = random_mask(16, 3, 9);
  auto styles = random_styles<float>(cfg, 10);
  const int L = cfg.num_layers(), D = cfg.style_dim;

  for (int slot = 0; slot < cfg.effective_masked_layers(); ++slot) {
    const int res = g.conv_resolution(slot);
    Rng rng(11 + slot);
    auto f_prev = Tensor<float>::randn({cfg.channels_at(slot == 0 ? 4 : res / 1), res, res},
                                       rng, 1.f);
    // channel count of the slot input
    const int ci = slot == 0 ? cfg.channels_at(4)
                             : (slot % 2 == 1 ? cfg.channels_at(res / 2)
                                              : cfg.channels_at(res));
    f_prev = Tensor<float>::randn({ci, res, res}, rng, 1.f);
    auto base = g.mask_guided_layer(slot, f_prev, styles, mask);
    const LabelMask small = downsample_mask(mask, res);
    for (int k = 0; k < cfg.num_categories; ++k) {
      auto bumped = styles;
      bumped.codes = styles.codes.detach();
      bumped.codes.values()[(k * L + slot) * D + 2] += 0.75f;
      auto out = g.mask_guided_layer(slot, f_prev, bumped, mask);
      const int hw = res * res;
      for (int c = 0; c < base.dim(0); ++c)
        for (int p = 0; p < hw; ++p) {
          if (small.labels[p] != k) {
            REQUIRE(out.data()[c * hw + p] == base.data()[c * hw + p]);
          }
        }
    }
  }
}

TEST_CASE("demodulated filters have unit norm across random styles") {
  auto cfg = gen_cfg(32, 2, 8);
  MaskedGenerator<double> g(cfg, Rng(12));
  Rng rng(13);
  // exercise the exact path the generator uses: affine then modulate
  auto params = g.parameters();
  const Tensor<double>* w = nullptr;
  const Tensor<double>* aw = nullptr;
  const Tensor<double>* ab = nullptr;
  for (auto& np : params) {
    if (np.name == "generator.conv2.weight") w = &np.tensor;
    if (np.name == "generator.conv2.affine.weight") aw = &np.tensor;
    if (np.name == "generator.conv2.affine.bias") ab = &np.tensor;
  }
  REQUIRE(w != nullptr);
  for (int trial = 0; trial < 100; ++trial) {
    auto style = rgitest::randn_d({8}, rng);
    auto scales = linear(style, *aw, *ab);
    auto wm = modulate(*w, scales, true);
    const int co = wm.dim(0), rest = wm.numel() / co;
    for (int o = 0; o < co; ++o) {
      double n2 = 0;
      for (int i = 0; i < rest; ++i) {
        const double v = wm.data()[o * rest + i];
        n2 += v * v;
      }
      REQUIRE(std::sqrt(n2) == Catch::Approx(1.0).margin(1e-3));
    }
  }
}

TEST_CASE("C=1 reduction: mask-guided forward equals the global route") {
  auto cfg = gen_cfg(32, 1, 8, 4);
  MaskedGenerator<float> g(cfg, Rng(14));
  auto styles = random_styles<float>(cfg, 15);
  LabelMask mask(32, 32, 0);
  auto masked = g.synthesize_t(styles, mask);
  auto row = reshape(styles.codes, {cfg.num_layers(), cfg.style_dim});
  auto global = g.synthesize_global_t(row);
  float worst = 0.f;
  for (int i = 0; i < masked.numel(); ++i)
    worst = std::max(worst, std::abs(masked.data()[i] - global.data()[i]));
  REQUIRE(worst < 1e-5f);
}

TEST_CASE("K = L makes every layer consume the mask") {
  auto cfg = gen_cfg(16, 2, 8, 6);  // L = 6 = K
  REQUIRE(cfg.effective_masked_layers() == cfg.num_layers());
  MaskedGenerator<float> g(cfg, Rng(16));
  auto styles = random_styles<float>(cfg, 17);
  auto mask = random_mask(16, 2, 18);
  auto img = g.synthesize_t(styles, mask);
  REQUIRE(img.shape() == Shape{3, 16, 16});
  for (int i = 0; i < img.numel(); ++i) REQUIRE(std::isfinite(img.data()[i]));
}

TEST_CASE("constant mask of category j depends only on row j of styles") {
  auto cfg = gen_cfg(16, 3, 8, 3);
  MaskedGenerator<float> g(cfg, Rng(19));
  auto styles = random_styles<float>(cfg, 20);
  LabelMask mask(16, 16, 1);
  auto base = g.synthesize_t(styles, mask);
  auto bumped = styles;
  bumped.codes = styles.codes.detach();
  // perturb rows 0 and 2 everywhere
  const int L = cfg.num_layers(), D = cfg.style_dim;
  for (int l = 0; l < L; ++l)
    for (int d = 0; d < D; ++d) {
      bumped.codes.values()[(0 * L + l) * D + d] += 1.3f;
      bumped.codes.values()[(2 * L + l) * D + d] -= 0.9f;
    }
  auto out = g.synthesize_t(bumped, mask);
  REQUIRE(out.values() == base.values());
}

TEST_CASE("absent regions fall back to the learned default codes") {
  auto cfg = gen_cfg(16, 2, 8, 3);
  MaskedGenerator<float> g(cfg, Rng(21));
  auto mask = random_mask(16, 2, 22);

  // region 1 absent from styles: output must match styles whose row 1 equals
  // the generator defaults
  RegionalStyles<float> partial = random_styles<float>(cfg, 23);
  partial.present = {1, 0};
  auto out_a = g.synthesize_t(partial, mask);

  RegionalStyles<float> patched = partial;
  patched.codes = partial.codes.detach();
  patched.present = {1, 1};
  const int L = cfg.num_layers(), D = cfg.style_dim;
  const auto& defaults = g.default_codes();
  for (int l = 0; l < L; ++l)
    for (int d = 0; d < D; ++d)
      patched.codes.values()[(1 * L + l) * D + d] =
          defaults.data()[(1 * L + l) * D + d];
  auto out_b = g.synthesize_t(patched, mask);
  REQUIRE(out_a.values() == out_b.values());
}

TEST_CASE("style-code gradients through synthesize + total loss match FD") {
  auto cfg = gen_cfg(16, 2, 6, 3);
  cfg.base_channels = 3;
  cfg.max_channels = 6;
  MaskedGenerator<double> g(cfg, Rng(24));
  Discriminator<double> d(cfg, Rng(25));
  LossBackends<double> backends;
  auto mask = random_mask(16, 2, 26);
  Rng rng(27);
  auto input = Tensor<double>::randn({3, 16, 16}, rng, 0.2, 0.5);
  auto codes = rgitest::randn_d({2, cfg.num_layers(), 6}, rng, 0.5);
  LossWeights w;
  const std::vector<int> scales{8, 16};

  const double err = rgitest::grad_check(
      {codes},
      [&] {
        RegionalStyles<double> s{codes, {1, 1}};
        auto recon = g.synthesize_t(s, mask);
        auto fake = d(recon);
        return loss_rgi_total(recon, input, w, backends, scales, fake).total;
      },
      1e-5);
  REQUIRE(err < 1e-4);
}

TEST_CASE("discriminator emits a finite scalar logit and gradients flow") {
  auto cfg = gen_cfg(32, 2, 8);
  Discriminator<double> d(cfg, Rng(28));
  Rng rng(29);
  auto img = rgitest::randn_d({3, 32, 32}, rng, 0.25);
  auto logit = d(img);
  REQUIRE(logit.numel() == 1);
  REQUIRE(std::isfinite(logit.item()));
  REQUIRE(rgitest::grad_check({img}, [&] { return d(img); }) < 1e-4);
}
