#include <catch2/catch_amalgamated.hpp>

#include "rgi/encoder.hpp"
#include "test_util.hpp"

using namespace rgi;

namespace {

ModelConfig toy_cfg(int size = 32, int d = 8, int c = 4, int n = 2) {
  ModelConfig cfg;
  cfg.image_size = size;
  cfg.style_dim = d;
  cfg.num_categories = c;
  cfg.encoder_scales = n;
  cfg.base_channels = 4;
  cfg.max_channels = 16;
  return cfg;
}

LabelMask stripes(int size, int c) {
  LabelMask m(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) m.at(y, x) = static_cast<uint8_t>((x * c) / size);
  return m;
}

}  // namespace

TEST_CASE("pyramid shapes and determinism") {
  auto cfg = toy_cfg();
  StyleEncoder<float> enc(cfg, Rng(7));
  Rng rng(3);
  auto img = Tensor<float>::randn({3, 32, 32}, rng, 0.2f, 0.5f);
  auto pyr = enc.extract_pyramid(img);
  REQUIRE(pyr.maps.size() == 2);
  REQUIRE(pyr.maps[0].dim(1) == 2);  // /16, coarsest first
  REQUIRE(pyr.maps[1].dim(1) == 4);  // /8
  auto pyr2 = enc.extract_pyramid(img);
  for (size_t i = 0; i < pyr.maps.size(); ++i)
    REQUIRE(pyr.maps[i].values() == pyr2.maps[i].values());

  REQUIRE_THROWS_AS(enc.extract_pyramid(Tensor<float>::zeros({3, 16, 16})),
                    argument_error);
}

TEST_CASE("single-scale config produces one map at the coarsest scale") {
  auto cfg = toy_cfg(32, 8, 4, 1);
  StyleEncoder<float> enc(cfg, Rng(7));
  auto img = Tensor<float>::zeros({3, 32, 32});
  auto pyr = enc.extract_pyramid(img);
  REQUIRE(pyr.maps.size() == 1);
  REQUIRE(pyr.maps[0].dim(1) == 32 / 8);
}

TEST_CASE("region pooling matches the loop-and-divide oracle") {
  auto cfg = toy_cfg();
  StyleEncoder<double> enc(cfg, Rng(7));
  Rng rng(5);
  auto img = rgitest::randn_d({3, 32, 32}, rng);
  auto pyr = enc.extract_pyramid(img);
  LabelMask mask = stripes(32, 4);
  auto [pooled, present] = enc.region_average_pool(pyr, mask);
  for (int j = 0; j < 4; ++j) REQUIRE(present[j] == 1);

  for (size_t i = 0; i < pyr.maps.size(); ++i) {
    const auto& f = pyr.maps[i];
    const int res = f.dim(1), ch = f.dim(0);
    LabelMask small = downsample_mask(mask, res);
    for (int j = 0; j < 4; ++j) {
      std::vector<double> sum(ch, 0.0);
      int cnt = 0;
      for (int p = 0; p < res * res; ++p)
        if (small.labels[p] == j) {
          ++cnt;
          for (int c = 0; c < ch; ++c) sum[c] += f.data()[c * res * res + p];
        }
      for (int c = 0; c < ch; ++c) {
        const double want = cnt ? sum[c] / cnt : 0.0;
        REQUIRE(pooled[j][i].data()[c] == Catch::Approx(want).margin(1e-12));
      }
    }
  }
}

TEST_CASE("single-region mask pools to the global mean") {
  auto cfg = toy_cfg();
  StyleEncoder<double> enc(cfg, Rng(7));
  Rng rng(6);
  auto img = rgitest::randn_d({3, 32, 32}, rng);
  auto pyr = enc.extract_pyramid(img);
  LabelMask mask(32, 32, 2);
  auto [pooled, present] = enc.region_average_pool(pyr, mask);
  REQUIRE(present == std::vector<uint8_t>{0, 0, 1, 0});
  for (size_t i = 0; i < pyr.maps.size(); ++i) {
    auto g = global_avg_pool(pyr.maps[i]);
    for (int c = 0; c < g.numel(); ++c)
      REQUIRE(pooled[2][i].data()[c] == Catch::Approx(g.data()[c]).margin(1e-12));
    for (int c = 0; c < pooled[0][i].numel(); ++c)
      REQUIRE(pooled[0][i].data()[c] == 0.0);
  }
}

TEST_CASE("encode_styles emits [C,L,D] with absent rows zeroed") {
  auto cfg = toy_cfg();  // L = 2*5-2 = 8
  StyleEncoder<float> enc(cfg, Rng(7));
  Rng rng(8);
  auto img = Tensor<float>::randn({3, 32, 32}, rng, 0.2f, 0.5f);
  LabelMask mask(32, 32, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) mask.at(y, x) = 3;
  auto styles = enc.encode(img, mask);
  REQUIRE(styles.codes.shape() == Shape{4, 8, 8});
  REQUIRE(styles.present == std::vector<uint8_t>{0, 1, 0, 1});
  for (int l = 0; l < 8; ++l)
    for (int d = 0; d < 8; ++d) {
      REQUIRE(styles.codes.data()[(0 * 8 + l) * 8 + d] == 0.f);
      REQUIRE(styles.codes.data()[(2 * 8 + l) * 8 + d] == 0.f);
    }
  // present rows are generically nonzero
  double norm = 0;
  for (int l = 0; l < 8; ++l)
    for (int d = 0; d < 8; ++d) norm += std::abs(styles.codes.data()[(1 * 8 + l) * 8 + d]);
  REQUIRE(norm > 0);
}

TEST_CASE("relabeling categories by a permutation permutes code rows") {
  auto cfg = toy_cfg();
  StyleEncoder<float> enc(cfg, Rng(9));
  Rng rng(10);
  auto img = Tensor<float>::randn({3, 32, 32}, rng, 0.2f, 0.5f);
  LabelMask mask = stripes(32, 4);
  const int perm[4] = {2, 3, 1, 0};
  LabelMask pmask(32, 32);
  for (int i = 0; i < 32 * 32; ++i) pmask.labels[i] = perm[mask.labels[i]];

  auto a = enc.encode(img, mask);
  auto b = enc.encode(img, pmask);
  const int L = 8, D = 8;
  for (int j = 0; j < 4; ++j) {
    REQUIRE(a.present[j] == b.present[perm[j]]);
    for (int l = 0; l < L; ++l)
      for (int d = 0; d < D; ++d)
        REQUIRE(a.codes.data()[(j * L + l) * D + d] ==
                b.codes.data()[(perm[j] * L + l) * D + d]);
  }
}

TEST_CASE("editing inside one region changes only rows whose downsized masks overlap") {
  auto cfg = toy_cfg();
  StyleEncoder<float> enc(cfg, Rng(11));
  Rng rng(12);
  auto base = Tensor<float>::randn({3, 32, 32}, rng, 0.2f, 0.5f);
  LabelMask mask = stripes(32, 4);

  // edit a pixel well inside region 1's stripe (x in [8,16))
  auto edited = base.detach();
  edited.values()[(0 * 32 + 16) * 32 + 12] += 0.6f;

  auto pyr_a = enc.extract_pyramid(base);
  auto pyr_b = enc.extract_pyramid(edited);
  // admissible rows: regions whose downsized masks own a changed feature pixel
  std::vector<uint8_t> admissible(4, 0);
  for (size_t i = 0; i < pyr_a.maps.size(); ++i) {
    const int res = pyr_a.maps[i].dim(1), ch = pyr_a.maps[i].dim(0);
    LabelMask small = downsample_mask(mask, res);
    for (int p = 0; p < res * res; ++p)
      for (int c = 0; c < ch; ++c)
        if (pyr_a.maps[i].data()[c * res * res + p] !=
            pyr_b.maps[i].data()[c * res * res + p]) {
          admissible[small.labels[p]] = 1;
          break;
        }
  }
  auto sa = enc.encode(base, mask);
  auto sb = enc.encode(edited, mask);
  for (int j = 0; j < 4; ++j) {
    bool changed = false;
    for (int i = 0; i < 8 * 8; ++i)
      changed |= sa.codes.data()[j * 64 + i] != sb.codes.data()[j * 64 + i];
    if (changed) REQUIRE(admissible[j] == 1);
  }
}

TEST_CASE("zero parameters propagate zero codes") {
  auto cfg = toy_cfg();
  StyleEncoder<float> enc(cfg, Rng(13));
  for (auto& np : enc.parameters())
    for (auto& v : np.tensor.values()) v = 0.f;
  // encoder normalizes to [-1,1]; mid-gray input hits exactly zero
  auto img = Tensor<float>::full({3, 32, 32}, 0.5f);
  LabelMask mask = stripes(32, 4);
  auto styles = enc.encode(img, mask);
  for (int i = 0; i < styles.codes.numel(); ++i) REQUIRE(styles.codes.data()[i] == 0.f);
}

TEST_CASE("encoder gradient check on a small double model") {
  ModelConfig cfg = toy_cfg(32, 4, 3, 1);
  cfg.base_channels = 3;
  cfg.max_channels = 6;
  StyleEncoder<double> enc(cfg, Rng(15));
  Rng rng(16);
  auto img = rgitest::randn_d({3, 32, 32}, rng, 0.25);
  LabelMask mask = stripes(32, 3);
  auto params = enc.parameters();
  // probe a couple of parameter tensors end to end
  std::vector<Tensor<double>> leaves{params[0].tensor, params.back().tensor};
  const double err = rgitest::grad_check(
      leaves,
      [&] {
        auto styles = enc.encode(img, mask);
        return mean_all(square(styles.codes));
      },
      1e-5);
  REQUIRE(err < 1e-4);
}
