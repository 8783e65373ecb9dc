#pragma once

#include <vector>

#include "rgi/mask.hpp"
#include "rgi/tensor.hpp"

namespace rgi {

// Planar float RGB image, values nominally in [0,1], layout [3,H,W].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, float fill = 0.f)
      : height(h), width(w), data(static_cast<size_t>(3) * h * w, fill) {}

  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  int pixels() const { return height * width; }
  bool operator==(const Image& o) const {
    return height == o.height && width == o.width && data == o.data;
  }
};

inline Image to_grayscale(const Image& img) {
  // BT.601 luma, replicated to all three channels
  Image out(img.height, img.width);
  const int hw = img.pixels();
  for (int i = 0; i < hw; ++i) {
    const float y = 0.299f * img.data[i] + 0.587f * img.data[hw + i] +
                    0.114f * img.data[2 * hw + i];
    out.data[i] = y;
    out.data[hw + i] = y;
    out.data[2 * hw + i] = y;
  }
  return out;
}

inline Image hflip(const Image& img) {
  Image out(img.height, img.width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

inline LabelMask hflip(const LabelMask& m) {
  LabelMask out(m.height, m.width);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) out.at(y, x) = m.at(y, m.width - 1 - x);
  return out;
}

inline Image clamp01(const Image& img) {
  Image out = img;
  for (auto& v : out.data) v = std::min(1.f, std::max(0.f, v));
  return out;
}

// Box-filter downsample by a power-of-two factor.
inline Image downsample_image(const Image& img, int size) {
  RGI_CHECK(img.height == img.width && img.height % size == 0 &&
                is_pow2(img.height / size),
            "downsample_image: power-of-two ratio required");
  const int f = img.height / size;
  Image out(size, size);
  const float inv = 1.f / static_cast<float>(f * f);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        float s = 0.f;
        for (int dy = 0; dy < f; ++dy)
          for (int dx = 0; dx < f; ++dx) s += img.at(c, y * f + dy, x * f + dx);
        out.at(c, y, x) = s * inv;
      }
  return out;
}

template <typename T>
Tensor<T> image_to_tensor(const Image& img) {
  std::vector<T> v(img.data.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(img.data[i]);
  return Tensor<T>::from({3, img.height, img.width}, std::move(v));
}

template <typename T>
Image tensor_to_image(const Tensor<T>& t) {
  RGI_CHECK(t.ndim() == 3 && t.dim(0) == 3, "tensor_to_image: [3,H,W] required");
  Image out(t.dim(1), t.dim(2));
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<float>(t.data()[i]);
  return out;
}

inline double image_rmse(const Image& a, const Image& b) {
  RGI_CHECK(a.height == b.height && a.width == b.width, "image_rmse: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.data.size()));
}

// RMSE restricted to pixels where the bit mask is set (over all 3 channels).
inline double masked_rmse(const Image& a, const Image& b,
                          const std::vector<uint8_t>& bits) {
  const int hw = a.pixels();
  double s = 0.0;
  long n = 0;
  for (int i = 0; i < hw; ++i) {
    if (!bits[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d =
          static_cast<double>(a.data[c * hw + i]) - b.data[c * hw + i];
      s += d * d;
      ++n;
    }
  }
  return n == 0 ? 0.0 : std::sqrt(s / static_cast<double>(n));
}

}  // namespace rgi
