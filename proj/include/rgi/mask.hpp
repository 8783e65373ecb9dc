#pragma once

#include <algorithm>
#include <array>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "rgi/core.hpp"

namespace rgi {

// H x W map of facial category ids. Every pixel carries exactly one label in
// [0, num_categories).
struct LabelMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> labels;  // row-major

  LabelMask() = default;
  LabelMask(int h, int w, uint8_t fill = 0)
      : height(h), width(w), labels(static_cast<size_t>(h) * w, fill) {}

  uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
  uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
  int numel() const { return height * width; }

  bool operator==(const LabelMask& o) const {
    return height == o.height && width == o.width && labels == o.labels;
  }

  void validate(int num_categories) const {
    RGI_CHECK(static_cast<int>(labels.size()) == height * width,
              "LabelMask: label buffer does not match dimensions");
    for (uint8_t v : labels)
      if (v >= num_categories)
        throw argument_error("LabelMask: label " + std::to_string(v) +
                             " outside [0," + std::to_string(num_categories) + ")");
  }
};

struct MismatchMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> bits;

  MismatchMask() = default;
  MismatchMask(int h, int w) : height(h), width(w), bits(static_cast<size_t>(h) * w, 0) {}

  bool at(int y, int x) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
  int count() const {
    int c = 0;
    for (uint8_t b : bits) c += (b != 0);
    return c;
  }
  bool empty() const { return count() == 0; }
  bool operator==(const MismatchMask& o) const {
    return height == o.height && width == o.width && bits == o.bits;
  }
};

// The 12-category facial taxonomy plus the role sets used by recomposition,
// swapping and inpainting.
struct CategoryTaxonomy {
  std::vector<std::string> names;
  std::set<int> inner_set;            // facial interior
  std::set<int> exchange_set;         // texture codes taken from the driven face
  std::set<int> stitch_target_first;  // stitched from the target first
  std::set<int> stitch_target_last;   // stitched from the target last, overwriting

  int num_categories() const { return static_cast<int>(names.size()); }

  bool is_inner(int id) const { return inner_set.count(id) != 0; }

  int id_of(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    throw taxonomy_error("unknown category name: " + name);
  }

  void validate() const {
    const int c = num_categories();
    RGI_CHECK(c >= 1, "taxonomy: at least one category required");
    auto check_ids = [c](const std::set<int>& s, const char* what) {
      for (int id : s)
        if (id < 0 || id >= c)
          throw taxonomy_error(std::string("taxonomy: ") + what +
                               " contains out-of-range id " + std::to_string(id));
    };
    check_ids(inner_set, "inner_set");
    check_ids(exchange_set, "exchange_set");
    check_ids(stitch_target_first, "stitch_target_first");
    check_ids(stitch_target_last, "stitch_target_last");
    // stitch steps must cover the complement of the inner set exactly, so a
    // self-swap leaves no unassigned pixels
    for (int id = 0; id < c; ++id) {
      const bool in_steps = inner_set.count(id) || stitch_target_first.count(id) ||
                            stitch_target_last.count(id);
      if (!in_steps)
        throw taxonomy_error("taxonomy: category " + std::to_string(id) +
                             " covered by no stitch step");
    }
    for (int id : stitch_target_first)
      if (inner_set.count(id))
        throw taxonomy_error("taxonomy: stitch sets overlap inner set");
    for (int id : stitch_target_last)
      if (inner_set.count(id))
        throw taxonomy_error("taxonomy: stitch sets overlap inner set");
  }
};

enum : int {
  kBackground = 0,
  kEyebrows = 1,
  kEyes = 2,
  kNose = 3,
  kMouth = 4,
  kLips = 5,
  kFaceSkin = 6,
  kNeck = 7,
  kHair = 8,
  kEars = 9,
  kEyeglass = 10,
  kEarRings = 11,
};

inline CategoryTaxonomy default_taxonomy() {
  CategoryTaxonomy t;
  t.names = {"background", "eyebrows", "eyes",  "nose", "mouth",    "lips",
             "face skin",  "neck",     "hair",  "ears", "eyeglass", "ear rings"};
  t.inner_set = {kEyebrows, kEyes, kNose, kMouth, kLips, kFaceSkin};
  t.exchange_set = {kEyebrows, kEyes, kNose, kMouth, kLips, kFaceSkin, kNeck, kEars};
  t.stitch_target_first = {kNeck, kBackground};
  t.stitch_target_last = {kHair, kEyeglass, kEars, kEarRings};
  return t;
}

// Default 19 -> 12 aggregation for CelebAMask-HQ-style source masks.
// Symmetric component pairs merge; hat/cloth/necklace fall to background.
inline std::vector<uint8_t> default_aggregation_table() {
  return {
      kBackground,  // 0  background
      kFaceSkin,    // 1  skin
      kEyebrows,    // 2  l_brow
      kEyebrows,    // 3  r_brow
      kEyes,        // 4  l_eye
      kEyes,        // 5  r_eye
      kEyeglass,    // 6  eye_g
      kEars,        // 7  l_ear
      kEars,        // 8  r_ear
      kEarRings,    // 9  ear_r
      kNose,        // 10 nose
      kMouth,       // 11 mouth
      kLips,        // 12 u_lip
      kLips,        // 13 l_lip
      kNeck,        // 14 neck
      kBackground,  // 15 neck_l
      kBackground,  // 16 cloth
      kHair,        // 17 hair
      kBackground,  // 18 hat
  };
}

inline LabelMask aggregate_labels(const LabelMask& raw,
                                  const std::vector<uint8_t>& mapping,
                                  int num_categories = 12) {
  LabelMask out(raw.height, raw.width);
  for (size_t i = 0; i < raw.labels.size(); ++i) {
    const uint8_t v = raw.labels[i];
    if (v >= mapping.size())
      throw taxonomy_error("aggregate_labels: raw id " + std::to_string(v) +
                           " has no mapping entry");
    const uint8_t m = mapping[v];
    if (m >= num_categories)
      throw taxonomy_error("aggregate_labels: mapping entry out of range");
    out.labels[i] = m;
  }
  return out;
}

// Nearest-neighbor label downsampling (labels are categorical).
inline LabelMask downsample_mask(const LabelMask& mask, int size) {
  RGI_CHECK(mask.height == mask.width, "downsample_mask: square masks only");
  RGI_CHECK(size >= 1 && mask.height % size == 0 && is_pow2(mask.height / size),
            "downsample_mask: target size must divide by a power of two");
  if (size == mask.height) return mask;
  const int f = mask.height / size;
  LabelMask out(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out.at(y, x) = mask.at(y * f, x * f);
  return out;
}

inline std::vector<uint8_t> region_indicator(const LabelMask& mask, int category) {
  std::vector<uint8_t> out(mask.labels.size());
  for (size_t i = 0; i < mask.labels.size(); ++i)
    out[i] = (mask.labels[i] == category) ? 1 : 0;
  return out;
}

inline std::vector<uint8_t> inner_face_mask(const LabelMask& mask,
                                            const CategoryTaxonomy& tax) {
  std::vector<uint8_t> out(mask.labels.size());
  for (size_t i = 0; i < mask.labels.size(); ++i)
    out[i] = tax.is_inner(mask.labels[i]) ? 1 : 0;
  return out;
}

inline MismatchMask mismatch_mask(const LabelMask& driven, const LabelMask& target,
                                  const CategoryTaxonomy& tax) {
  RGI_CHECK(driven.height == target.height && driven.width == target.width,
            "mismatch_mask: size mismatch");
  MismatchMask out(driven.height, driven.width);
  for (size_t i = 0; i < driven.labels.size(); ++i)
    out.bits[i] =
        (!tax.is_inner(driven.labels[i]) && tax.is_inner(target.labels[i])) ? 1 : 0;
  return out;
}

inline double mismatch_area_ratio(const MismatchMask& m) {
  if (m.bits.empty()) return 0.0;
  return static_cast<double>(m.count()) / static_cast<double>(m.bits.size());
}

// Stitch a swap mask from driven and target, then fill the remaining
// (mismatched) pixels with the nearest assigned non-inner label.
// Fill is a layered multi-source BFS over 4-neighborhoods; equal-distance
// ties go to the smaller category id.
inline std::pair<LabelMask, MismatchMask> recompose_swap_mask(
    const LabelMask& driven, const LabelMask& target, const CategoryTaxonomy& tax) {
  RGI_CHECK(driven.height == target.height && driven.width == target.width,
            "recompose_swap_mask: size mismatch");
  const int h = driven.height, w = driven.width;
  constexpr int kUnassigned = -1;
  std::vector<int> canvas(static_cast<size_t>(h) * w, kUnassigned);

  for (int i = 0; i < h * w; ++i)
    if (tax.stitch_target_first.count(target.labels[i]))
      canvas[i] = target.labels[i];
  for (int i = 0; i < h * w; ++i)
    if (tax.is_inner(driven.labels[i])) canvas[i] = driven.labels[i];
  for (int i = 0; i < h * w; ++i)
    if (tax.stitch_target_last.count(target.labels[i]))
      canvas[i] = target.labels[i];

  MismatchMask mism(h, w);
  for (int i = 0; i < h * w; ++i)
    if (canvas[i] == kUnassigned) mism.bits[i] = 1;

  // seed BFS with assigned non-inner pixels
  std::vector<int> frontier;
  std::vector<int> dist(static_cast<size_t>(h) * w, -1);
  std::vector<int> fill(static_cast<size_t>(h) * w, -1);
  for (int i = 0; i < h * w; ++i)
    if (canvas[i] != kUnassigned && !tax.is_inner(canvas[i])) {
      frontier.push_back(i);
      dist[i] = 0;
      fill[i] = canvas[i];
    }
  const int dy[4] = {-1, 1, 0, 0};
  const int dx[4] = {0, 0, -1, 1};
  int level = 0;
  while (!frontier.empty()) {
    std::vector<int> next;
    for (int i : frontier) {
      const int y = i / w, x = i % w;
      for (int d = 0; d < 4; ++d) {
        const int ny = y + dy[d], nx = x + dx[d];
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const int ni = ny * w + nx;
        if (canvas[ni] != kUnassigned) continue;
        if (dist[ni] == -1) {
          dist[ni] = level + 1;
          fill[ni] = fill[i];
          next.push_back(ni);
        } else if (dist[ni] == level + 1 && fill[i] < fill[ni]) {
          fill[ni] = fill[i];
        }
      }
    }
    frontier = std::move(next);
    ++level;
  }

  LabelMask out(h, w);
  for (int i = 0; i < h * w; ++i) {
    if (canvas[i] != kUnassigned)
      out.labels[i] = static_cast<uint8_t>(canvas[i]);
    else if (fill[i] != -1)
      out.labels[i] = static_cast<uint8_t>(fill[i]);
    else
      out.labels[i] = kBackground;  // degenerate input: no non-inner source at all
  }
  return {out, mism};
}

namespace detail {

// Manhattan distance transform to the nearest set pixel (BFS).
inline std::vector<int> l1_distance_to(const std::vector<uint8_t>& set, int h, int w) {
  std::vector<int> dist(static_cast<size_t>(h) * w, -1);
  std::queue<int> q;
  for (int i = 0; i < h * w; ++i)
    if (set[i]) {
      dist[i] = 0;
      q.push(i);
    }
  const int dy[4] = {-1, 1, 0, 0};
  const int dx[4] = {0, 0, -1, 1};
  while (!q.empty()) {
    const int i = q.front();
    q.pop();
    const int y = i / w, x = i % w;
    for (int d = 0; d < 4; ++d) {
      const int ny = y + dy[d], nx = x + dx[d];
      if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
      const int ni = ny * w + nx;
      if (dist[ni] == -1) {
        dist[ni] = dist[i] + 1;
        q.push(ni);
      }
    }
  }
  return dist;
}

}  // namespace detail

struct MismatchBandParams {
  int band_width = 4;   // Manhattan radius around the inner-face boundary
  int blob_count = 6;   // sectors the band is split into
  double keep_prob = 0.5;
};

// Random mask in a band around the inner-face contour: the band is
// dilate(inner) minus erode(inner) at the given radius, partitioned into
// blob_count BFS sectors of which each is kept with keep_prob.
inline MismatchMask random_mismatch_mask(const LabelMask& mask,
                                         const CategoryTaxonomy& tax, uint64_t seed,
                                         const MismatchBandParams& params) {
  const int h = mask.height, w = mask.width;
  const auto inner = inner_face_mask(mask, tax);
  bool any_inner = false;
  for (uint8_t b : inner) any_inner |= (b != 0);
  if (!any_inner)
    throw precondition_error("random_mismatch_mask: mask has no inner-face pixels");

  MismatchMask out(h, w);
  if (params.band_width <= 0) return out;

  std::vector<uint8_t> outer(inner.size());
  for (size_t i = 0; i < inner.size(); ++i) outer[i] = inner[i] ? 0 : 1;
  const auto d_in = detail::l1_distance_to(inner, h, w);
  const auto d_out = detail::l1_distance_to(outer, h, w);

  std::vector<int> band;
  for (int i = 0; i < h * w; ++i) {
    const bool dilated = d_in[i] <= params.band_width;   // within w of inner
    const bool eroded = d_out[i] > params.band_width;    // deeper than w inside
    if (dilated && !eroded) band.push_back(i);
  }
  if (band.empty()) return out;

  Rng rng(seed);
  const int blobs = std::max(1, params.blob_count);
  // multi-source BFS assigns every band pixel to the nearest of `blobs` seeds
  std::vector<int> owner(static_cast<size_t>(h) * w, -1);
  std::queue<int> q;
  for (int b = 0; b < blobs; ++b) {
    const int pick = band[rng.uniform_int(static_cast<int>(band.size()))];
    if (owner[pick] == -1) {
      owner[pick] = b;
      q.push(pick);
    }
  }
  std::vector<uint8_t> in_band(static_cast<size_t>(h) * w, 0);
  for (int i : band) in_band[i] = 1;
  const int dy[4] = {-1, 1, 0, 0};
  const int dx[4] = {0, 0, -1, 1};
  while (!q.empty()) {
    const int i = q.front();
    q.pop();
    const int y = i / w, x = i % w;
    for (int d = 0; d < 4; ++d) {
      const int ny = y + dy[d], nx = x + dx[d];
      if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
      const int ni = ny * w + nx;
      if (!in_band[ni] || owner[ni] != -1) continue;
      owner[ni] = owner[i];
      q.push(ni);
    }
  }
  std::vector<uint8_t> keep(blobs);
  for (int b = 0; b < blobs; ++b) keep[b] = rng.bernoulli(params.keep_prob) ? 1 : 0;
  for (int i : band)
    if (owner[i] >= 0 && keep[owner[i]]) out.bits[i] = 1;
  return out;
}

}  // namespace rgi
