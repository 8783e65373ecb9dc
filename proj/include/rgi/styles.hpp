#pragma once

#include "rgi/ops.hpp"

namespace rgi {

// Per-region, per-layer style codes: a [C, L, D] tensor plus presence flags.
// Rows for regions absent from the source mask are all-zero and flagged.
template <typename T>
struct RegionalStyles {
  Tensor<T> codes;               // [C, L, D]
  std::vector<uint8_t> present;  // C entries

  int categories() const { return codes.dim(0); }
  int layers() const { return codes.dim(1); }
  int style_dim() const { return codes.dim(2); }

  Tensor<T> code_at(int region, int layer) const {
    const int d = style_dim();
    return slice_flat(codes, (region * layers() + layer) * d, d);
  }

  static RegionalStyles zeros(int c, int l, int d) {
    return {Tensor<T>::zeros({c, l, d}), std::vector<uint8_t>(c, 0)};
  }

  RegionalStyles detached() const {
    return {codes.detach(), present};
  }
};

}  // namespace rgi
