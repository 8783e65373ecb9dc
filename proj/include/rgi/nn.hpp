#pragma once

#include <map>
#include <string>
#include <vector>

#include "rgi/ops.hpp"

namespace rgi {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

// He-normal conv kernel [co, ci, k, k]
template <typename T>
Tensor<T> init_conv_weight(int co, int ci, int k, Rng& rng) {
  const T std = static_cast<T>(std::sqrt(2.0 / (ci * k * k)));
  auto w = Tensor<T>::randn({co, ci, k, k}, rng, std);
  return w.set_requires_grad(true);
}

template <typename T>
Tensor<T> init_linear_weight(int out, int in, Rng& rng) {
  const T std = static_cast<T>(std::sqrt(2.0 / in));
  auto w = Tensor<T>::randn({out, in}, rng, std);
  return w.set_requires_grad(true);
}

template <typename T>
Tensor<T> init_bias(int n, T v = T(0)) {
  return Tensor<T>::full({n}, v).set_requires_grad(true);
}

template <typename T>
struct ConvLayer {
  Tensor<T> w, b;
  int stride = 1, pad = 1;

  ConvLayer() = default;
  ConvLayer(int co, int ci, int k, int stride_, Rng& rng, T bias_init = T(0))
      : w(init_conv_weight<T>(co, ci, k, rng)),
        b(init_bias<T>(co, bias_init)),
        stride(stride_),
        pad(k / 2) {}

  Tensor<T> operator()(const Tensor<T>& x) const {
    return conv2d(x, w, b, stride, pad);
  }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", w});
    out.push_back({prefix + ".bias", b});
  }
};

template <typename T>
struct LinearLayer {
  Tensor<T> w, b;

  LinearLayer() = default;
  LinearLayer(int out, int in, Rng& rng, T bias_init = T(0))
      : w(init_linear_weight<T>(out, in, rng)), b(init_bias<T>(out, bias_init)) {}

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, w, b); }
  void collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", w});
    out.push_back({prefix + ".bias", b});
  }
};

// Residual block with stride-2 downsampling.
template <typename T>
struct DownBlock {
  ConvLayer<T> conv1, conv2, skip;

  DownBlock() = default;
  DownBlock(int ci, int co, Rng& rng)
      : conv1(ci, ci, 3, 1, rng), conv2(co, ci, 3, 2, rng), skip(co, ci, 1, 2, rng) {}

  Tensor<T> operator()(const Tensor<T>& x) const {
    auto y = leaky_relu(conv1(x), T(0.2));
    y = leaky_relu(conv2(y), T(0.2));
    auto s = skip(x);
    return mul_scalar(add(y, s), static_cast<T>(1.0 / std::sqrt(2.0)));
  }
  void collect(ParamList<T>& out, const std::string& p) const {
    conv1.collect(out, p + ".conv1");
    conv2.collect(out, p + ".conv2");
    skip.collect(out, p + ".skip");
  }
};

// Adam with decoupled state per parameter node. Step order is the parameter
// list order, so equal seeds and data give bit-identical trajectories.
template <typename T>
class Adam {
 public:
  Adam(T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }

  void step(const ParamList<T>& params) {
    ++t_;
    const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1_), t_));
    const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2_), t_));
    for (const auto& np : params) {
      auto* node = np.tensor.raw();
      if (!node->requires_grad || node->grad.empty()) continue;
      auto& slot = state_[node];
      if (slot.m.size() != node->value.size()) {
        slot.m.assign(node->value.size(), T(0));
        slot.v.assign(node->value.size(), T(0));
      }
      for (size_t i = 0; i < node->value.size(); ++i) {
        const T g = node->grad[i];
        slot.m[i] = beta1_ * slot.m[i] + (T(1) - beta1_) * g;
        slot.v[i] = beta2_ * slot.v[i] + (T(1) - beta2_) * g * g;
        const T mhat = slot.m[i] / bc1;
        const T vhat = slot.v[i] / bc2;
        node->value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  static void zero_grads(const ParamList<T>& params) {
    for (const auto& np : params) np.tensor.raw()->grad.clear();
  }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  T lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<TensorNode<T>*, Slot> state_;
};

// lr(t) = lr0 * 0.1^(number of milestones <= t)
template <typename T>
T milestone_lr(T lr0, const std::vector<long>& milestones, long step) {
  T lr = lr0;
  for (long m : milestones)
    if (m <= step) lr *= T(0.1);
  return lr;
}

}  // namespace rgi
