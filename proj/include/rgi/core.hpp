#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rgi {

struct argument_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct taxonomy_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct precondition_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct checksum_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define RGI_CHECK(cond, msg)                  \
  do {                                        \
    if (!(cond)) throw ::rgi::argument_error(msg); \
  } while (0)

using Shape = std::vector<int>;

inline int numel_of(const Shape& s) {
  int n = 1;
  for (int d : s) n *= d;
  return n;
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline int ilog2(int v) {
  int k = 0;
  while ((1 << k) < v) ++k;
  return k;
}

inline bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Deterministic PRNG (splitmix64 core). All randomness in the library flows
// through this so that equal seeds give bit-identical runs on one machine.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  int uniform_int(int n) {
    return n <= 0 ? 0 : static_cast<int>(next_u64() % static_cast<uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal via Box-Muller with a cached spare
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Derive an independent child stream; advances this stream once.
  Rng fork(uint64_t tag) {
    uint64_t s = next_u64();
    return Rng(s ^ (tag * 0xd6e8feb86659fd93ULL + 0x2545f4914f6cdd1dULL));
  }

 private:
  uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rgi
