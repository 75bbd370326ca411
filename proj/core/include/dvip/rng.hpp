#pragma once

#include <cstdint>

#include "dvip/mathutil.hpp"
#include "dvip/tensor.hpp"

namespace dvip::rng {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stateless counter-based generator. A stream is a 64-bit key built by
// folding in integers (seed, pass, layer, unit, point id, ...); any draw is a
// pure function of (key, counter), so the same logical draw can be replayed
// from anywhere without carrying generator state around.
class Key {
 public:
  Key() : state_(0) {}
  explicit Key(std::uint64_t seed) : state_(mix64(seed)) {}

  Key fold(std::uint64_t v) const {
    Key k;
    k.state_ = mix64(state_ ^ mix64(v));
    return k;
  }

  std::uint64_t bits(std::uint64_t counter) const {
    return mix64(state_ ^ mix64(counter ^ 0x5851f42d4c957f2dULL));
  }

  // Uniform on the open interval (0,1).
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1p-53;
  }

  double normal(std::uint64_t counter) const {
    return norm_quantile(uniform(counter));
  }

  Tensor normal_tensor(Shape shape) const {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = normal(i);
    return t;
  }

  Tensor uniform_tensor(Shape shape) const {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = uniform(i);
    return t;
  }

  std::uint64_t raw() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace dvip::rng
