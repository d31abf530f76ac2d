#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ridekit/image.hpp"

namespace ridekit::testing {

inline ImageGrid random_grid(std::mt19937_64& rng, int h, int w, int c, Domain d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(h) * w * c);
  for (double& x : v) x = u(rng);
  return ImageGrid(h, w, c, d, std::move(v));
}

inline BinaryMask random_mask(std::mt19937_64& rng, int h, int w, double p_fg = 0.5) {
  std::bernoulli_distribution b(p_fg);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = b(rng) ? 1 : 0;
  return BinaryMask(h, w, std::move(v));
}

/// Left `split` columns background, the rest foreground.
inline BinaryMask column_split(int h, int w, int split) {
  BinaryMask m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = split; x < w; ++x) m.set(y, x, true);
  return m;
}

inline double max_abs_diff(const ImageGrid& a, const ImageGrid& b) {
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
  return m;
}

}  // namespace ridekit::testing
