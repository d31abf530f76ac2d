#pragma once

#include <array>
#include <optional>
#include <string>

#include "ridekit/image.hpp"

namespace ridekit::dga {

inline constexpr int kDefaultWindow = 7;
inline constexpr double kVarianceFloor = 1e-8;

/// Zero mean, unit variance per channel over the whole grid. Channels whose
/// variance falls below kVarianceFloor are divided by sqrt(kVarianceFloor).
ImageGrid feature_normalize(const ImageGrid& f);

/// Single-channel map of the windowed vector variance of `f`.
ImageGrid local_contrast(const ImageGrid& f, int k = kDefaultWindow);

/// Elementwise ReLU(d_comp - d_I).
ImageGrid relu_gap(const ImageGrid& d_comp, const ImageGrid& d_I);

struct GapPair {
  ImageGrid delta_L;
  ImageGrid delta_R;
};

GapPair gap_maps(const ImageGrid& d_I, const ImageGrid& d_L, const ImageGrid& d_R);

/// Externally supplied 3 -> 1 channel convolution pair applied as
/// conv3x3(conv1x1(x) + bias1) + bias3.
struct ConvKernel {
  std::array<double, 3> conv1x1{};
  double bias1 = 0.0;
  std::array<double, 9> conv3x3{};  // row-major, centre at index 4
  double bias3 = 0.0;
};

/// Parses {"conv1x1": {"weights": [3], "bias": b}, "conv3x3": {"weights": [9], "bias": b}}.
/// Throws ParameterError on malformed content.
ConvKernel parse_kernel(const std::string& json_text);
/// Throws IoError when the file cannot be read.
ConvKernel load_kernel(const std::string& path);

struct AlphaParams {
  std::array<double, 3> w = {4.0, 0.0, 0.0};  // weights on (delta, d_comp, d_I)
  double b = -4.0;
  bool blur = true;  // 3x3 box smoothing of the affine response
  std::optional<ConvKernel> kernel;  // replaces w, b and blur when present
};

/// alpha = sigmoid(box3(w1 delta + w2 d_comp + w3 d_I + b)), single channel.
ImageGrid attention_weights(const ImageGrid& delta, const ImageGrid& d_comp, const ImageGrid& d_I,
                            const AlphaParams& params = {});

/// F_I + alpha_R F_R + alpha_L F_L with single-channel alphas broadcast.
ImageGrid fuse(const ImageGrid& F_I, const ImageGrid& F_L, const ImageGrid& F_R, const ImageGrid& alpha_L,
               const ImageGrid& alpha_R);

struct GapMaps {
  ImageGrid d_I;
  ImageGrid d_L;
  ImageGrid d_R;
  ImageGrid delta_L;
  ImageGrid delta_R;
  ImageGrid alpha_L;
  ImageGrid alpha_R;
};

struct GapConfig {
  int window = kDefaultWindow;
  AlphaParams alpha;
};

/// Normalizes the three views, lifting single-channel ones to the widest
/// channel count, then computes contrast, gap and attention maps.
GapMaps compute_gap_maps(const ImageGrid& view_I, const ImageGrid& view_L, const ImageGrid& view_R,
                         const GapConfig& cfg = {});

}  // namespace ridekit::dga
