#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "ridekit/image.hpp"

namespace ridekit::retinex {

/// Weights of the four Retinex-aware loss terms. Every term is a per-pixel
/// mean; L1 terms are Charbonnier-smoothed, sqrt(x^2 + eps^2) - eps.
/// The exclusivity term is small in absolute size, hence its large default.
struct Weights {
  double rec = 1.0;
  double smooth_l = 1.0;
  double tv_r = 0.1;
  double me = 1000.0;
  double charbonnier_eps = 1e-3;

  void validate() const;
};

struct LossBreakdown {
  double rec = 0.0;       // mean over pixels of sum_c |I - L R|
  double smooth_l = 0.0;  // mean over pixels of |grad L|^2
  double tv_r = 0.0;      // mean over pixels of sum_c sum_d |grad_d R_c|
  double me = 0.0;        // mutual-exclusivity penalty
  double total = 0.0;     // weighted sum
};

/// Search direction of the backtracking solver. Both variants use the same
/// Armijo line search and therefore produce a strictly decreasing trace.
enum class Direction { steepest, lbfgs };
std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view s);

struct SolverConfig {
  int max_iters = 500;
  double step_size = 0.05;
  double tol_rel = 1e-7;
  std::uint64_t seed = 0;
  /// Std. dev. of a seeded Gaussian perturbation added to the unconstrained
  /// initial parameters; 0 keeps the initialization deterministic in `seed`.
  double init_jitter = 0.0;
  Direction direction = Direction::lbfgs;
  /// Curvature pairs kept by the lbfgs direction.
  int history = 8;

  void validate() const;
};

enum class StopReason { max_iters, tolerance, line_search, stationary };
std::string_view to_string(StopReason r);

struct RetinexPair {
  ImageGrid illumination;  // 1 channel, strictly positive
  ImageGrid reflectance;   // input channel count, in [0,1]
  LossBreakdown loss;
  std::vector<double> trace;  // total loss at the start and after every accepted step
  int iterations = 0;
  StopReason stop = StopReason::max_iters;
};

/// Gradients with respect to the unconstrained parameters: a with
/// L = softplus(a), and b with R = sigmoid(b).
struct ParamGradients {
  ImageGrid illumination;  // dLoss/da, 1 channel
  ImageGrid reflectance;   // dLoss/db, per channel
};

/// L0 = max(gauss_3px(max_c I), 0.01); R0 = clamp(I / L0, 0, 1).
RetinexPair init_decomposition(const ImageGrid& composite);

LossBreakdown retinex_loss(const ImageGrid& composite, const ImageGrid& illumination, const ImageGrid& reflectance,
                           const Weights& w = {});

/// Mean over pixels of sum_d |grad_d L| * sum_c |grad_d R_c| with
/// Charbonnier magnitudes.
double me_loss(const ImageGrid& illumination, const ImageGrid& reflectance, double charbonnier_eps = 1e-3);

ParamGradients retinex_loss_gradients(const ImageGrid& composite, const ImageGrid& illumination,
                                      const ImageGrid& reflectance, const Weights& w = {});

/// Backtracking gradient descent on the unconstrained parametrization,
/// started from init_decomposition. Throws SolverError on a non-finite
/// objective.
RetinexPair decompose(const ImageGrid& composite, const Weights& w = {}, const SolverConfig& cfg = {});

/// Mean absolute reconstruction error |I - L R| over all values.
double reconstruction_error(const ImageGrid& composite, const ImageGrid& illumination, const ImageGrid& reflectance);

}  // namespace ridekit::retinex
