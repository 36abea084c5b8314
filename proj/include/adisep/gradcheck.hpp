#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace adisep {

/// ||a - n|| / max(||a||, ||n||); 0 when both vanish.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Central differences of a scalar function at x with step h.
std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double step = 1e-5);

struct GradCheckOutcome {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  int trials = 0;
  bool passed = false;
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  int trials = 20;  // one random instance per seed, seeds seed .. seed + trials - 1
  /// Perturbs every analytic gradient by a relative 1e-3 so each check must fail.
  bool corrupt_backward = false;
};

inline constexpr double kElementaryTolerance = 1e-5;
inline constexpr double kCompositeTolerance = 1e-4;

/// Finite-difference verification of every differentiable kernel and of the
/// composite uncertainty / soft-separation / fusion paths.
std::vector<GradCheckOutcome> run_gradcheck_suite(const GradCheckOptions& options);

}  // namespace adisep
