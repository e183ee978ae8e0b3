#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edit/autodiff.hpp"

namespace edit {

/// Agreement rule for analytic vs numeric derivatives: pass when the
/// absolute difference is within `abs_floor`, or the relative difference
/// (against the larger magnitude) is within `rel_tol`.
struct GradTolerance {
  double rel_tol = 1e-3;
  double abs_floor = 1e-5;
};

bool gradients_agree(double analytic, double numeric, GradTolerance tol);

struct GradMismatch {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_abs_error = 0.0;
  std::vector<GradMismatch> mismatches;

  bool ok() const { return mismatches.empty(); }
};

/// Central-difference derivative of `loss` with respect to every scalar of
/// `values`. `values` is perturbed in place and restored; the divisor is the
/// perturbation actually representable in T.
template <typename T>
std::vector<double> central_differences(std::span<T> values, const std::function<double()>& loss,
                                        double step) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T original = values[i];
    values[i] = static_cast<T>(original + step);
    const double up_step = static_cast<double>(values[i]) - original;
    const double up = loss();
    values[i] = static_cast<T>(original - step);
    const double down_step = original - static_cast<double>(values[i]);
    const double down = loss();
    values[i] = original;
    out[i] = (up - down) / (up_step + down_step);
  }
  return out;
}

/// Compares each parameter's accumulated `grad` against central differences
/// of `loss` taken over the parameter's `value`.
GradCheckReport check_gradients(std::span<Parameter* const> params,
                                const std::function<double()>& loss, double step,
                                GradTolerance tol = {});

}  // namespace edit
