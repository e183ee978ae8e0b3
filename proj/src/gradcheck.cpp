#include "edit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace edit {

bool gradients_agree(double analytic, double numeric, GradTolerance tol) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= tol.abs_floor) return true;
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return diff <= tol.rel_tol * scale;
}

GradCheckReport check_gradients(std::span<Parameter* const> params,
                                const std::function<double()>& loss, double step,
                                GradTolerance tol) {
  GradCheckReport report;
  for (Parameter* p : params) {
    const auto numeric = central_differences<float>(p->value.data(), loss, step);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double analytic = p->grad[i];
      ++report.checked;
      report.max_abs_error = std::max(report.max_abs_error, std::abs(analytic - numeric[i]));
      if (!gradients_agree(analytic, numeric[i], tol)) {
        report.mismatches.push_back({p->name, i, analytic, numeric[i]});
      }
    }
  }
  return report;
}

}  // namespace edit
