#include "isolab/gradcheck.hpp"

#include <cmath>

#include "isolab/errors.hpp"
#include "isolab/model.hpp"

namespace isolab {

std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& at, double step) {
  if (step <= 0.0) throw ContractViolation("finite_diff_grad: step must be positive");
  std::vector<double> grad(at.size());
  std::vector<double> p = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    p[i] = at[i] + step;
    const double fp = f(p);
    p[i] = at[i] - step;
    const double fm = f(p);
    p[i] = at[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw EvaluationError("finite_diff_grad: loss evaluated to a non-finite value");
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

std::vector<double> finite_diff_grad(
    const std::function<double(const ModelParams&)>& f, const ModelParams& params,
    double step) {
  ModelParams scratch = params;
  auto flat_f = [&](const std::vector<double>& flat) {
    unflatten(scratch, flat);
    return f(scratch);
  };
  return finite_diff_grad(flat_f, flatten(params), step);
}

double rel_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-4});
  return std::abs(a - b) / denom;
}

GradCheckReport compare_gradients(const std::vector<double>& analytic,
                                  const std::vector<double>& numeric, double step) {
  if (analytic.size() != numeric.size())
    throw ContractViolation("compare_gradients: length mismatch");
  GradCheckReport report;
  report.parameter_count = analytic.size();
  report.step_size = step;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    report.max_rel_error = std::max(report.max_rel_error, rel_error(analytic[i], numeric[i]));
  return report;
}

}  // namespace isolab
