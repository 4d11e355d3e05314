#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace isolab {

struct ModelParams;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t parameter_count = 0;
  double step_size = 0.0;
};

// Central-difference gradient (f(p+h) - f(p-h)) / (2h) per coordinate.
// The callable must be deterministic across evaluations (fix every RNG seed
// and dropout mask inside it). Throws EvaluationError if f returns a
// non-finite value.
std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& at, double step);

// Same contract, over a full parameter set; coordinates follow the
// flatten() order of trainable parameters.
std::vector<double> finite_diff_grad(
    const std::function<double(const ModelParams&)>& f, const ModelParams& params,
    double step);

// Relative error with a small floor so near-zero coordinate pairs are
// compared absolutely: |a-b| / max(|a|, |b|, 1e-4).
double rel_error(double a, double b);

GradCheckReport compare_gradients(const std::vector<double>& analytic,
                                  const std::vector<double>& numeric,
                                  double step);

}  // namespace isolab
