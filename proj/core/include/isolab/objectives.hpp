#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isolab/model.hpp"
#include "isolab/rng.hpp"
#include "isolab/tape.hpp"

namespace isolab {

enum class CovVariant { kNone, kTargetOne, kTargetHalf, kTargetMean };

std::string to_string(CovVariant v);
CovVariant cov_variant_from_string(const std::string& s);

// Loss composition: ce + weight * regularizer (single form) or
// ce + lambda1 * cl + lambda2 * cor (combined form), plus an optional
// explicit L2 penalty for the regularization baseline.
struct ObjectiveConfig {
  bool use_cl = false;
  bool use_cor = false;
  double lambda = 1.7;    // single-regularizer weight
  double lambda1 = 1.7;   // CL weight in the combined form
  double lambda2 = 0.04;  // Cor weight in the combined form
  double tau = 0.05;      // contrastive temperature
  CovVariant cov_variant = CovVariant::kNone;
  double l2_weight = 0.0;
  // Squared Frobenius norm instead of the plain norm in the correlation /
  // covariance penalties. Off by default.
  bool squared_frobenius = false;

  bool any_regularizer() const {
    return use_cl || use_cor || cov_variant != CovVariant::kNone;
  }
  bool combined() const {
    return use_cl && (use_cor || cov_variant != CovVariant::kNone);
  }
  double cl_weight() const { return combined() ? lambda1 : lambda; }
  double cor_weight() const { return combined() ? lambda2 : lambda; }

  // Throws ConfigError: tau must be positive, weights non-negative, and
  // use_cor is mutually exclusive with a covariance variant.
  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;
  double cl = 0.0;
  double cor = 0.0;
  double cov = 0.0;
  double l2 = 0.0;
  double t_ce = 0.0;  // seconds spent building each term's forward pass
  double t_cl = 0.0;
  double t_cor = 0.0;
};

// One JSON line per logged step, fixed key order:
// {"step":..,"ce":..,"cl":..,"cor":..,"total":..,"t_ce":..,"t_cl":..,"t_cor":..}
// plus "cov"/"l2" keys when those terms are active.
std::string loss_line_json(int step, const LossBreakdown& b, const ObjectiveConfig& cfg);

// Mean over the batch of -log p(y_i). Diagnostic form over probabilities;
// the training path differentiates through logits via log-sum-exp instead.
double cross_entropy(const Matrix& probs, const std::vector<int>& labels);

// Dropout-based contrastive regularizer on two stochastic encodings of the
// same batch; sim is cosine and the denominator ranges over all second-pass
// rows including j = i.
Var cl_reg_graph(Tape& tape, Var h, Var h_plus, double tau);
double cl_reg(const Matrix& h, const Matrix& h_plus, double tau);

// Frobenius distance between the batch Pearson correlation matrix and the
// identity. Non-squared norm, guarded as sqrt(s + 1e-12).
Var cor_reg_graph(Tape& tape, Var h, bool squared = false);
double cor_reg(const Matrix& h);

// Covariance-matrix ablations: push covariances to 0 and variances to 1,
// 0.5, or the batch-mean variance (the mean is a constant of the batch).
Var cov_reg_graph(Tape& tape, Var h, CovVariant variant, bool squared = false);
double cov_reg(const Matrix& h, CovVariant variant);

// weight * sum of squared weight-matrix entries (biases excluded).
Var l2_penalty_graph(Tape& tape, const ModelVars& vars, double weight);
double l2_penalty(const ModelParams& params, double weight);

struct Batch {
  std::vector<std::vector<int>> tokens;
  std::vector<int> labels;
  std::size_t size() const { return tokens.size(); }
};

struct JointLossGraph {
  Var total;
  Var h_first;  // first-pass representations (CE and Cor-Reg share them)
  LossBreakdown breakdown;
  std::optional<BatchNormStats> bn_stats_first;
  std::optional<BatchNormStats> bn_stats_second;
};

// Records the full training objective: one encoder pass feeds CE and the
// correlation-family term, a second pass runs only when CL-Reg is active.
// Per-term wall time lands in the breakdown.
JointLossGraph joint_loss_graph(Tape& tape, const ModelVars& vars,
                                const ModelParams& params, const Batch& batch,
                                const ObjectiveConfig& cfg, Rng& rng);

// Forward-only convenience wrapper over a throwaway tape.
LossBreakdown joint_loss(const Batch& batch, const ModelParams& params,
                         const ObjectiveConfig& cfg, Rng& rng);

}  // namespace isolab
