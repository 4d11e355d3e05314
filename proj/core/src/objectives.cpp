#include "isolab/objectives.hpp"

#include <chrono>
#include <cmath>

#include "isolab/errors.hpp"
#include "isolab/textio.hpp"

namespace isolab {

namespace {

constexpr double kPearsonEps = 1e-8;
constexpr double kFrobeniusEps = 1e-12;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string to_string(CovVariant v) {
  switch (v) {
    case CovVariant::kNone: return "none";
    case CovVariant::kTargetOne: return "target-1";
    case CovVariant::kTargetHalf: return "target-0.5";
    case CovVariant::kTargetMean: return "target-mean";
  }
  return "none";
}

CovVariant cov_variant_from_string(const std::string& s) {
  if (s == "none") return CovVariant::kNone;
  if (s == "target-1") return CovVariant::kTargetOne;
  if (s == "target-0.5") return CovVariant::kTargetHalf;
  if (s == "target-mean") return CovVariant::kTargetMean;
  throw ConfigError("unknown cov_variant: " + s);
}

void ObjectiveConfig::validate() const {
  if (tau <= 0.0) throw ConfigError("objective: tau must be positive");
  if (lambda < 0.0 || lambda1 < 0.0 || lambda2 < 0.0)
    throw ConfigError("objective: regularizer weights must be non-negative");
  if (l2_weight < 0.0) throw ConfigError("objective: l2_weight must be non-negative");
  if (use_cor && cov_variant != CovVariant::kNone)
    throw ConfigError("objective: use_cor and cov_variant are mutually exclusive");
}

std::string loss_line_json(int step, const LossBreakdown& b, const ObjectiveConfig& cfg) {
  std::string out = "{\"step\":" + std::to_string(step);
  out += ",\"ce\":" + format_double(b.ce);
  out += ",\"cl\":" + format_double(b.cl);
  out += ",\"cor\":" + format_double(b.cor);
  if (cfg.cov_variant != CovVariant::kNone) out += ",\"cov\":" + format_double(b.cov);
  if (cfg.l2_weight > 0.0) out += ",\"l2\":" + format_double(b.l2);
  out += ",\"total\":" + format_double(b.total);
  out += ",\"t_ce\":" + format_double(b.t_ce);
  out += ",\"t_cl\":" + format_double(b.t_cl);
  out += ",\"t_cor\":" + format_double(b.t_cor);
  out += "}";
  return out;
}

double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
  const std::size_t n = probs.rows(), L = probs.cols();
  if (labels.size() != n) throw ContractViolation("cross_entropy: label count mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= L)
      throw ContractViolation("cross_entropy: label out of range");
    double row_sum = 0.0;
    for (std::size_t j = 0; j < L; ++j) row_sum += probs(i, j);
    if (std::abs(row_sum - 1.0) > 1e-6)
      throw ContractViolation("cross_entropy: probabilities do not sum to 1");
    const double p = probs(i, static_cast<std::size_t>(labels[i]));
    loss -= std::log(std::max(p, 1e-300));
  }
  return loss / static_cast<double>(n);
}

namespace {

// Row-normalizes to (near) unit length: x / (||x|| + 1e-12). The tiny eps
// inside the sqrt only keeps the derivative finite at exactly zero rows.
Var normalize_rows(Tape& t, Var x) {
  Var sq = t.mul(x, x);
  Var rs = t.row_sum(sq);
  Var nrm = t.sqrt_eps(rs, 1e-32);
  Var inv = t.recip(t.add_scalar(nrm, 1e-12));
  return t.mul_col(x, inv);
}

Var batch_covariance_graph(Tape& t, Var h) {
  const std::size_t n = t.value(h).rows();
  if (n < 2) throw DegenerateInput("covariance regularizer: batch smaller than 2");
  Var centered = t.col_center(h);
  return t.scale(t.matmul_tn(centered, centered), 1.0 / static_cast<double>(n - 1));
}

}  // namespace

Var cl_reg_graph(Tape& t, Var h, Var h_plus, double tau) {
  if (tau <= 0.0) throw ContractViolation("cl_reg: tau must be positive");
  if (!t.value(h).same_shape(t.value(h_plus)))
    throw ContractViolation("cl_reg: representation shapes differ");
  Var sim = t.matmul_nt(normalize_rows(t, h), normalize_rows(t, h_plus));
  return t.row_lse_minus_diag_mean(t.scale(sim, 1.0 / tau));
}

double cl_reg(const Matrix& h, const Matrix& h_plus, double tau) {
  Tape t;
  return t.scalar(cl_reg_graph(t, t.leaf(h), t.leaf(h_plus), tau));
}

Var cor_reg_graph(Tape& t, Var h, bool squared) {
  Var cov = batch_covariance_graph(t, h);
  Var var = t.diag_part(cov);
  Var inv_std = t.rsqrt_eps(var, kPearsonEps);
  Var cor = t.mul(cov, t.matmul_tn(inv_std, inv_std));
  const std::size_t d = t.value(cor).rows();
  Var diff = t.add_const(cor, scaled(Matrix::identity(d), -1.0));
  if (squared) return t.sum(t.mul(diff, diff));
  return t.fro_norm_eps(diff, kFrobeniusEps);
}

double cor_reg(const Matrix& h) {
  Tape t;
  return t.scalar(cor_reg_graph(t, t.leaf(h)));
}

Var cov_reg_graph(Tape& t, Var h, CovVariant variant, bool squared) {
  if (variant == CovVariant::kNone)
    throw ContractViolation("cov_reg: variant must not be none");
  Var cov = batch_covariance_graph(t, h);
  const Matrix& cv = t.value(cov);
  const std::size_t d = cv.rows();
  double target = 1.0;
  if (variant == CovVariant::kTargetHalf) {
    target = 0.5;
  } else if (variant == CovVariant::kTargetMean) {
    // Mean of the current diagonal, treated as a constant of the batch.
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += cv(i, i);
    target = acc / static_cast<double>(d);
  }
  Var diff = t.add_const(cov, scaled(Matrix::identity(d), -target));
  if (squared) return t.sum(t.mul(diff, diff));
  return t.fro_norm_eps(diff, kFrobeniusEps);
}

double cov_reg(const Matrix& h, CovVariant variant) {
  Tape t;
  return t.scalar(cov_reg_graph(t, t.leaf(h), variant));
}

Var l2_penalty_graph(Tape& t, const ModelVars& vars, double weight) {
  std::vector<Var> weights;
  weights.push_back(vars.encoder.table);
  for (const auto& [w, b] : vars.encoder.layers) weights.push_back(w);
  weights.push_back(vars.head.W);

  Var acc = t.sum(t.mul(weights[0], weights[0]));
  for (std::size_t i = 1; i < weights.size(); ++i)
    acc = t.add(acc, t.sum(t.mul(weights[i], weights[i])));
  return t.scale(acc, weight);
}

double l2_penalty(const ModelParams& params, double weight) {
  if (weight < 0.0) throw ContractViolation("l2_penalty: weight must be non-negative");
  double acc = 0.0;
  auto& p = const_cast<ModelParams&>(params);
  for (const auto& ref : collect_params(p)) {
    if (!ref.decay) continue;
    for (double v : ref.value->values()) acc += v * v;
  }
  return weight * acc;
}

JointLossGraph joint_loss_graph(Tape& t, const ModelVars& vars, const ModelParams& params,
                                const Batch& batch, const ObjectiveConfig& cfg, Rng& rng) {
  cfg.validate();
  if (batch.size() == 0) throw ContractViolation("joint_loss: empty batch");
  if (cfg.any_regularizer() && batch.size() < 2)
    throw DegenerateInput("joint_loss: regularizers need a batch of at least 2");

  JointLossGraph out;

  auto t0 = std::chrono::steady_clock::now();
  BatchNormStats stats_first;
  out.h_first = encode_graph(t, vars.encoder, params.encoder, batch.tokens,
                             EncodeMode::kTrain, &rng,
                             params.encoder.batchnorm ? &stats_first : nullptr);
  if (params.encoder.batchnorm) out.bn_stats_first = std::move(stats_first);
  Var ce = t.softmax_xent(logits_graph(t, vars.head, out.h_first), batch.labels);
  out.breakdown.t_ce = seconds_since(t0);
  out.breakdown.ce = t.scalar(ce);
  Var total = ce;

  if (cfg.use_cl) {
    t0 = std::chrono::steady_clock::now();
    BatchNormStats stats_second;
    Var h_plus = encode_graph(t, vars.encoder, params.encoder, batch.tokens,
                              EncodeMode::kTrain, &rng,
                              params.encoder.batchnorm ? &stats_second : nullptr);
    if (params.encoder.batchnorm) out.bn_stats_second = std::move(stats_second);
    Var cl = cl_reg_graph(t, out.h_first, h_plus, cfg.tau);
    out.breakdown.t_cl = seconds_since(t0);
    out.breakdown.cl = t.scalar(cl);
    total = t.add(total, t.scale(cl, cfg.cl_weight()));
  }

  if (cfg.use_cor) {
    t0 = std::chrono::steady_clock::now();
    Var cor = cor_reg_graph(t, out.h_first, cfg.squared_frobenius);
    out.breakdown.t_cor = seconds_since(t0);
    out.breakdown.cor = t.scalar(cor);
    total = t.add(total, t.scale(cor, cfg.cor_weight()));
  } else if (cfg.cov_variant != CovVariant::kNone) {
    t0 = std::chrono::steady_clock::now();
    Var cov = cov_reg_graph(t, out.h_first, cfg.cov_variant, cfg.squared_frobenius);
    out.breakdown.t_cor = seconds_since(t0);
    out.breakdown.cov = t.scalar(cov);
    total = t.add(total, t.scale(cov, cfg.cor_weight()));
  }

  if (cfg.l2_weight > 0.0) {
    Var l2 = l2_penalty_graph(t, vars, cfg.l2_weight);
    out.breakdown.l2 = t.scalar(l2);
    total = t.add(total, l2);
  }

  out.total = total;
  out.breakdown.total = t.scalar(total);
  if (!std::isfinite(out.breakdown.total))
    throw EvaluationError("joint_loss: non-finite loss value");
  return out;
}

LossBreakdown joint_loss(const Batch& batch, const ModelParams& params,
                         const ObjectiveConfig& cfg, Rng& rng) {
  Tape t;
  ModelVars vars = bind_params(t, params);
  return joint_loss_graph(t, vars, params, batch, cfg, rng).breakdown;
}

}  // namespace isolab
