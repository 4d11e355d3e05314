#include "isolab/model.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>

#include "isolab/errors.hpp"

namespace isolab {

Tokenizer::Tokenizer(TokenizerConfig cfg) : cfg_(cfg) {
  if (cfg_.vocab_size < 2)
    throw ContractViolation("Tokenizer: vocab_size must be at least 2");
}

namespace {
std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}
}  // namespace

int Tokenizer::token_id(std::string_view token) const {
  std::uint64_t h;
  if (cfg_.lowercase) {
    std::string lowered(token);
    for (char& c : lowered)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    h = fnv1a(lowered);
  } else {
    h = fnv1a(token);
  }
  return 1 + static_cast<int>(h % static_cast<std::uint64_t>(cfg_.vocab_size - 1));
}

std::vector<int> Tokenizer::tokenize(std::string_view text) const {
  std::vector<int> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) ids.push_back(token_id(text.substr(i, j - i)));
    i = j;
  }
  if (ids.empty()) ids.push_back(kUnkId);
  return ids;
}

ModelParams init_model(const EncoderConfig& cfg, int num_classes, Rng& rng) {
  if (num_classes < 1) throw ContractViolation("init_model: need at least one class");
  ModelParams p;
  p.tokenizer = TokenizerConfig{cfg.vocab_size, cfg.lowercase};

  auto fill_normal = [&rng](Matrix& m, double stddev) {
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  };
  auto glorot = [&](std::size_t fan_in, std::size_t fan_out) {
    Matrix m(fan_in, fan_out);
    fill_normal(m, std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
    return m;
  };

  p.encoder.embedding_table =
      Matrix(static_cast<std::size_t>(cfg.vocab_size), static_cast<std::size_t>(cfg.d_emb));
  fill_normal(p.encoder.embedding_table, cfg.embedding_init_scale);

  const std::size_t dims[3] = {static_cast<std::size_t>(cfg.d_emb),
                               static_cast<std::size_t>(cfg.d_h),
                               static_cast<std::size_t>(cfg.d)};
  for (int layer = 0; layer < 2; ++layer) {
    Matrix w = glorot(dims[layer], dims[layer + 1]);
    Matrix b(1, dims[layer + 1]);
    p.encoder.layers.emplace_back(std::move(w), std::move(b));
  }
  p.encoder.dropout_rate = cfg.dropout_rate;
  if (cfg.batchnorm) {
    BatchNormParams bn;
    bn.gamma = Matrix(1, dims[2], 1.0);
    bn.beta = Matrix(1, dims[2], 0.0);
    bn.running_mean = Matrix(1, dims[2], 0.0);
    bn.running_var = Matrix(1, dims[2], 1.0);
    p.encoder.batchnorm = std::move(bn);
  }

  p.head.W = glorot(static_cast<std::size_t>(num_classes), dims[2]);
  p.head.b = Matrix(1, static_cast<std::size_t>(num_classes));
  return p;
}

ModelVars bind_params(Tape& tape, const ModelParams& params) {
  ModelVars v;
  v.encoder.table = tape.leaf(params.encoder.embedding_table);
  for (const auto& [w, b] : params.encoder.layers) {
    v.encoder.layers.emplace_back(tape.leaf(w), tape.leaf(b));
  }
  if (params.encoder.batchnorm) {
    v.encoder.bn_gamma = tape.leaf(params.encoder.batchnorm->gamma);
    v.encoder.bn_beta = tape.leaf(params.encoder.batchnorm->beta);
    v.encoder.has_bn = true;
  }
  v.head.W = tape.leaf(params.head.W);
  v.head.b = tape.leaf(params.head.b);
  return v;
}

std::vector<Var> collect_vars(const ModelVars& vars) {
  std::vector<Var> out;
  out.push_back(vars.encoder.table);
  for (const auto& [w, b] : vars.encoder.layers) {
    out.push_back(w);
    out.push_back(b);
  }
  if (vars.encoder.has_bn) {
    out.push_back(vars.encoder.bn_gamma);
    out.push_back(vars.encoder.bn_beta);
  }
  out.push_back(vars.head.W);
  out.push_back(vars.head.b);
  return out;
}

namespace {

Matrix sample_dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  // Inverted dropout: kept activations are scaled by 1/(1-p) so eval needs
  // no rescaling.
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = (rng.uniform() < rate) ? 0.0 : keep_scale;
  return mask;
}

}  // namespace

Var encode_graph(Tape& tape, const EncoderVars& vars, const EncoderParams& params,
                 const std::vector<std::vector<int>>& token_batch, EncodeMode mode,
                 Rng* rng, BatchNormStats* bn_stats) {
  if (token_batch.empty())
    throw ContractViolation("encode: empty batch");
  const bool train = mode == EncodeMode::kTrain;
  if (train && params.dropout_rate > 0.0 && rng == nullptr)
    throw ContractViolation("encode: train mode with dropout needs an rng");

  Var x = tape.embed_mean(vars.table, token_batch);
  const std::size_t n_layers = vars.layers.size();
  for (std::size_t i = 0; i < n_layers; ++i) {
    x = tape.add_row(tape.matmul(x, vars.layers[i].first), vars.layers[i].second);
    if (i + 1 < n_layers) {
      x = tape.tanh_act(x);
      if (train && params.dropout_rate > 0.0) {
        const Matrix& xv = tape.value(x);
        x = tape.mul_const(
            x, sample_dropout_mask(xv.rows(), xv.cols(), params.dropout_rate, *rng));
      }
    }
  }

  if (params.batchnorm) {
    const BatchNormParams& bn = *params.batchnorm;
    if (!vars.has_bn)
      throw ContractViolation("encode: batchnorm params without bound vars");
    if (train) {
      if (bn_stats) {
        const Matrix& hv = tape.value(x);
        Matrix mean(1, hv.cols());
        for (std::size_t i = 0; i < hv.rows(); ++i)
          for (std::size_t j = 0; j < hv.cols(); ++j) mean(0, j) += hv(i, j);
        for (std::size_t j = 0; j < hv.cols(); ++j)
          mean(0, j) /= static_cast<double>(hv.rows());
        bn_stats->mean = std::move(mean);
      }
      // Normalize by batch statistics (biased variance), as standard.
      Var centered = tape.col_center(x);
      Var var = tape.col_mean(tape.mul(centered, centered));
      Var inv_std = tape.rsqrt_eps(var, bn.eps);
      if (bn_stats) bn_stats->var = tape.value(var);
      x = tape.add_row(tape.mul_row(tape.mul_row(centered, inv_std), vars.bn_gamma),
                       vars.bn_beta);
    } else {
      Matrix neg_mean = scaled(bn.running_mean, -1.0);
      Matrix inv_std(1, bn.running_var.cols());
      for (std::size_t j = 0; j < inv_std.cols(); ++j)
        inv_std(0, j) = 1.0 / std::sqrt(bn.running_var(0, j) + bn.eps);
      Var shifted = tape.add_row(x, tape.leaf(std::move(neg_mean)));
      Var normed = tape.mul_row(shifted, tape.leaf(std::move(inv_std)));
      x = tape.add_row(tape.mul_row(normed, vars.bn_gamma), vars.bn_beta);
    }
  }
  return x;
}

Var logits_graph(Tape& tape, const HeadVars& head, Var h) {
  return tape.add_row(tape.matmul_nt(h, head.W), head.b);
}

Matrix encode(const ModelParams& params, const std::vector<std::vector<int>>& token_batch,
              EncodeMode mode, Rng* rng, BatchNormStats* bn_stats) {
  Tape tape;
  ModelVars vars = bind_params(tape, params);
  Var h = encode_graph(tape, vars.encoder, params.encoder, token_batch, mode, rng, bn_stats);
  return tape.value(h);
}

void update_running_stats(BatchNormParams& bn, const BatchNormStats& stats) {
  const double m = bn.momentum;
  for (std::size_t j = 0; j < bn.running_mean.cols(); ++j) {
    bn.running_mean(0, j) = (1.0 - m) * bn.running_mean(0, j) + m * stats.mean(0, j);
    bn.running_var(0, j) = (1.0 - m) * bn.running_var(0, j) + m * stats.var(0, j);
  }
}

std::vector<double> classify(const HeadParams& head, const std::vector<double>& h) {
  const std::size_t L = head.W.rows(), d = head.W.cols();
  if (h.size() != d) throw ContractViolation("classify: representation dimension mismatch");
  std::vector<double> logits(L, 0.0);
  for (std::size_t c = 0; c < L; ++c) {
    double acc = head.b(0, c);
    for (std::size_t j = 0; j < d; ++j) acc += head.W(c, j) * h[j];
    logits[c] = acc;
  }
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double denom = 0.0;
  for (double& z : logits) {
    z = std::exp(z - mx);
    denom += z;
  }
  for (double& z : logits) z /= denom;
  return logits;
}

std::vector<ParamRef> collect_params(ModelParams& params) {
  std::vector<ParamRef> out;
  out.push_back({"embedding_table", &params.encoder.embedding_table, true});
  for (std::size_t i = 0; i < params.encoder.layers.size(); ++i) {
    out.push_back({"layer" + std::to_string(i) + ".weight",
                   &params.encoder.layers[i].first, true});
    out.push_back({"layer" + std::to_string(i) + ".bias",
                   &params.encoder.layers[i].second, false});
  }
  if (params.encoder.batchnorm) {
    out.push_back({"bn.gamma", &params.encoder.batchnorm->gamma, false});
    out.push_back({"bn.beta", &params.encoder.batchnorm->beta, false});
  }
  out.push_back({"head.weight", &params.head.W, true});
  out.push_back({"head.bias", &params.head.b, false});
  return out;
}

std::vector<const Matrix*> collect_param_values(const ModelParams& params) {
  auto& mutable_params = const_cast<ModelParams&>(params);
  std::vector<const Matrix*> out;
  for (const auto& ref : collect_params(mutable_params)) out.push_back(ref.value);
  return out;
}

std::vector<double> flatten(const ModelParams& params) {
  std::vector<double> flat;
  for (const Matrix* m : collect_param_values(params))
    flat.insert(flat.end(), m->values().begin(), m->values().end());
  return flat;
}

void unflatten(ModelParams& params, const std::vector<double>& flat) {
  std::size_t off = 0;
  for (const auto& ref : collect_params(params)) {
    Matrix& m = *ref.value;
    if (off + m.size() > flat.size())
      throw ContractViolation("unflatten: flat vector too short");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + m.size()),
              m.values().begin());
    off += m.size();
  }
  if (off != flat.size())
    throw ContractViolation("unflatten: flat vector length mismatch");
}

}  // namespace isolab
