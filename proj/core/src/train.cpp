#include "isolab/train.hpp"

#include <cmath>
#include <iostream>
#include <set>

#include "isolab/errors.hpp"
#include "isolab/geometry.hpp"

namespace isolab {

void TrainConfig::validate() const {
  objective.validate();
  if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be non-negative");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (objective.any_regularizer() && batch_size < 8)
    throw ConfigError("train: batch_size must be >= 8 when a regularizer is active");
  if (max_steps < 0) throw ConfigError("train: max_steps must be non-negative");
  if (eval_every < 1) throw ConfigError("train: eval_every must be positive");
  if (patience_steps < eval_every)
    throw ConfigError("train: patience_steps must be >= eval_every");
  if (val_episodes < 1 || val_way < 2 || val_shots < 1 || val_queries < 1)
    throw ConfigError("train: invalid validation episode settings");
}

AdamState adam_state_like(const std::vector<ParamRef>& params) {
  AdamState state;
  for (const auto& ref : params) {
    state.m.emplace_back(ref.value->rows(), ref.value->cols());
    state.v.emplace_back(ref.value->rows(), ref.value->cols());
  }
  return state;
}

void adam_step(std::vector<ParamRef>& params, const std::vector<const Matrix*>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ContractViolation("adam_step: parameter/gradient/state count mismatch");

  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!grads[k]->same_shape(*params[k].value))
      throw ContractViolation("adam_step: gradient shape mismatch for " + params[k].name);
    if (!grads[k]->all_finite()) {
      double worst = 0.0;
      for (double g : grads[k]->values())
        if (!std::isfinite(g) || std::abs(g) > worst) worst = std::abs(g);
      throw EvaluationError("adam_step: non-finite gradient for " + params[k].name +
                            " (max |g| seen: " + std::to_string(worst) + "); step aborted");
    }
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k].value;
    const Matrix& g = *grads[k];
    Matrix& m = state.m[k];
    Matrix& v = state.v[k];
    const bool decay = params[k].decay && cfg.weight_decay > 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data()[i];
      m.data()[i] = cfg.beta1 * m.data()[i] + (1.0 - cfg.beta1) * gi;
      v.data()[i] = cfg.beta2 * v.data()[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m.data()[i] / bc1;
      const double vhat = v.data()[i] / bc2;
      double update = cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      if (decay) update += cfg.lr * cfg.weight_decay * p.data()[i];
      p.data()[i] -= update;
    }
  }
}

namespace {

void warn_on_label_overlap(const Dataset& source, const Dataset& val) {
  std::set<std::pair<std::string, std::string>> source_labels;
  for (const auto& u : source.utterances)
    source_labels.insert({source.domain_names[static_cast<std::size_t>(u.domain)],
                          source.label_names[static_cast<std::size_t>(u.label)]});
  for (const auto& u : val.utterances) {
    if (source_labels.count({val.domain_names[static_cast<std::size_t>(u.domain)],
                             val.label_names[static_cast<std::size_t>(u.label)]})) {
      std::cerr << "warning: source and validation label spaces overlap; "
                   "the protocol expects disjoint domains\n";
      return;
    }
  }
}

Matrix encode_dataset(const ModelParams& params, const std::vector<std::vector<int>>& tokens) {
  const std::size_t n = tokens.size();
  const std::size_t d = params.encoder.rep_dim();
  Matrix reps(n, d);
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t stop = std::min(n, start + kChunk);
    std::vector<std::vector<int>> chunk(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                        tokens.begin() + static_cast<std::ptrdiff_t>(stop));
    const Matrix out = encode(params, chunk, EncodeMode::kEval);
    std::copy_n(out.data(), out.size(), reps.data() + start * d);
  }
  return reps;
}

}  // namespace

TrainResult train(const Dataset& source, const Dataset& val, const TrainConfig& config) {
  config.validate();
  if (source.size() == 0) throw ConfigError("train: source dataset is empty");
  if (val.size() == 0) throw ConfigError("train: validation dataset is empty");
  warn_on_label_overlap(source, val);

  // Independent streams so that e.g. CL-Reg's extra dropout draws do not
  // shift batch composition between objective configurations.
  Rng rng_init(Rng::derive_seed(config.seed, 1));
  Rng rng_batches(Rng::derive_seed(config.seed, 2));
  Rng rng_dropout(Rng::derive_seed(config.seed, 3));
  const std::uint64_t episode_seed = Rng::derive_seed(config.seed, 4);

  ModelParams params = init_model(config.encoder, source.num_labels(), rng_init);
  const Tokenizer tokenizer(params.tokenizer);

  std::vector<std::vector<int>> source_tokens;
  source_tokens.reserve(source.size());
  for (const auto& u : source.utterances) source_tokens.push_back(tokenizer.tokenize(u.text));
  std::vector<std::vector<int>> val_tokens;
  val_tokens.reserve(val.size());
  for (const auto& u : val.utterances) val_tokens.push_back(tokenizer.tokenize(u.text));

  EpisodeSpec val_spec;
  val_spec.way = config.val_way;
  val_spec.shots = config.val_shots;
  val_spec.queries = config.val_queries;
  val_spec.episodes = config.val_episodes;
  val_spec.seed = episode_seed;  // fixed: the metric is comparable across evals

  auto param_refs = collect_params(params);
  AdamState adam = adam_state_like(param_refs);
  AdamConfig adam_cfg;
  adam_cfg.lr = config.learning_rate;
  adam_cfg.weight_decay = config.weight_decay;

  TrainResult result;
  TrainLog& log = result.log;
  ModelParams best_params = params;
  bool have_best = false;

  std::vector<int> order(source.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::size_t cursor = order.size();  // forces a shuffle on first use

  const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);
  int step = 0;
  while (step < config.max_steps) {
    // Next shuffled mini-batch; a trailing partial chunk is dropped unless
    // the dataset itself is smaller than one batch.
    if (cursor + batch_size > order.size()) {
      rng_batches.shuffle(order);
      cursor = 0;
    }
    const std::size_t take = std::min(batch_size, order.size());
    Batch batch;
    for (std::size_t i = 0; i < take; ++i) {
      const int idx = order[cursor + i];
      batch.tokens.push_back(source_tokens[static_cast<std::size_t>(idx)]);
      batch.labels.push_back(source.utterances[static_cast<std::size_t>(idx)].label);
    }
    cursor += take;

    Tape tape;
    ModelVars vars = bind_params(tape, params);
    JointLossGraph loss =
        joint_loss_graph(tape, vars, params, batch, config.objective, rng_dropout);
    tape.backward(loss.total);

    const auto var_list = collect_vars(vars);
    std::vector<const Matrix*> grads;
    grads.reserve(var_list.size());
    for (Var v : var_list) grads.push_back(&tape.grad(v));
    adam_step(param_refs, grads, adam, adam_cfg);

    if (params.encoder.batchnorm) {
      if (loss.bn_stats_first)
        update_running_stats(*params.encoder.batchnorm, *loss.bn_stats_first);
      if (loss.bn_stats_second)
        update_running_stats(*params.encoder.batchnorm, *loss.bn_stats_second);
    }

    ++step;
    log.steps.emplace_back(step, loss.breakdown);

    if (step % config.eval_every == 0) {
      const Matrix val_reps = encode_dataset(params, val_tokens);
      const EvalReport report = evaluate_cached(val_reps, val, val_spec);
      EvalPoint point;
      point.step = step;
      point.accuracy = report.mean;
      point.isotropy = isotropy(EmbeddingMatrix(val_reps));
      log.evals.push_back(point);

      if (!have_best || report.mean > log.best_accuracy) {
        log.best_accuracy = report.mean;
        log.best_step = step;
        best_params = params;
        have_best = true;
      }
      if (step - log.best_step >= config.patience_steps) break;
    }
  }

  log.stopping_step = step;
  result.params = have_best ? std::move(best_params) : std::move(params);
  return result;
}

}  // namespace isolab
