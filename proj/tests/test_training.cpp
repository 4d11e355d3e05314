#include <doctest.h>

#include <cmath>

#include "isolab/dataset.hpp"
#include "isolab/errors.hpp"
#include "isolab/train.hpp"

using namespace isolab;

namespace {

// Small two-domain corpus: d0 is the source, d1 the validation domain.
struct Splits {
  Dataset source;
  Dataset val;
};

Splits small_corpus(int intents = 3, int utterances = 20, std::uint64_t seed = 1) {
  SynthConfig cfg;
  cfg.domains = 2;
  cfg.intents_per_domain = intents;
  cfg.utterances_per_intent = utterances;
  cfg.noise_vocab_size = 64;
  cfg.seed = seed;
  const Dataset data = generate_synthetic(cfg);
  SplitSpec spec;
  spec.train_domains = {"d0"};
  spec.validation_domains = {"d1"};
  auto [source, val] = split_by_domain(data, spec);
  return {std::move(source), std::move(val)};
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.encoder.vocab_size = 256;
  cfg.encoder.d_emb = 16;
  cfg.encoder.d_h = 24;
  cfg.encoder.d = 8;
  cfg.batch_size = 16;
  cfg.max_steps = 60;
  cfg.eval_every = 20;
  cfg.patience_steps = 60;
  cfg.val_episodes = 10;
  cfg.val_way = 3;
  return cfg;
}

}  // namespace

TEST_CASE("adam: zero gradient and zero decay leave parameters unchanged") {
  Matrix p{{1.0, -2.0}, {3.0, 0.5}};
  const Matrix before = p;
  std::vector<ParamRef> refs = {{"p", &p, true}};
  AdamState state = adam_state_like(refs);
  AdamConfig cfg;
  const Matrix g(2, 2);
  std::vector<const Matrix*> grads = {&g};
  adam_step(refs, grads, state, cfg);
  CHECK(max_abs_diff(p, before) == 0.0);
}

TEST_CASE("adam: first step moves a scalar by about lr against the gradient") {
  Matrix p{{2.0}};
  std::vector<ParamRef> refs = {{"p", &p, false}};
  AdamState state = adam_state_like(refs);
  AdamConfig cfg;
  cfg.lr = 0.01;
  const Matrix g{{0.5}};
  std::vector<const Matrix*> grads = {&g};
  adam_step(refs, grads, state, cfg);
  // bias-corrected mhat/sqrt(vhat) = g/|g| = 1 for a scalar
  CHECK(p(0, 0) == doctest::Approx(2.0 - 0.01).epsilon(1e-6));
}

TEST_CASE("adam: 100 steps on ||p||^2 collapse the norm") {
  Rng rng(5);
  Matrix p(1, 8);
  for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = 3.0 * rng.normal();
  const double initial = frobenius_norm(p);

  std::vector<ParamRef> refs = {{"p", &p, false}};
  AdamState state = adam_state_like(refs);
  AdamConfig cfg;
  cfg.lr = 0.1;
  for (int step = 0; step < 100; ++step) {
    const Matrix g = scaled(p, 2.0);
    std::vector<const Matrix*> grads = {&g};
    adam_step(refs, grads, state, cfg);
  }
  CHECK(frobenius_norm(p) <= 0.1 * initial);
}

TEST_CASE("adam: non-finite gradient aborts the step with diagnostics") {
  Matrix p{{1.0}};
  std::vector<ParamRef> refs = {{"theta", &p, false}};
  AdamState state = adam_state_like(refs);
  AdamConfig cfg;
  Matrix g{{std::numeric_limits<double>::quiet_NaN()}};
  std::vector<const Matrix*> grads = {&g};
  try {
    adam_step(refs, grads, state, cfg);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(std::string(e.what()).find("theta") != std::string::npos);
  }
}

TEST_CASE("adam: decoupled weight decay shrinks weights, not biases") {
  Matrix w{{1.0}}, b{{1.0}};
  std::vector<ParamRef> refs = {{"w", &w, true}, {"b", &b, false}};
  AdamState state = adam_state_like(refs);
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  const Matrix g(1, 1);
  std::vector<const Matrix*> grads = {&g, &g};
  adam_step(refs, grads, state, cfg);
  CHECK(w(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-12));
  CHECK(b(0, 0) == 1.0);
}

TEST_CASE("train config validation") {
  TrainConfig cfg = tiny_config();
  cfg.objective.use_cor = true;
  cfg.batch_size = 4;  // regularizers need at least 8
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.batch_size = 16;
  CHECK_NOTHROW(cfg.validate());
  cfg.patience_steps = 5;  // below eval_every
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("train: empty datasets are configuration errors") {
  const auto splits = small_corpus();
  CHECK_THROWS_AS(train(Dataset{}, splits.val, tiny_config()), ConfigError);
  CHECK_THROWS_AS(train(splits.source, Dataset{}, tiny_config()), ConfigError);
}

TEST_CASE("train: max_steps 0 returns initialized params and an empty log") {
  const auto splits = small_corpus();
  TrainConfig cfg = tiny_config();
  cfg.max_steps = 0;
  const TrainResult result = train(splits.source, splits.val, cfg);
  CHECK(result.log.steps.empty());
  CHECK(result.log.evals.empty());
  CHECK(result.log.stopping_step == 0);
  Rng rng(Rng::derive_seed(cfg.seed, 1));
  const ModelParams fresh = init_model(cfg.encoder, splits.source.num_labels(), rng);
  CHECK(flatten(result.params) == flatten(fresh));
}

TEST_CASE("train: converges on a separable synthetic source") {
  const auto splits = small_corpus(3, 30);
  TrainConfig cfg = tiny_config();
  cfg.max_steps = 300;
  cfg.patience_steps = 300;
  cfg.eval_every = 300;  // single eval point: the returned model is the final one
  const TrainResult result = train(splits.source, splits.val, cfg);

  // late-training CE
  double late_ce = 0.0;
  int count = 0;
  for (std::size_t i = result.log.steps.size() - 10; i < result.log.steps.size(); ++i) {
    late_ce += result.log.steps[i].second.ce;
    ++count;
  }
  CHECK(late_ce / count < 0.1);

  // source accuracy via the classification head
  const Tokenizer tok(result.params.tokenizer);
  int correct = 0;
  for (const auto& u : splits.source.utterances) {
    const Matrix h = encode(result.params, {tok.tokenize(u.text)}, EncodeMode::kEval);
    std::vector<double> hv(h.values());
    const auto probs = classify(result.params.head, hv);
    const int pred = static_cast<int>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    correct += (pred == u.label) ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / splits.source.size() > 0.95);
}

TEST_CASE("train: identical config and seed give bit-identical runs") {
  const auto splits = small_corpus(3, 12);
  TrainConfig cfg = tiny_config();
  cfg.max_steps = 40;
  const TrainResult a = train(splits.source, splits.val, cfg);
  const TrainResult b = train(splits.source, splits.val, cfg);

  CHECK(flatten(a.params) == flatten(b.params));
  REQUIRE(a.log.steps.size() == b.log.steps.size());
  for (std::size_t i = 0; i < a.log.steps.size(); ++i) {
    CHECK(a.log.steps[i].first == b.log.steps[i].first);
    // numeric loss fields are bit-identical; wall times are exempt
    CHECK(a.log.steps[i].second.total == b.log.steps[i].second.total);
    CHECK(a.log.steps[i].second.ce == b.log.steps[i].second.ce);
    CHECK(a.log.steps[i].second.cl == b.log.steps[i].second.cl);
    CHECK(a.log.steps[i].second.cor == b.log.steps[i].second.cor);
  }
  REQUIRE(a.log.evals.size() == b.log.evals.size());
  for (std::size_t i = 0; i < a.log.evals.size(); ++i) {
    CHECK(a.log.evals[i].accuracy == b.log.evals[i].accuracy);
    CHECK(a.log.evals[i].isotropy == b.log.evals[i].isotropy);
  }
  CHECK(a.log.best_step == b.log.best_step);
  CHECK(a.log.stopping_step == b.log.stopping_step);
}

TEST_CASE("train: best checkpoint bookkeeping is the max over eval points") {
  const auto splits = small_corpus(3, 20);
  TrainConfig cfg = tiny_config();
  cfg.max_steps = 100;
  cfg.patience_steps = 100;
  const TrainResult result = train(splits.source, splits.val, cfg);
  REQUIRE(!result.log.evals.empty());
  double best = 0.0;
  for (const auto& e : result.log.evals) best = std::max(best, e.accuracy);
  CHECK(result.log.best_accuracy == best);
}

TEST_CASE("train: Cor-Reg term descends over training") {
  for (std::uint64_t seed : {1ull, 2ull}) {
    const auto splits = small_corpus(4, 24, 3);
    TrainConfig cfg = tiny_config();
    cfg.seed = seed;
    cfg.max_steps = 120;
    cfg.patience_steps = 120;
    // strong enough that the regularizer, not the CE pull, sets the trend
    cfg.objective.use_cor = true;
    cfg.objective.lambda = 0.5;

    const TrainResult result = train(splits.source, splits.val, cfg);
    const auto& steps = result.log.steps;
    REQUIRE(steps.size() >= 40);
    double early = 0.0, late = 0.0;
    for (int i = 0; i < 10; ++i) {
      early += steps[static_cast<std::size_t>(i)].second.cor;
      late += steps[steps.size() - 10 + static_cast<std::size_t>(i)].second.cor;
    }
    CAPTURE(seed);
    CHECK(late < early);
  }
}
