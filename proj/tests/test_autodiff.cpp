#include <doctest.h>

#include <cmath>

#include "isolab/errors.hpp"
#include "isolab/gradcheck.hpp"
#include "isolab/tape.hpp"
#include "gradsuite.hpp"

using namespace isolab;

TEST_CASE("backward: loss = sum of params gives all-ones gradient") {
  Tape t;
  Var p = t.leaf(Matrix{{1.0, -2.0}, {0.5, 3.0}});
  t.backward(t.sum(p));
  const Matrix& g = t.grad(p);
  for (double v : g.values()) CHECK(v == 1.0);
}

TEST_CASE("backward: loss = 0.5*||p||^2 gives gradient p") {
  Tape t;
  Matrix p0{{1.0, -2.0, 0.25}};
  Var p = t.leaf(p0);
  t.backward(t.scale(t.sum(t.mul(p, p)), 0.5));
  CHECK(max_abs_diff(t.grad(p), p0) <= 1e-15);
}

TEST_CASE("grad before backward is a usage error") {
  Tape t;
  Var p = t.leaf(Matrix{{1.0}});
  CHECK_THROWS_AS(t.grad(p), ContractViolation);
}

TEST_CASE("backward requires a scalar loss") {
  Tape t;
  Var p = t.leaf(Matrix{{1.0, 2.0}});
  CHECK_THROWS_AS(t.backward(p), ContractViolation);
}

TEST_CASE("finite_diff_grad: quadratic derivative") {
  auto f = [](const std::vector<double>& p) { return p[0] * p[0]; };
  const auto g = finite_diff_grad(f, {3.0}, 1e-5);
  CHECK(std::abs(g[0] - 6.0) <= 1e-8);
}

TEST_CASE("finite_diff_grad: constant function has zero gradient") {
  auto f = [](const std::vector<double>&) { return 4.2; };
  for (double g : finite_diff_grad(f, {1.0, -2.0, 0.0}, 1e-5)) CHECK(g == 0.0);
}

TEST_CASE("finite_diff_grad rejects non-positive step") {
  auto f = [](const std::vector<double>& p) { return p[0]; };
  CHECK_THROWS_AS(finite_diff_grad(f, {1.0}, 0.0), ContractViolation);
}

TEST_CASE("primitive gradients match finite differences") {
  Rng rng(99);
  auto random_matrix = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
  };

  SUBCASE("tanh + matmul chain") {
    const Matrix x0 = random_matrix(3, 4);
    const Matrix w = random_matrix(4, 2);
    auto rep = gradsuite::check_free_matrix(x0, [&](Tape& t, Var x) {
      return t.sum(t.tanh_act(t.matmul(x, t.leaf(w))));
    });
    CHECK(rep.max_rel_error <= 1e-6);
  }
  SUBCASE("row normalization (mul_col, recip, sqrt_eps)") {
    const Matrix x0 = random_matrix(4, 3);
    auto rep = gradsuite::check_free_matrix(x0, [&](Tape& t, Var x) {
      Var nrm = t.sqrt_eps(t.row_sum(t.mul(x, x)), 1e-32);
      Var inv = t.recip(t.add_scalar(nrm, 1e-12));
      return t.sum(t.mul_col(x, inv));
    });
    CHECK(rep.max_rel_error <= 1e-6);
  }
  SUBCASE("correlation pipeline (col_center, diag_part, rsqrt_eps, fro_norm)") {
    const Matrix x0 = random_matrix(8, 4);
    auto rep = gradsuite::check_free_matrix(x0, [&](Tape& t, Var x) {
      Var c = t.col_center(x);
      Var cov = t.scale(t.matmul_tn(c, c), 1.0 / 7.0);
      Var inv_std = t.rsqrt_eps(t.diag_part(cov), 1e-8);
      Var cor = t.mul(cov, t.matmul_tn(inv_std, inv_std));
      return t.fro_norm_eps(t.add_const(cor, scaled(Matrix::identity(4), -1.0)), 1e-12);
    });
    CHECK(rep.max_rel_error <= 1e-6);
  }
  SUBCASE("contrastive pipeline (matmul_nt, row_lse_minus_diag_mean)") {
    const Matrix x0 = random_matrix(5, 3);
    const Matrix other = random_matrix(5, 3);
    auto rep = gradsuite::check_free_matrix(x0, [&](Tape& t, Var x) {
      return t.row_lse_minus_diag_mean(t.scale(t.matmul_nt(x, t.leaf(other)), 2.0));
    });
    CHECK(rep.max_rel_error <= 1e-6);
  }
  SUBCASE("softmax cross-entropy") {
    const Matrix z0 = random_matrix(6, 4);
    auto rep = gradsuite::check_free_matrix(z0, [&](Tape& t, Var z) {
      return t.softmax_xent(z, {0, 3, 1, 2, 2, 0});
    });
    CHECK(rep.max_rel_error <= 1e-6);
  }
  SUBCASE("embed_mean gather") {
    const Matrix table0 = random_matrix(6, 3);
    auto rep = gradsuite::check_free_matrix(table0, [&](Tape& t, Var table) {
      return t.sum(t.tanh_act(t.embed_mean(table, {{0, 1, 1}, {5}, {2, 4, 3, 0}})));
    });
    CHECK(rep.max_rel_error <= 1e-6);
  }
}

TEST_CASE("cross-entropy on a 3-class toy batch matches the analytic gradient") {
  Rng rng(5);
  auto s = gradsuite::random_setup(rng, /*n_batch=*/4, /*vocab=*/16, /*d_emb=*/6,
                                   /*d_h=*/5, /*d=*/6, /*n_classes=*/3,
                                   /*dropout=*/0.0);
  ObjectiveConfig cfg;  // CE only
  const auto report = gradsuite::check_joint_loss(s, cfg, /*pass_seed=*/11);
  CHECK(report.max_rel_error <= 1e-6);
  CHECK(report.parameter_count == flatten(s.params).size());
}

TEST_CASE("full joint loss on a 4-utterance batch, d=6, matches finite differences") {
  Rng rng(17);
  auto s = gradsuite::random_setup(rng);
  ObjectiveConfig cfg;
  cfg.use_cl = true;
  cfg.use_cor = true;
  cfg.lambda1 = 1.7;
  cfg.lambda2 = 0.04;
  cfg.tau = 0.05;
  const auto report = gradsuite::check_joint_loss(s, cfg, /*pass_seed=*/23);
  CHECK(report.max_rel_error <= 1e-4);
}

TEST_CASE("gradient property: 20 random CE configurations stay within 1e-4") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = gradsuite::random_setup(rng, 3 + static_cast<int>(rng.below(4)));
    ObjectiveConfig cfg;
    const auto report = gradsuite::check_joint_loss(s, cfg, 1000 + trial);
    CAPTURE(trial);
    CHECK(report.max_rel_error <= 1e-4);
  }
}
