#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "isolab/embedding_io.hpp"
#include "isolab/errors.hpp"
#include "isolab/geometry.hpp"
#include "isolab/rng.hpp"
#include "oracles.hpp"

using namespace isolab;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

const Matrix kSymmetricFourPoint{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
const Matrix kAnisotropicFourPoint{{2, 0}, {-2, 0}, {0, 1}, {0, -1}};

}  // namespace

TEST_CASE("center: two-point column") {
  EmbeddingMatrix v(Matrix{{1}, {3}});
  const auto c = center(v);
  CHECK(c.values(0, 0) == -1.0);
  CHECK(c.values(1, 0) == 1.0);
  CHECK(c.centered);
}

TEST_CASE("center is idempotent") {
  Rng rng(2);
  EmbeddingMatrix v(random_matrix(rng, 6, 3));
  const auto once = center(v);
  const auto twice = center(once);
  CHECK(max_abs_diff(once.values, twice.values) <= 1e-12);
}

TEST_CASE("center: random 8x3 has column sums below 1e-10") {
  Rng rng(3);
  const auto c = center(EmbeddingMatrix(random_matrix(rng, 8, 3, 10.0)));
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 8; ++i) s += c.values(i, j);
    CHECK(std::abs(s) <= 1e-10);
  }
}

TEST_CASE("symmetric_eigen: diagonal matrix") {
  const auto basis = symmetric_eigen(Matrix{{8, 0}, {0, 2}});
  CHECK(basis.eigenvalues[0] == doctest::Approx(8.0));
  CHECK(basis.eigenvalues[1] == doctest::Approx(2.0));
  CHECK(std::abs(basis.vectors(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(basis.vectors(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("symmetric_eigen: identity has all-ones spectrum") {
  const auto basis = symmetric_eigen(Matrix::identity(3));
  for (double ev : basis.eigenvalues) CHECK(ev == doctest::Approx(1.0));
}

TEST_CASE("symmetric_eigen: hand-computed 2x2") {
  // [[2,1],[1,2]]: char poly (2-l)^2 - 1, eigenvalues 3 and 1 with
  // eigenvectors (1,1)/sqrt(2) and (1,-1)/sqrt(2).
  const auto basis = symmetric_eigen(Matrix{{2, 1}, {1, 2}});
  CHECK(basis.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(basis.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(basis.vectors(0, 0) * basis.vectors(1, 0)) ==
        doctest::Approx(inv_sqrt2 * inv_sqrt2));
  // second eigenvector has opposite-sign components
  CHECK(basis.vectors(0, 1) * basis.vectors(1, 1) < 0.0);
}

TEST_CASE("symmetric_eigen rejects asymmetric input") {
  CHECK_THROWS_AS(symmetric_eigen(Matrix{{1, 2}, {0, 1}}), ContractViolation);
}

TEST_CASE("symmetric_eigen invariants on random symmetric matrices up to d=64") {
  Rng rng(17);
  for (std::size_t d : {2u, 5u, 16u, 64u}) {
    Matrix a = random_matrix(rng, d, d);
    Matrix s(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));

    const auto basis = symmetric_eigen(s);
    // unit norms and pairwise orthogonality
    for (std::size_t i = 0; i < d; ++i) {
      double nrm = 0.0;
      for (std::size_t k = 0; k < d; ++k) nrm += basis.vectors(k, i) * basis.vectors(k, i);
      CHECK(std::abs(std::sqrt(nrm) - 1.0) <= 1e-10);
      for (std::size_t j = i + 1; j < d; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += basis.vectors(k, i) * basis.vectors(k, j);
        CHECK(std::abs(dot) <= 1e-8);
      }
    }
    // descending order
    for (std::size_t i = 1; i < d; ++i)
      CHECK(basis.eigenvalues[i - 1] >= basis.eigenvalues[i]);
    // reconstruction
    Matrix lambda(d, d);
    for (std::size_t i = 0; i < d; ++i) lambda(i, i) = basis.eigenvalues[i];
    const Matrix recon = matmul(matmul(basis.vectors, lambda), transpose(basis.vectors));
    double err = 0.0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
      const double diff = recon.data()[i] - s.data()[i];
      err += diff * diff;
    }
    CHECK(std::sqrt(err) <= 1e-8);
  }
}

TEST_CASE("partition function: four-point example") {
  const EmbeddingMatrix v(kSymmetricFourPoint, true);
  const double z = partition_function({1.0, 0.0}, v);
  CHECK(z == doctest::Approx(std::exp(1.0) + std::exp(-1.0) + 2.0).epsilon(1e-12));
}

TEST_CASE("partition function: all-zero rows give N") {
  const EmbeddingMatrix v(Matrix(5, 3), true);
  CHECK(partition_function({0.0, 1.0, 0.0}, v) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("partition function matches direct-summation oracle") {
  const EmbeddingMatrix v(kAnisotropicFourPoint, true);
  const double z = partition_function({1.0, 0.0}, v);
  CHECK(z == doctest::Approx(std::exp(2.0) + std::exp(-2.0) + 2.0).epsilon(1e-12));
  CHECK(z == doctest::Approx(oracle::partition_direct({1.0, 0.0}, v.values)).epsilon(1e-12));
}

TEST_CASE("partition function rejects non-unit direction") {
  const EmbeddingMatrix v(kSymmetricFourPoint, true);
  CHECK_THROWS_AS(partition_function({2.0, 0.0}, v), ContractViolation);
}

TEST_CASE("isotropy: symmetric four-point configuration is exactly isotropic") {
  CHECK(std::abs(isotropy(EmbeddingMatrix(kSymmetricFourPoint)) - 1.0) <= 1e-12);
}

TEST_CASE("isotropy: anisotropic four-point configuration") {
  const double expected = (std::exp(1.0) + std::exp(-1.0) + 2.0) /
                          (std::exp(2.0) + std::exp(-2.0) + 2.0);
  const double got = isotropy(EmbeddingMatrix(kAnisotropicFourPoint));
  CHECK(got == doctest::Approx(expected).epsilon(1e-9));
  CHECK(got == doctest::Approx(0.5340).epsilon(1e-3));
}

TEST_CASE("isotropy: standard Gaussian clouds score high") {
  // Monte-Carlo bound from the brute-force oracle: at n=1000, d=8 the
  // min/max-Z ratio lands in [0.80, 0.89] across seeds (the spread comes
  // from empirical third/fourth moments of the sample, which no finite n
  // removes). Frozen bound: 0.78.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const Matrix v = random_matrix(rng, 1000, 8);
    const double iso = isotropy(EmbeddingMatrix(v));
    CHECK(iso >= 0.78);
    CHECK(iso <= 1.0);
  }
}

TEST_CASE("isotropy matches the brute-force oracle on random matrices") {
  Rng rng(31);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 8 + rng.below(57);   // up to 64
    const std::size_t d = 2 + rng.below(15);   // up to 16
    const Matrix v = random_matrix(rng, n, d);
    const double got = isotropy(EmbeddingMatrix(v));
    const double want = oracle::isotropy_direct(v);
    CAPTURE(trial);
    CHECK(std::abs(got - want) <= 1e-9);
  }
}

TEST_CASE("isotropy is invariant under column rotation") {
  Rng rng(41);
  const Matrix v = random_matrix(rng, 40, 6);
  // random orthogonal matrix from the eigenvectors of a random symmetric one
  Matrix a = random_matrix(rng, 6, 6);
  Matrix s(6, 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  const Matrix rot = symmetric_eigen(s).vectors;
  const double base = isotropy(EmbeddingMatrix(v));
  const double rotated = isotropy(EmbeddingMatrix(matmul(v, rot)));
  CHECK(std::abs(base - rotated) <= 1e-6);
}

TEST_CASE("isotropy of scaled data stays in [0,1]") {
  Rng rng(43);
  const Matrix v = random_matrix(rng, 30, 5);
  for (double alpha : {0.1, 0.7, 1.0, 3.0, 25.0}) {
    const double iso = isotropy(EmbeddingMatrix(scaled(v, alpha)));
    CHECK(iso >= 0.0);
    CHECK(iso <= 1.0);
  }
}

TEST_CASE("isotropy degenerate inputs") {
  CHECK_THROWS_AS(isotropy(EmbeddingMatrix(Matrix(1, 4))), DegenerateInput);
  CHECK_THROWS_AS(isotropy(EmbeddingMatrix(Matrix(8, 4))), DegenerateInput);  // all zero
}

TEST_CASE("covariance: identical rows give the zero matrix") {
  const Matrix v{{1.5, -2.0, 3.0}, {1.5, -2.0, 3.0}};
  const Matrix cov = covariance(EmbeddingMatrix(v));
  for (double x : cov.values()) CHECK(x == 0.0);
}

TEST_CASE("covariance: hand-computed 2x2") {
  const Matrix cov = covariance(EmbeddingMatrix(Matrix{{1, 1}, {-1, -1}}));
  for (double x : cov.values()) CHECK(x == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("covariance matches the two-pass oracle") {
  Rng rng(7);
  const Matrix v = random_matrix(rng, 16, 4, 3.0);
  CHECK(max_abs_diff(covariance(EmbeddingMatrix(v)), oracle::covariance_two_pass(v)) <=
        1e-12);
}

TEST_CASE("covariance needs two rows") {
  CHECK_THROWS_AS(covariance(EmbeddingMatrix(Matrix(1, 3))), DegenerateInput);
}

TEST_CASE("correlation: linearly dependent columns") {
  Matrix v(6, 2);
  Rng rng(9);
  for (std::size_t i = 0; i < 6; ++i) {
    v(i, 0) = rng.normal();
    v(i, 1) = 2.0 * v(i, 0);
  }
  const Matrix cor = correlation(EmbeddingMatrix(v));
  CHECK(std::abs(cor(0, 1) - 1.0) <= 1e-6);
  CHECK(std::abs(cor(0, 0) - 1.0) <= 1e-6);
}

TEST_CASE("correlation: orthogonal design has zero off-diagonal") {
  const Matrix v{{1, 5}, {-1, 5}, {1, -5}, {-1, -5}};
  const Matrix cor = correlation(EmbeddingMatrix(v));
  CHECK(std::abs(cor(0, 1)) <= 1e-12);
}

TEST_CASE("correlation matches the per-pair Pearson oracle") {
  Rng rng(13);
  const Matrix v = random_matrix(rng, 32, 5, 2.0);
  CHECK(max_abs_diff(correlation(EmbeddingMatrix(v)), oracle::pearson_per_pair(v)) <=
        1e-10);
}

TEST_CASE("correlation entries are bounded and constant columns are safe") {
  Matrix v(8, 3);
  Rng rng(15);
  for (std::size_t i = 0; i < 8; ++i) {
    v(i, 0) = rng.normal();
    v(i, 1) = rng.normal();
    v(i, 2) = 4.2;  // zero variance
  }
  const Matrix cor = correlation(EmbeddingMatrix(v));
  for (double x : cor.values()) {
    CHECK(x >= -1.0 - 1e-9);
    CHECK(x <= 1.0 + 1e-9);
  }
  CHECK(std::abs(cor(0, 2)) <= 1e-6);
}

TEST_CASE("correlation is invariant under positive per-column affine maps") {
  Rng rng(19);
  // Column variances around 9 keep the 1e-8 variance floor negligible
  // relative to the diagonal terms; the floor is the only non-invariant
  // ingredient.
  const Matrix v = random_matrix(rng, 32, 5, 3.0);
  Matrix w = v;
  const double slopes[5] = {0.5, 1.25, 2.0, 0.8, 1.0};
  const double shifts[5] = {-3.0, 0.0, 5.0, 0.25, -1.0};
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 5; ++j) w(i, j) = slopes[j] * v(i, j) + shifts[j];
  CHECK(max_abs_diff(correlation(EmbeddingMatrix(v)), correlation(EmbeddingMatrix(w))) <=
        1e-8);
}

TEST_CASE("whitening: already-white data stays white") {
  Rng rng(21);
  // large sample of standard normal is close to white already
  const Matrix v = random_matrix(rng, 2048, 4);
  const auto map = fit_whitening(EmbeddingMatrix(v));
  const auto out = apply_whitening(map, EmbeddingMatrix(v));
  const Matrix cov = covariance(out);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == j)
        CHECK(std::abs(cov(i, j) - 1.0) <= 1e-6);
      else
        CHECK(std::abs(cov(i, j)) <= 1e-8);
    }
}

TEST_CASE("whitening: anisotropic Gaussian becomes near-isotropic") {
  Rng rng(23);
  Matrix v(512, 2);
  for (std::size_t i = 0; i < 512; ++i) {
    v(i, 0) = 10.0 * rng.normal();  // variance 100
    v(i, 1) = rng.normal();         // variance 1
  }
  const double before = isotropy(EmbeddingMatrix(v));
  const auto map = fit_whitening(EmbeddingMatrix(v));
  const auto out = apply_whitening(map, EmbeddingMatrix(v));
  const double after = isotropy(out);
  // Oracle-derived: unit-variance projections keep ~2-5% min/max-Z spread
  // at n=512, so "perfect" here means >= 0.85 and a jump of orders of
  // magnitude over the raw data (whose ratio is ~e^-9).
  CHECK(before <= 0.01);
  CHECK(after >= 0.85);
  CHECK(after <= 1.0);
}

TEST_CASE("whitening: four-point anisotropic example becomes perfectly isotropic") {
  const auto map = fit_whitening(EmbeddingMatrix(kAnisotropicFourPoint));
  const auto out = apply_whitening(map, EmbeddingMatrix(kAnisotropicFourPoint));
  CHECK(std::abs(isotropy(out) - 1.0) <= 1e-6);
}

TEST_CASE("whitening: identity map leaves input unchanged") {
  WhiteningMap map;
  map.mean = {0.0, 0.0};
  map.transform = Matrix::identity(2);
  const EmbeddingMatrix v(kAnisotropicFourPoint);
  const auto out = apply_whitening(map, v);
  CHECK(max_abs_diff(out.values, v.values) == 0.0);
}

TEST_CASE("whitening generalizes to a held-out split of the same Gaussian") {
  Rng rng(27);
  Matrix train(1024, 3), test(1024, 3);
  auto fill = [&](Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      m(i, 0) = 7.0 * rng.normal();
      m(i, 1) = 0.5 * rng.normal();
      m(i, 2) = 2.0 * rng.normal();
    }
  };
  fill(train);
  fill(test);
  const auto map = fit_whitening(EmbeddingMatrix(train));
  const double before = isotropy(EmbeddingMatrix(test));
  const double after = isotropy(apply_whitening(map, EmbeddingMatrix(test)));
  CHECK(before <= 0.05);
  CHECK(after >= 0.85);  // oracle-derived bound at n=1024, d=3
}

TEST_CASE("whitening property: fit-then-apply zeroes off-diagonal covariance") {
  Rng rng(29);
  for (std::size_t d : {4u, 8u}) {
    const Matrix v = random_matrix(rng, 8 * d + 5, d, 3.0);
    const auto map = fit_whitening(EmbeddingMatrix(v));
    const auto out = apply_whitening(map, EmbeddingMatrix(v));
    const Matrix cov = covariance(out);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        if (i != j)
          CHECK(std::abs(cov(i, j)) <= 1e-8);
        else
          CHECK(std::abs(cov(i, j) - 1.0) <= 1e-6);
      }
    // The min/max-Z ratio at n = 8d is still sampling-noise bound; the
    // whitened cloud just has to be far more isotropic than the raw one.
    CHECK(isotropy(out) > isotropy(EmbeddingMatrix(v)));
  }
}

TEST_CASE("apply_whitening rejects dimension mismatch") {
  WhiteningMap map;
  map.mean = {0.0, 0.0};
  map.transform = Matrix::identity(2);
  CHECK_THROWS_AS(apply_whitening(map, EmbeddingMatrix(Matrix(3, 3))), ContractViolation);
}

TEST_CASE("embedding file round trip is exact") {
  Rng rng(33);
  const EmbeddingMatrix v(random_matrix(rng, 12, 5, 100.0));
  const std::string path = "test_embeddings_roundtrip.txt";
  write_embeddings(path, v);
  const auto back = read_embeddings(path);
  CHECK(back.n() == 12);
  CHECK(back.d() == 5);
  CHECK(max_abs_diff(back.values, v.values) == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("embedding file errors") {
  CHECK_THROWS_AS(read_embeddings("does_not_exist.txt"), IoError);
  const std::string path = "test_embeddings_bad.txt";
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("2 3\n1 2 3\n", f);  // truncated: one row missing
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_embeddings(path), IoError);
  std::remove(path.c_str());
}
