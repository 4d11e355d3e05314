#include "isolab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isolab/errors.hpp"

namespace isolab {

namespace {

constexpr double kCorrelationEps = 1e-8;
constexpr double kWhiteningEps = 1e-10;

std::vector<double> column_means(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) mean[j] += m(i, j);
  for (double& v : mean) v /= static_cast<double>(m.rows());
  return mean;
}

}  // namespace

EmbeddingMatrix center(const EmbeddingMatrix& v) {
  if (v.n() < 1) throw ContractViolation("center: empty embedding matrix");
  const auto mean = column_means(v.values);
  Matrix out = v.values;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) -= mean[j];
  return EmbeddingMatrix(std::move(out), true);
}

EigenBasis symmetric_eigen(const Matrix& s) {
  const std::size_t d = s.rows();
  if (s.cols() != d) throw ContractViolation("symmetric_eigen: input not square");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (std::abs(s(i, j) - s(j, i)) > 1e-10)
        throw ContractViolation("symmetric_eigen: input not symmetric within 1e-10");

  Matrix a = s;
  Matrix q = Matrix::identity(d);

  // Cyclic Jacobi: rotate away each off-diagonal (p,r) pair in turn, sweep
  // until everything above the diagonal is <= 1e-12 in magnitude.
  constexpr double kOffTol = 1e-12;
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t r = p + 1; r < d; ++r) off = std::max(off, std::abs(a(p, r)));
    if (off <= kOffTol) break;

    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t r = p + 1; r < d; ++r) {
        const double apr = a(p, r);
        if (std::abs(apr) <= kOffTol) continue;
        const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double snv = t * c;

        for (std::size_t k = 0; k < d; ++k) {
          const double akp = a(k, p), akr = a(k, r);
          a(k, p) = c * akp - snv * akr;
          a(k, r) = snv * akp + c * akr;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = a(p, k), ark = a(r, k);
          a(p, k) = c * apk - snv * ark;
          a(r, k) = snv * apk + c * ark;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double qkp = q(k, p), qkr = q(k, r);
          q(k, p) = c * qkp - snv * qkr;
          q(k, r) = snv * qkp + c * qkr;
        }
      }
    }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenBasis basis;
  basis.eigenvalues.resize(d);
  basis.vectors = Matrix(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    basis.eigenvalues[i] = a(order[i], order[i]);
    for (std::size_t k = 0; k < d; ++k) basis.vectors(k, i) = q(k, order[i]);
  }
  return basis;
}

double log_partition_function(const std::vector<double>& c, const EmbeddingMatrix& v) {
  if (c.size() != v.d())
    throw ContractViolation("partition_function: direction dimension mismatch");
  double norm2 = 0.0;
  for (double x : c) norm2 += x * x;
  if (std::abs(std::sqrt(norm2) - 1.0) > 1e-10)
    throw ContractViolation("partition_function: direction is not unit length");

  const std::size_t n = v.n();
  std::vector<double> proj(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < v.d(); ++j) acc += c[j] * v.values(i, j);
    proj[i] = acc;
  }
  const double mx = *std::max_element(proj.begin(), proj.end());
  double acc = 0.0;
  for (double p : proj) acc += std::exp(p - mx);
  return mx + std::log(acc);
}

double partition_function(const std::vector<double>& c, const EmbeddingMatrix& v) {
  return std::exp(log_partition_function(c, v));
}

double isotropy(const EmbeddingMatrix& v) {
  if (v.n() < 2 || v.d() < 2)
    throw DegenerateInput("isotropy: need n >= 2 and d >= 2");
  const EmbeddingMatrix vc = v.centered ? v : center(v);
  const Matrix s = matmul_tn(vc.values, vc.values);

  double trace = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) trace += s(i, i);
  if (trace <= 0.0)
    throw DegenerateInput("isotropy: zero spectrum, no eigen-directions");

  const EigenBasis basis = symmetric_eigen(s);
  const std::size_t d = vc.d();

  // Z(c) != Z(-c) in general and eigenvector signs are solver-dependent, so
  // the direction set is {+c_i, -c_i} for every eigenvector.
  double lo = 0.0, hi = 0.0;
  bool first = true;
  std::vector<double> dir(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (double sign : {1.0, -1.0}) {
      for (std::size_t k = 0; k < d; ++k) dir[k] = sign * basis.vectors(k, i);
      const double lz = log_partition_function(dir, vc);
      if (first || lz < lo) lo = lz;
      if (first || lz > hi) hi = lz;
      first = false;
    }
  }
  return std::exp(lo - hi);
}

Matrix covariance(const EmbeddingMatrix& v) {
  const std::size_t n = v.n(), d = v.d();
  if (n < 2) throw DegenerateInput("covariance: need n >= 2");
  const auto mean = column_means(v.values);
  Matrix cov(d, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = v.values(r, i) - mean[i];
      for (std::size_t j = i; j < d; ++j)
        cov(i, j) += di * (v.values(r, j) - mean[j]);
    }
  }
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) *= inv;
      cov(j, i) = cov(i, j);
    }
  return cov;
}

Matrix correlation(const EmbeddingMatrix& v) {
  Matrix cov = covariance(v);
  const std::size_t d = cov.rows();
  std::vector<double> invstd(d);
  for (std::size_t i = 0; i < d; ++i)
    invstd[i] = 1.0 / std::sqrt(cov(i, i) + kCorrelationEps);
  Matrix cor(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) cor(i, j) = cov(i, j) * invstd[i] * invstd[j];
  return cor;
}

WhiteningMap fit_whitening(const EmbeddingMatrix& v) {
  WhiteningMap map;
  map.mean = column_means(v.values);
  const Matrix cov = covariance(v);
  const EigenBasis basis = symmetric_eigen(cov);
  const std::size_t d = cov.rows();
  map.transform = Matrix(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    // eps floor regularizes rank-deficient directions; tiny negative
    // eigenvalues from roundoff are clamped first.
    const double lambda = std::max(basis.eigenvalues[j], 0.0);
    const double scl = 1.0 / std::sqrt(lambda + kWhiteningEps);
    for (std::size_t k = 0; k < d; ++k)
      map.transform(k, j) = basis.vectors(k, j) * scl;
  }
  return map;
}

EmbeddingMatrix apply_whitening(const WhiteningMap& map, const EmbeddingMatrix& v) {
  const std::size_t d = v.d();
  if (map.mean.size() != d || map.transform.rows() != d)
    throw ContractViolation("apply_whitening: dimension mismatch");
  Matrix shifted = v.values;
  for (std::size_t i = 0; i < shifted.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) shifted(i, j) -= map.mean[j];
  Matrix out = matmul(shifted, map.transform);
  return EmbeddingMatrix(std::move(out), false);
}

}  // namespace isolab
