#pragma once

#include <cstddef>
#include <vector>

#include "isolab/matrix.hpp"

namespace isolab {

// N x d matrix of utterance representations. Statistical operations require
// n >= 2; the `centered` flag records whether columns have zero mean.
struct EmbeddingMatrix {
  Matrix values;
  bool centered = false;

  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(Matrix m, bool is_centered = false)
      : values(std::move(m)), centered(is_centered) {}

  std::size_t n() const { return values.rows(); }
  std::size_t d() const { return values.cols(); }
};

// Eigendecomposition of a symmetric matrix: eigenvalues descending,
// eigenvectors as unit-norm columns of `vectors`.
struct EigenBasis {
  std::vector<double> eigenvalues;
  Matrix vectors;  // d x d, column i pairs with eigenvalues[i]
};

// Affine map (v - mean) * transform that makes the sample covariance of the
// fitting data the identity.
struct WhiteningMap {
  std::vector<double> mean;
  Matrix transform;  // d x d
};

// Subtracts column means. Idempotent on already-centered data.
EmbeddingMatrix center(const EmbeddingMatrix& v);

// Cyclic Jacobi rotations, sweeping until every off-diagonal magnitude is
// <= 1e-12 or 100 sweeps have run. Input must be symmetric within 1e-10.
// For PSD inputs the eigenvalues are non-negative up to roundoff; general
// symmetric inputs keep their signed spectrum so the reconstruction
// Q diag(l) Q^T always matches the input.
EigenBasis symmetric_eigen(const Matrix& s);

// Z(c, V) = sum_i exp(c . v_i) for a unit direction c. Evaluated in
// log-space with max subtraction; the returned Z is finite as long as
// log Z stays below ~709 (double overflow).
double partition_function(const std::vector<double>& c, const EmbeddingMatrix& v);
// log Z(c, V); safe for arbitrarily large projections.
double log_partition_function(const std::vector<double>& c, const EmbeddingMatrix& v);

// I(V) = min_c Z(c, V) / max_c Z(c, V) with c ranging over both signs of
// every unit eigenvector of V^T V (V centered first). Result in [0, 1];
// 1 is perfect isotropy. Throws DegenerateInput when the spectrum of the
// centered data is all zero (no meaningful eigen-directions).
double isotropy(const EmbeddingMatrix& v);

// Sample covariance with 1/(n-1) normalization.
Matrix covariance(const EmbeddingMatrix& v);

// Pearson correlation; variances are floored by eps=1e-8 so constant
// columns yield zeros instead of NaN.
Matrix correlation(const EmbeddingMatrix& v);

// PCA whitening: transform = Q diag((lambda + 1e-10)^(-1/2)) from the
// eigendecomposition of the sample covariance.
WhiteningMap fit_whitening(const EmbeddingMatrix& v);
EmbeddingMatrix apply_whitening(const WhiteningMap& map, const EmbeddingMatrix& v);

}  // namespace isolab
