#pragma once

// Sample PCA of a d x n data matrix through the n x n Gram matrix
// G = X^T X / c. The d x d sample covariance is never formed.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

#include "hdpca/spike_model.hpp"

namespace hdpca {

enum class Divisor { N, NMinusOne };

struct PcaOptions {
  bool center = false;
  Divisor divisor = Divisor::N;
  bool want_loadings = false;
  /// Number of components to retain; defaults to min(n, d).
  std::optional<std::size_t> rank;
};

struct PcaResult {
  Eigen::VectorXd sample_eigenvalues;  // r, non-increasing, >= 0
  Eigen::MatrixXd score_vectors;       // n x r, orthonormal columns v_j
  std::optional<Eigen::MatrixXd> loadings;  // d x r, column j = u_j (zero when absent)
  std::vector<bool> loading_present;   // r flags; false for numerically zero eigenvalues
  double divisor = 1.0;
  bool centered = false;
  std::optional<Eigen::VectorXd> column_mean;  // d, when centered

  std::size_t rank() const { return static_cast<std::size_t>(sample_eigenvalues.size()); }
};

/// Eigenvalues below this fraction of the leading one are treated as zero
/// when recovering loadings.
inline constexpr double kZeroEigenvalueFraction = 1e-12;

/// Eigenpairs of G = X^T X / c (after optional row-mean centering of X).
/// Throws InputError for non-finite input, ConfigError for an invalid rank.
PcaResult dual_pca(const Eigen::MatrixXd& x, const PcaOptions& options = {});

/// Sample loading u_j = X v_j / sqrt(c * lambda_j), computed from the data
/// (or read from stored loadings). Throws DomainError when lambda_j is zero.
Eigen::VectorXd loading_vector(const PcaResult& result, const Eigen::MatrixXd& x, std::size_t j);

enum class ScoreScale {
  /// lambda_j^{-1/2} u_j^T X_i = sqrt(c) v_{i,j}: the scale on which sample
  /// and population scores are comparable.
  Projection,
  /// The unit-norm right singular vector v_j itself.
  UnitNorm,
};

/// n x m matrix of sample scores, column j taken from v_j.
/// Throws ConfigError when m exceeds the retained rank.
Eigen::MatrixXd sample_score_matrix(const PcaResult& result, std::size_t m,
                                    ScoreScale scale = ScoreScale::Projection);

/// Flips each (u_j, v_j) pair jointly so that u_j^T u_j(population) >= 0,
/// for j < min(rank, spike count). Requires stored loadings.
PcaResult align_signs(PcaResult result, const PopulationBasis& basis, std::size_t spike_count);

}  // namespace hdpca
