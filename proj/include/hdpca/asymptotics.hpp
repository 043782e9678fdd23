#pragma once

// Diagnostics for comparing sample and population principal component
// scores: score ratios, their exact three-term decomposition, eigenvalue
// ratios, eigenvector angles, cross-spike overlap and tail leakage.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hdpca/pca_engine.hpp"
#include "hdpca/spike_model.hpp"

namespace hdpca {

inline constexpr double kDefaultGuard = 1e-8;

struct ColumnStats {
  double median = 0.0;
  double mean = 0.0;
  /// (max - min) / median
  double relative_spread = 0.0;
};

/// Median, mean and relative spread of a non-empty set of values.
ColumnStats column_stats(std::vector<double> values);

struct ColumnSummary {
  std::size_t excluded = 0;
  /// More than half the cells were excluded; stats suppressed.
  bool degenerate = false;
  std::optional<ColumnStats> stats;
};

struct ScoreRatioTable {
  /// |S_hat_{i,j} / S_{i,j}|; NaN where excluded.
  Eigen::MatrixXd ratios;
  std::vector<std::pair<std::size_t, std::size_t>> excluded;
  std::vector<ColumnSummary> per_column;

  std::optional<double> ratio(std::size_t i, std::size_t j) const;
};

/// Cells with |S_{i,j}| < guard are excluded rather than clamped.
ScoreRatioTable score_ratio_table(const Eigen::MatrixXd& sample_scores, const Eigen::MatrixXd& population_scores,
                                  double guard = kDefaultGuard);

/// Signed ratio S_hat_{i,j} / S_{i,j} split by population direction:
/// the own-direction term, the other spikes, and the non-spike tail.
struct RatioDecomposition {
  double signal = 0.0;
  double cross_spike = 0.0;
  double noise = 0.0;
  /// Directly computed S_hat_{i,j} / S_{i,j}.
  double total = 0.0;
  /// Cauchy-Schwarz bound on noise^2:
  /// (sum_{k>m} lambda_k z_{i,k}^2)(sum_{k>m} (u_hat_j^T u_k)^2) / (lambda_hat_j z_{i,j}^2).
  double noise_bound_squared = 0.0;

  double term_sum() const { return signal + cross_spike + noise; }
};

/// Requires the full latent matrix (LatentMode::Full), zero population mean
/// and an uncentered PCA. Indices are zero-based. Throws ConfigError when the
/// latent matrix is missing, DomainError when |z_{i,j}| < guard or
/// lambda_hat_j is zero.
RatioDecomposition ratio_decomposition(const DataMatrix& data, const PcaResult& pca, std::size_t i, std::size_t j,
                                       double guard = kDefaultGuard);

/// All rows of component j at once; cells below the guard are std::nullopt.
std::vector<std::optional<RatioDecomposition>> ratio_decompositions(const DataMatrix& data, const PcaResult& pca,
                                                                    std::size_t j, double guard = kDefaultGuard);

/// lambda_hat_j / lambda_j.
double eigenvalue_ratio(const PcaResult& pca, std::span<const double> population_eigenvalues, std::size_t j);

/// A(j, k) = u_hat_j^T u_k for j < components, k < directions, evaluated as
/// v_hat_j^T (X^T u_k) / sqrt(c lambda_hat_j) unless loadings are stored.
Eigen::MatrixXd population_overlaps(const PcaResult& pca, const Eigen::MatrixXd& x, const PopulationBasis& basis,
                                    std::size_t components, std::size_t directions);

/// arccos(min(1, |u_hat_j^T u_j|)), in [0, pi/2].
double angle_to_population(const Eigen::MatrixXd& overlaps, std::size_t j);
double angle_to_population(const PcaResult& pca, const Eigen::MatrixXd& x, const PopulationBasis& basis,
                           std::size_t j);

/// sqrt(lambda_k / lambda_j) |u_hat_j^T u_k|.
double cross_spike_overlap(const Eigen::MatrixXd& overlaps, std::span<const double> population_eigenvalues,
                           std::size_t j, std::size_t k);

/// Mass of u_hat_j outside span(u_1..u_m): 1 - sum_{k<m} (u_hat_j^T u_k)^2.
double tail_leakage(const Eigen::MatrixXd& overlaps, std::size_t j, std::size_t m);

}  // namespace hdpca
