#include "hdpca/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hdpca/errors.hpp"

namespace hdpca {

ColumnStats column_stats(std::vector<double> values) {
  if (values.empty()) throw InputError("column statistics need at least one value");
  std::sort(values.begin(), values.end());
  const std::size_t count = values.size();
  ColumnStats stats;
  stats.median = count % 2 == 1 ? values[count / 2] : 0.5 * (values[count / 2 - 1] + values[count / 2]);
  stats.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(count);
  stats.relative_spread = stats.median > 0.0 ? (values.back() - values.front()) / stats.median
                                             : std::numeric_limits<double>::infinity();
  return stats;
}

std::optional<double> ScoreRatioTable::ratio(std::size_t i, std::size_t j) const {
  const double value = ratios(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  if (std::isnan(value)) return std::nullopt;
  return value;
}

ScoreRatioTable score_ratio_table(const Eigen::MatrixXd& sample_scores, const Eigen::MatrixXd& population_scores,
                                  double guard) {
  if (sample_scores.rows() != population_scores.rows() || sample_scores.cols() != population_scores.cols()) {
    throw InputError("sample and population score matrices differ in shape");
  }
  if (!(guard > 0.0)) throw InputError("denominator guard must be positive");
  if (!sample_scores.allFinite() || !population_scores.allFinite()) throw InputError("scores must be finite");

  const Eigen::Index n = sample_scores.rows();
  const Eigen::Index m = sample_scores.cols();
  ScoreRatioTable table;
  table.ratios.resize(n, m);
  table.per_column.resize(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    std::vector<double> kept;
    auto& summary = table.per_column[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double denom = std::abs(population_scores(i, j));
      if (denom < guard) {
        table.ratios(i, j) = std::numeric_limits<double>::quiet_NaN();
        table.excluded.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        ++summary.excluded;
        continue;
      }
      table.ratios(i, j) = std::abs(sample_scores(i, j)) / denom;
      kept.push_back(table.ratios(i, j));
    }
    summary.degenerate = 2 * summary.excluded > static_cast<std::size_t>(n);
    if (!summary.degenerate && !kept.empty()) summary.stats = column_stats(std::move(kept));
  }
  return table;
}

namespace {

struct DecompositionContext {
  Eigen::VectorXd coords;   // U^T u_hat_j, length d
  Eigen::MatrixXd population;  // n x m population scores
  Eigen::VectorXd sample;   // S_hat column j
  double sample_eigenvalue = 0.0;
};

DecompositionContext prepare(const DataMatrix& data, const PcaResult& pca, std::size_t j) {
  if (!data.latent || !data.latent->full) {
    throw ConfigError("ratio decomposition needs the full latent matrix; generate with LatentMode::Full "
                      "(diagnostic mode, d <= 10000)");
  }
  if (pca.centered) throw ConfigError("ratio decomposition requires an uncentered PCA");
  if (data.spec.mean.offset() != 0.0) throw ConfigError("ratio decomposition requires a zero population mean");
  if (j >= data.spec.spike_count() || j >= pca.rank()) throw ConfigError("component index out of range");

  DecompositionContext ctx;
  ctx.sample_eigenvalue = pca.sample_eigenvalues(static_cast<Eigen::Index>(j));
  ctx.coords = loading_vector(pca, data.values, j);
  data.basis->apply_transpose(ctx.coords);
  ctx.population = population_score_matrix(data);
  ctx.sample = sample_score_matrix(pca, j + 1, ScoreScale::Projection).col(static_cast<Eigen::Index>(j));
  return ctx;
}

RatioDecomposition decompose_row(const DataMatrix& data, const DecompositionContext& ctx, std::size_t i,
                                 std::size_t j) {
  const auto& z = *data.latent->full;
  const auto row = static_cast<Eigen::Index>(i);
  const std::size_t m = data.spec.spike_count();
  const double zij = z(row, static_cast<Eigen::Index>(j));
  const double denom = std::sqrt(ctx.sample_eigenvalue) * zij;

  RatioDecomposition out;
  double tail_weighted = 0.0;
  double tail_overlap = 0.0;
  for (std::size_t k = 0; k < data.spec.d; ++k) {
    const double overlap = ctx.coords(static_cast<Eigen::Index>(k));
    const double root = std::sqrt(data.eigenvalues[k]);
    if (k == j) {
      out.signal = root / std::sqrt(ctx.sample_eigenvalue) * overlap;
    } else if (k < m) {
      out.cross_spike += root * z(row, static_cast<Eigen::Index>(k)) / denom * overlap;
    } else {
      const double zik = z(row, static_cast<Eigen::Index>(k));
      out.noise += root * zik / denom * overlap;
      tail_weighted += data.eigenvalues[k] * zik * zik;
      tail_overlap += overlap * overlap;
    }
  }
  out.total = ctx.sample(row) / ctx.population(row, static_cast<Eigen::Index>(j));
  out.noise_bound_squared = tail_weighted * tail_overlap / (ctx.sample_eigenvalue * zij * zij);
  return out;
}

}  // namespace

RatioDecomposition ratio_decomposition(const DataMatrix& data, const PcaResult& pca, std::size_t i, std::size_t j,
                                       double guard) {
  if (i >= data.sample_size()) throw ConfigError("row index out of range");
  if (data.latent && data.latent->full &&
      std::abs((*data.latent->full)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) < guard) {
    throw DomainError("population score below denominator guard");
  }
  const auto ctx = prepare(data, pca, j);
  return decompose_row(data, ctx, i, j);
}

std::vector<std::optional<RatioDecomposition>> ratio_decompositions(const DataMatrix& data, const PcaResult& pca,
                                                                    std::size_t j, double guard) {
  const auto ctx = prepare(data, pca, j);
  std::vector<std::optional<RatioDecomposition>> rows(data.sample_size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double zij = (*data.latent->full)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    if (std::abs(zij) >= guard) rows[i] = decompose_row(data, ctx, i, j);
  }
  return rows;
}

double eigenvalue_ratio(const PcaResult& pca, std::span<const double> population_eigenvalues, std::size_t j) {
  if (j >= pca.rank() || j >= population_eigenvalues.size()) throw ConfigError("component index out of range");
  if (!(population_eigenvalues[j] > 0.0)) throw DomainError("population eigenvalue must be positive");
  return pca.sample_eigenvalues(static_cast<Eigen::Index>(j)) / population_eigenvalues[j];
}

Eigen::MatrixXd population_overlaps(const PcaResult& pca, const Eigen::MatrixXd& x, const PopulationBasis& basis,
                                    std::size_t components, std::size_t directions) {
  if (components > pca.rank()) throw ConfigError("component count exceeds retained rank");
  if (directions > basis.dimension()) throw ConfigError("direction count exceeds dimension");
  const auto rows = static_cast<Eigen::Index>(components);
  for (std::size_t j = 0; j < components; ++j) {
    if (!pca.loading_present[j]) throw DomainError("overlap undefined for a zero sample eigenvalue");
  }

  if (pca.loadings) {
    return pca.loadings->leftCols(rows).transpose() * basis.directions(directions);
  }

  // Dual form: u_hat_j^T u_k = v_hat_j^T (X_c^T u_k) / sqrt(c lambda_hat_j).
  Eigen::MatrixXd projected = basis.project(x, directions);  // n x directions
  if (pca.column_mean) {
    const Eigen::MatrixXd shift = basis.project(*pca.column_mean, directions);  // 1 x directions
    projected.rowwise() -= shift.row(0);
  }
  Eigen::MatrixXd overlaps = pca.score_vectors.leftCols(rows).transpose() * projected;
  for (Eigen::Index j = 0; j < rows; ++j) {
    overlaps.row(j) /= std::sqrt(pca.divisor * pca.sample_eigenvalues(j));
  }
  return overlaps;
}

double angle_to_population(const Eigen::MatrixXd& overlaps, std::size_t j) {
  const auto idx = static_cast<Eigen::Index>(j);
  return std::acos(std::min(1.0, std::abs(overlaps(idx, idx))));
}

double angle_to_population(const PcaResult& pca, const Eigen::MatrixXd& x, const PopulationBasis& basis,
                           std::size_t j) {
  return angle_to_population(population_overlaps(pca, x, basis, j + 1, j + 1), j);
}

double cross_spike_overlap(const Eigen::MatrixXd& overlaps, std::span<const double> population_eigenvalues,
                           std::size_t j, std::size_t k) {
  const double weight = std::sqrt(population_eigenvalues[k] / population_eigenvalues[j]);
  return weight * std::abs(overlaps(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
}

double tail_leakage(const Eigen::MatrixXd& overlaps, std::size_t j, std::size_t m) {
  const auto row = static_cast<Eigen::Index>(j);
  return 1.0 - overlaps.row(row).head(static_cast<Eigen::Index>(m)).squaredNorm();
}

}  // namespace hdpca
