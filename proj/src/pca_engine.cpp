#include "hdpca/pca_engine.hpp"

#include <algorithm>
#include <cmath>

#include "hdpca/errors.hpp"
#include "hdpca/random.hpp"

namespace hdpca {

namespace {

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // matching columns
};

EigenPairs descending(const Eigen::VectorXd& ascending_values, const Eigen::MatrixXd& ascending_vectors,
                      Eigen::Index keep) {
  const Eigen::Index total = ascending_values.size();
  EigenPairs out;
  out.values.resize(keep);
  out.vectors.resize(ascending_vectors.rows(), keep);
  for (Eigen::Index j = 0; j < keep; ++j) {
    out.values(j) = ascending_values(total - 1 - j);
    out.vectors.col(j) = ascending_vectors.col(total - 1 - j);
  }
  return out;
}

EigenPairs full_eigensolve(const Eigen::MatrixXd& x, double divisor, Eigen::Index keep) {
  const Eigen::Index n = x.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / divisor);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw NumericError("symmetric eigensolver did not converge");
  return descending(solver.eigenvalues(), solver.eigenvectors(), keep);
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& block) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(block);
  return qr.householderQ() * Eigen::MatrixXd::Identity(block.rows(), block.cols());
}

// Block subspace iteration with Rayleigh-Ritz on G = X^T X / c, applied
// without forming G. Returns nothing if the leading `keep` Ritz pairs do not
// reach the residual tolerance within the iteration budget.
std::optional<EigenPairs> subspace_eigensolve(const Eigen::MatrixXd& x, double divisor, Eigen::Index keep) {
  constexpr int kMaxIterations = 60;
  constexpr double kTolerance = 1e-12;
  constexpr Eigen::Index kOversample = 10;

  const Eigen::Index n = x.cols();
  const Eigen::Index block = std::min(n, keep + kOversample);
  auto apply_gram = [&](const Eigen::MatrixXd& q) -> Eigen::MatrixXd {
    const Eigen::MatrixXd xq = x * q;
    return (x.transpose() * xq) / divisor;
  };

  Eigen::MatrixXd start(n, block);
  CounterRng rng(0x5EEDC0DEULL, 0);
  for (Eigen::Index c = 0; c < block; ++c)
    for (Eigen::Index r = 0; r < n; ++r) start(r, c) = rng.normal();

  Eigen::MatrixXd q = orthonormal_basis(apply_gram(start));
  for (int it = 0; it < kMaxIterations; ++it) {
    const Eigen::MatrixXd gq = apply_gram(q);
    Eigen::MatrixXd projected = q.transpose() * gq;
    projected = 0.5 * (projected + projected.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(projected);
    if (small.info() != Eigen::Success) return std::nullopt;
    EigenPairs ritz = descending(small.eigenvalues(), small.eigenvectors(), block);
    const Eigen::MatrixXd vectors = q * ritz.vectors;
    const Eigen::MatrixXd image = gq * ritz.vectors;

    const double top = std::max(ritz.values(0), 0.0);
    if (top == 0.0) {
      return EigenPairs{Eigen::VectorXd::Zero(keep), vectors.leftCols(keep)};
    }
    bool converged = true;
    for (Eigen::Index j = 0; j < keep && converged; ++j) {
      const double residual = (image.col(j) - ritz.values(j) * vectors.col(j)).norm();
      converged = residual <= kTolerance * top;
    }
    if (converged) {
      return EigenPairs{ritz.values.head(keep), vectors.leftCols(keep)};
    }
    q = orthonormal_basis(gq);
  }
  return std::nullopt;
}

bool prefer_subspace(Eigen::Index n, Eigen::Index keep) { return n >= 128 && 4 * (keep + 10) <= n; }

void normalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-12) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

PcaResult dual_pca(const Eigen::MatrixXd& x, const PcaOptions& options) {
  const Eigen::Index d = x.rows();
  const Eigen::Index n = x.cols();
  if (d < 1 || n < 1) throw InputError("data matrix must have at least one row and one column");
  if (!x.allFinite()) throw InputError("data matrix contains NaN or Inf");

  const auto full_rank = static_cast<std::size_t>(std::min(n, d));
  const std::size_t rank = options.rank.value_or(full_rank);
  if (rank < 1 || rank > full_rank) {
    throw ConfigError("rank must be between 1 and min(n, d) = " + std::to_string(full_rank));
  }

  double divisor = static_cast<double>(n);
  if (options.divisor == Divisor::NMinusOne) {
    if (n < 2) throw ConfigError("divisor n-1 requires n >= 2");
    divisor = static_cast<double>(n - 1);
  }

  PcaResult result;
  result.divisor = divisor;
  result.centered = options.center;

  Eigen::MatrixXd centered_copy;
  if (options.center) {
    result.column_mean = x.rowwise().mean();
    centered_copy = x.colwise() - *result.column_mean;
  }
  const Eigen::MatrixXd& data = options.center ? centered_copy : x;

  const auto keep = static_cast<Eigen::Index>(rank);
  std::optional<EigenPairs> pairs;
  if (prefer_subspace(n, keep)) pairs = subspace_eigensolve(data, divisor, keep);
  if (!pairs) pairs = full_eigensolve(data, divisor, keep);

  result.sample_eigenvalues = pairs->values.cwiseMax(0.0);
  result.score_vectors = std::move(pairs->vectors);
  for (Eigen::Index j = 0; j < keep; ++j) normalize_sign(result.score_vectors.col(j));

  const double top = result.sample_eigenvalues(0);
  result.loading_present.resize(rank);
  for (std::size_t j = 0; j < rank; ++j) {
    result.loading_present[j] = top > 0.0 && result.sample_eigenvalues(static_cast<Eigen::Index>(j)) >
                                                 kZeroEigenvalueFraction * top;
  }

  if (options.want_loadings) {
    Eigen::MatrixXd loadings = Eigen::MatrixXd::Zero(d, keep);
    for (Eigen::Index j = 0; j < keep; ++j) {
      if (!result.loading_present[static_cast<std::size_t>(j)]) continue;
      const double norm = std::sqrt(divisor * result.sample_eigenvalues(j));
      loadings.col(j).noalias() = data * result.score_vectors.col(j);
      loadings.col(j) /= norm;
    }
    result.loadings = std::move(loadings);
  }
  return result;
}

Eigen::VectorXd loading_vector(const PcaResult& result, const Eigen::MatrixXd& x, std::size_t j) {
  if (j >= result.rank()) throw ConfigError("component index exceeds retained rank");
  if (!result.loading_present[j]) throw DomainError("loading undefined for a zero sample eigenvalue");
  const auto col = static_cast<Eigen::Index>(j);
  if (result.loadings) return result.loadings->col(col);
  Eigen::VectorXd u = x * result.score_vectors.col(col);
  if (result.column_mean) u -= result.score_vectors.col(col).sum() * *result.column_mean;
  u /= std::sqrt(result.divisor * result.sample_eigenvalues(col));
  return u;
}

Eigen::MatrixXd sample_score_matrix(const PcaResult& result, std::size_t m, ScoreScale scale) {
  if (m > result.rank()) throw ConfigError("requested score count exceeds retained rank");
  Eigen::MatrixXd scores = result.score_vectors.leftCols(static_cast<Eigen::Index>(m));
  if (scale == ScoreScale::Projection) scores *= std::sqrt(result.divisor);
  return scores;
}

PcaResult align_signs(PcaResult result, const PopulationBasis& basis, std::size_t spike_count) {
  if (!result.loadings) throw ConfigError("sign alignment requires stored loadings");
  const std::size_t count = std::min(result.rank(), spike_count);
  for (std::size_t j = 0; j < count; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    Eigen::VectorXd coords = result.loadings->col(col);
    basis.apply_transpose(coords);
    if (coords(col) < 0.0) {
      result.loadings->col(col) *= -1.0;
      result.score_vectors.col(col) *= -1.0;
    }
  }
  return result;
}

}  // namespace hdpca
