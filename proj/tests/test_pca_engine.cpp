#include <doctest.h>

#include <cmath>

#include "hdpca/errors.hpp"
#include "hdpca/pca_engine.hpp"
#include "hdpca/random.hpp"
#include "hdpca/spike_model.hpp"
#include "support/oracles.hpp"

using namespace hdpca;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index d, Eigen::Index n, std::uint64_t seed) {
  CounterRng rng(seed, 3);
  Eigen::MatrixXd x(d, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < d; ++r) x(r, c) = rng.normal();
  return x;
}

oracle::Matrix to_rows(const Eigen::MatrixXd& x) {
  oracle::Matrix rows(static_cast<std::size_t>(x.rows()), std::vector<double>(static_cast<std::size_t>(x.cols())));
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) rows[r][c] = x(r, c);
  return rows;
}

}  // namespace

TEST_CASE("dual_pca on tiny inputs") {
  SUBCASE("single column") {
    Eigen::MatrixXd x(3, 1);
    x << 3, 0, 0;
    PcaOptions options;
    options.want_loadings = true;
    const PcaResult r = dual_pca(x, options);
    REQUIRE(r.rank() == 1);
    CHECK(r.sample_eigenvalues(0) == doctest::Approx(9.0));
    CHECK(std::abs(r.score_vectors(0, 0)) == doctest::Approx(1.0));
    REQUIRE(r.loadings);
    CHECK(std::abs((*r.loadings)(0, 0)) == doctest::Approx(1.0));
    CHECK((*r.loadings)(1, 0) == 0.0);
    const Eigen::MatrixXd s = sample_score_matrix(r, 1, ScoreScale::UnitNorm);
    CHECK(std::abs(s(0, 0)) == doctest::Approx(1.0));
  }
  SUBCASE("2 x 2 identity with divisor n") {
    const PcaResult r = dual_pca(Eigen::MatrixXd::Identity(2, 2));
    CHECK(r.divisor == 2.0);
    CHECK(r.sample_eigenvalues(0) == doctest::Approx(0.5));
    CHECK(r.sample_eigenvalues(1) == doctest::Approx(0.5));
  }
  SUBCASE("divisor n-1 and centering") {
    Eigen::MatrixXd x(1, 3);
    x << 1, 2, 6;
    PcaOptions options;
    options.center = true;
    options.divisor = Divisor::NMinusOne;
    const PcaResult r = dual_pca(x, options);
    // Sample variance of (1, 2, 6).
    CHECK(r.sample_eigenvalues(0) == doctest::Approx(7.0));
    REQUIRE(r.column_mean);
    CHECK((*r.column_mean)(0) == doctest::Approx(3.0));
  }
}

TEST_CASE("dual_pca errors and flags") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
  x(1, 1) = std::nan("");
  CHECK_THROWS_AS(dual_pca(x), InputError);
  CHECK_THROWS_AS(dual_pca(Eigen::MatrixXd(0, 0)), InputError);

  PcaOptions bad_rank;
  bad_rank.rank = 5;
  CHECK_THROWS_AS(dual_pca(Eigen::MatrixXd::Identity(3, 3), bad_rank), ConfigError);

  PcaOptions n_minus_one;
  n_minus_one.divisor = Divisor::NMinusOne;
  CHECK_THROWS_AS(dual_pca(Eigen::MatrixXd::Ones(3, 1), n_minus_one), ConfigError);

  // Rank-1 data: the second loading is flagged absent.
  Eigen::MatrixXd rank_one(3, 2);
  rank_one << 1, 2, 0, 0, 0, 0;
  PcaOptions options;
  options.want_loadings = true;
  const PcaResult r = dual_pca(rank_one, options);
  CHECK(r.loading_present[0]);
  CHECK_FALSE(r.loading_present[1]);
  CHECK(r.sample_eigenvalues(1) >= 0.0);
  CHECK_THROWS_AS(loading_vector(r, rank_one, 1), DomainError);
  CHECK_THROWS_AS(sample_score_matrix(r, 3), ConfigError);
}

TEST_CASE("dual_pca matches a direct d x d Jacobi oracle") {
  int checked = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto d = static_cast<Eigen::Index>(1 + t % 30);
    const auto n = static_cast<Eigen::Index>(2 + (t / 3) % 9);
    const Eigen::MatrixXd x = random_matrix(d, n, 1000 + t);
    PcaOptions options;
    options.center = (t % 2) == 1;
    options.divisor = (t / 2) % 2 == 0 ? Divisor::N : Divisor::NMinusOne;
    options.want_loadings = true;
    const PcaResult r = dual_pca(x, options);

    Eigen::MatrixXd xc = x;
    if (options.center) xc.colwise() -= x.rowwise().mean();
    const double divisor = options.divisor == Divisor::N ? static_cast<double>(n) : static_cast<double>(n - 1);
    const auto direct = oracle::jacobi_eigen(oracle::outer_covariance(to_rows(xc), divisor));

    const double top = direct.values[0];
    for (std::size_t j = 0; j < r.rank(); ++j) {
      const double expected = direct.values[j];
      if (expected <= 1e-10 * top) continue;
      CHECK(r.sample_eigenvalues(static_cast<Eigen::Index>(j)) == doctest::Approx(expected).epsilon(1e-9));
      // Skip loading comparison for (near-)repeated eigenvalues.
      const bool isolated = (j == 0 || direct.values[j - 1] - expected > 1e-6 * top) &&
                            (j + 1 >= direct.values.size() || expected - direct.values[j + 1] > 1e-6 * top);
      if (!isolated) continue;
      REQUIRE(r.loading_present[j]);
      double dot = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) dot += (*r.loadings)(k, static_cast<Eigen::Index>(j)) * direct.vectors[j][k];
      const double sign = dot >= 0 ? 1.0 : -1.0;
      double err = 0.0;
      for (Eigen::Index k = 0; k < d; ++k)
        err = std::max(err, std::abs((*r.loadings)(k, static_cast<Eigen::Index>(j)) - sign * direct.vectors[j][k]));
      CHECK(err < 1e-8);
      ++checked;
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("subspace iteration path agrees with the full solve") {
  // n = 256 with rank 3 takes the partial path.
  SpikeSpec spec;
  spec.spikes = {SpikeProfile::literal(4000.0), SpikeProfile::literal(900.0), SpikeProfile::literal(300.0)};
  spec.n = 256;
  spec.d = 256;
  const DataMatrix data = generate_sample(spec, 8);
  PcaOptions partial;
  partial.rank = 3;
  const PcaResult a = dual_pca(data.values, partial);
  const PcaResult full = dual_pca(data.values);
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(a.sample_eigenvalues(j) == doctest::Approx(full.sample_eigenvalues(j)).epsilon(1e-10));
    CHECK(std::abs(a.score_vectors.col(j).dot(full.score_vectors.col(j))) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("score vectors are orthonormal and sign-normalized") {
  const Eigen::MatrixXd x = random_matrix(40, 8, 77);
  const PcaResult r = dual_pca(x);
  const Eigen::MatrixXd vtv = r.score_vectors.transpose() * r.score_vectors;
  CHECK((vtv - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);
  for (Eigen::Index j = 0; j < 8; ++j) {
    for (Eigen::Index i = 0; i < 8; ++i) {
      if (std::abs(r.score_vectors(i, j)) > 1e-12) {
        CHECK(r.score_vectors(i, j) > 0);
        break;
      }
    }
  }
  for (Eigen::Index j = 1; j < 8; ++j) CHECK(r.sample_eigenvalues(j) <= r.sample_eigenvalues(j - 1));
}

TEST_CASE("sample_score_matrix scales") {
  const Eigen::MatrixXd x = random_matrix(12, 6, 4);
  const PcaResult r = dual_pca(x);
  CHECK(sample_score_matrix(r, r.rank(), ScoreScale::UnitNorm) == r.score_vectors);
  const Eigen::MatrixXd proj = sample_score_matrix(r, 2);
  // lambda_j^{-1/2} u_j^T X_i
  for (std::size_t j = 0; j < 2; ++j) {
    const Eigen::VectorXd u = loading_vector(r, x, j);
    const Eigen::VectorXd direct = x.transpose() * u / std::sqrt(r.sample_eigenvalues(static_cast<Eigen::Index>(j)));
    CHECK((proj.col(static_cast<Eigen::Index>(j)) - direct).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("sample scores track population scores as d grows") {
  double previous = 1.0;
  for (std::size_t d : {50u, 5000u}) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SpikeSpec spec;
      spec.spikes = {SpikeProfile::power(1.0, 1.6)};
      spec.n = 10;
      spec.d = d;
      const DataMatrix data = generate_sample(spec, seed);
      const Eigen::VectorXd s_hat = sample_score_matrix(dual_pca(data.values), 1).col(0);
      const Eigen::VectorXd s = population_score_matrix(data).col(0);
      const double corr = std::abs(s_hat.dot(s)) / (s_hat.norm() * s.norm());
      worst = std::max(worst, 1.0 - corr);
    }
    CHECK(worst < previous);
    previous = worst;
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("align_signs") {
  SpikeSpec spec;
  spec.spikes = {SpikeProfile::literal(500.0)};
  spec.n = 5;
  spec.d = 20;
  const DataMatrix data = generate_sample(spec, 3);
  PcaOptions options;
  options.want_loadings = true;
  PcaResult r = dual_pca(data.values, options);
  // Force a negative overlap.
  if ((*r.loadings)(0, 0) > 0) {
    r.loadings->col(0) *= -1;
    r.score_vectors.col(0) *= -1;
  }
  const double before = (*r.loadings)(0, 0);
  const PcaResult aligned = align_signs(r, *data.basis, 1);
  CHECK((*aligned.loadings)(0, 0) == doctest::Approx(-before));
  CHECK(aligned.score_vectors.col(0) == -r.score_vectors.col(0));
  const PcaResult again = align_signs(aligned, *data.basis, 1);
  CHECK(again.score_vectors == aligned.score_vectors);
  CHECK(*again.loadings == *aligned.loadings);

  PcaResult bare = dual_pca(data.values);
  CHECK_THROWS(align_signs(bare, *data.basis, 1));
}
