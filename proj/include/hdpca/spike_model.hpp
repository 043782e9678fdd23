#pragma once

// Spiked population covariance Sigma = U diag(lambda) U^T, represented by its
// eigenvalue profile and an implicit orthonormal basis. Neither Sigma nor U
// is ever formed at full size.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hdpca {

/// One spike eigenvalue: either scale * d^exponent or a fixed literal value.
class SpikeProfile {
 public:
  static SpikeProfile power(double scale, double exponent);
  static SpikeProfile literal(double value);

  /// Parses "power:<scale>:<exponent>" or "literal:<value>".
  static SpikeProfile parse(std::string_view text);

  double resolve(std::size_t d) const;

  bool is_literal() const { return literal_; }
  double scale() const { return scale_; }
  double exponent() const { return exponent_; }

  std::string to_string() const;

  friend bool operator==(const SpikeProfile&, const SpikeProfile&) = default;

 private:
  SpikeProfile(bool literal, double scale, double exponent)
      : literal_(literal), scale_(scale), exponent_(exponent) {}

  bool literal_;
  double scale_;
  double exponent_;
};

enum class BasisKind { CanonicalAxes, RandomOrthogonal };

struct BasisChoice {
  BasisKind kind = BasisKind::CanonicalAxes;
  std::uint64_t seed = 0;

  static BasisChoice canonical() { return {}; }
  static BasisChoice random_orthogonal(std::uint64_t seed) { return {BasisKind::RandomOrthogonal, seed}; }

  friend bool operator==(const BasisChoice&, const BasisChoice&) = default;
};

/// Population mean xi: zero, or the same constant in every coordinate.
struct MeanChoice {
  bool constant = false;
  double value = 0.0;

  static MeanChoice zero() { return {}; }
  static MeanChoice constant_value(double v) { return {true, v}; }
  double offset() const { return constant ? value : 0.0; }

  friend bool operator==(const MeanChoice&, const MeanChoice&) = default;
};

struct SpikeSpec {
  std::vector<SpikeProfile> spikes;
  double tail_value = 1.0;
  std::size_t n = 0;
  std::size_t d = 0;
  BasisChoice basis;
  MeanChoice mean;

  std::size_t spike_count() const { return spikes.size(); }
};

/// Throws ConfigError on any violated invariant (m >= 1, m < n, m < d,
/// positive values, non-increasing resolved eigenvalues).
void validate(const SpikeSpec& spec);

/// lambda_1..lambda_d at the spec's concrete d. Validates first.
std::vector<double> resolve_eigenvalues(const SpikeSpec& spec);

/// The orthonormal population eigenbasis U.
///
/// CanonicalAxes is the identity. RandomOrthogonal is a product of
/// min(m + 20, d) Householder reflectors with Gaussian directions drawn from
/// the basis seed, applied in O(d) per reflector.
class PopulationBasis {
 public:
  static constexpr std::size_t kExtraReflectors = 20;

  PopulationBasis(std::size_t d, std::size_t spike_count, const BasisChoice& choice);

  std::size_t dimension() const { return d_; }
  bool is_canonical() const { return reflectors_.cols() == 0; }

  /// y <- U y
  void apply(Eigen::Ref<Eigen::VectorXd> y) const;
  /// y <- U^T y; returns the coordinates of y in the population basis.
  void apply_transpose(Eigen::Ref<Eigen::VectorXd> y) const;

  /// u_k (zero-based k).
  Eigen::VectorXd direction(std::size_t k) const;
  /// [u_0 ... u_{count-1}] as a d x count matrix.
  Eigen::MatrixXd directions(std::size_t count) const;
  /// X^T u_k for k < count, as an n x count matrix.
  Eigen::MatrixXd project(const Eigen::MatrixXd& x, std::size_t count) const;

  /// Full d x d matrix; intended for small-d tests.
  Eigen::MatrixXd materialize() const;

 private:
  std::size_t d_;
  Eigen::MatrixXd reflectors_;
};

enum class LatentMode {
  /// Keep z for the spike columns only, plus the per-row tail sum of squares.
  SpikesOnly,
  /// Keep the full n x d latent matrix (diagnostic mode, d <= kMaxFullLatentDim).
  Full,
};

inline constexpr std::size_t kMaxFullLatentDim = 10000;

/// Standard-normal coordinates z_{i,k} used to build the sample.
struct LatentScores {
  Eigen::MatrixXd spikes;             // n x m
  Eigen::VectorXd tail_sum_squares;   // n, sum over k > m of z_{i,k}^2
  std::optional<Eigen::MatrixXd> full;  // n x d
};

/// d x n sample X = [X_1 ... X_n] with its generating model.
struct DataMatrix {
  Eigen::MatrixXd values;
  SpikeSpec spec;
  std::vector<double> eigenvalues;
  std::shared_ptr<const PopulationBasis> basis;
  std::optional<LatentScores> latent;

  std::size_t dimension() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t sample_size() const { return static_cast<std::size_t>(values.cols()); }
};

/// X_i = xi + sum_k lambda_k^{1/2} u_k z_{i,k}, with z drawn from stream 0 of
/// `seed`. Deterministic in (spec, seed).
DataMatrix generate_sample(const SpikeSpec& spec, std::uint64_t seed, LatentMode mode = LatentMode::SpikesOnly);

/// Wraps externally supplied values with a model (no latent scores).
DataMatrix wrap_data(Eigen::MatrixXd values, const SpikeSpec& spec);

/// n x m matrix with S_{i,j} = lambda_j^{-1/2} u_j^T (X_i - xi).
Eigen::MatrixXd population_score_matrix(const DataMatrix& data);

}  // namespace hdpca
