#include "hdpca/spike_model.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "hdpca/errors.hpp"
#include "hdpca/random.hpp"

namespace hdpca {

namespace {

double parse_number(std::string_view text, std::string_view context) {
  const std::string buf(text);
  char* end = nullptr;
  const double value = std::strtod(buf.c_str(), &end);
  if (buf.empty() || end != buf.c_str() + buf.size() || !std::isfinite(value)) {
    throw ConfigError("invalid number '" + buf + "' in spike profile '" + std::string(context) + "'");
  }
  return value;
}

}  // namespace

SpikeProfile SpikeProfile::power(double scale, double exponent) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("spike scale must be positive");
  if (!(exponent >= 0.0) || !std::isfinite(exponent)) throw ConfigError("spike exponent must be >= 0");
  return SpikeProfile(false, scale, exponent);
}

SpikeProfile SpikeProfile::literal(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw ConfigError("literal spike must be positive");
  return SpikeProfile(true, value, 0.0);
}

SpikeProfile SpikeProfile::parse(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = text.find(':', start);
    parts.push_back(text.substr(start, colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.size() == 3 && parts[0] == "power") {
    return power(parse_number(parts[1], text), parse_number(parts[2], text));
  }
  if (parts.size() == 2 && parts[0] == "literal") {
    return literal(parse_number(parts[1], text));
  }
  throw ConfigError("spike profile must be 'power:<scale>:<exponent>' or 'literal:<value>', got '" +
                    std::string(text) + "'");
}

double SpikeProfile::resolve(std::size_t d) const {
  if (literal_) return scale_;
  return scale_ * std::pow(static_cast<double>(d), exponent_);
}

std::string SpikeProfile::to_string() const {
  std::ostringstream out;
  out.precision(17);
  if (literal_) {
    out << "literal:" << scale_;
  } else {
    out << "power:" << scale_ << ':' << exponent_;
  }
  return out.str();
}

void validate(const SpikeSpec& spec) {
  const std::size_t m = spec.spike_count();
  if (m == 0) throw ConfigError("at least one spike is required");
  if (spec.n == 0 || spec.d == 0) throw ConfigError("n and d must be positive");
  if (m >= spec.n) throw ConfigError("spike count m must be smaller than n");
  if (m >= spec.d) throw ConfigError("spike count m must be smaller than d");
  if (!(spec.tail_value > 0.0) || !std::isfinite(spec.tail_value)) {
    throw ConfigError("tail value must be positive");
  }
  if (!std::isfinite(spec.mean.value)) throw ConfigError("mean must be finite");

  double previous = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double value = spec.spikes[j].resolve(spec.d);
    if (!(value > 0.0) || !std::isfinite(value)) {
      std::ostringstream msg;
      msg << "resolved lambda_" << j + 1 << " = " << value << " is not a positive finite number";
      throw ConfigError(msg.str());
    }
    if (j > 0 && value > previous) {
      std::ostringstream msg;
      msg << "eigenvalues not non-increasing at d = " << spec.d << ": lambda_" << j << " = " << previous
          << " < lambda_" << j + 1 << " = " << value;
      throw ConfigError(msg.str());
    }
    previous = value;
  }
  if (previous < spec.tail_value) {
    std::ostringstream msg;
    msg << "eigenvalues not non-increasing at d = " << spec.d << ": lambda_" << m << " = " << previous
        << " < tail value " << spec.tail_value;
    throw ConfigError(msg.str());
  }
}

std::vector<double> resolve_eigenvalues(const SpikeSpec& spec) {
  validate(spec);
  std::vector<double> values(spec.d, spec.tail_value);
  for (std::size_t j = 0; j < spec.spike_count(); ++j) values[j] = spec.spikes[j].resolve(spec.d);
  return values;
}

// ---------------------------------------------------------------------------
// PopulationBasis

PopulationBasis::PopulationBasis(std::size_t d, std::size_t spike_count, const BasisChoice& choice) : d_(d) {
  if (choice.kind == BasisKind::CanonicalAxes) return;
  const std::size_t count = std::min(spike_count + kExtraReflectors, d);
  reflectors_.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(count));
  CounterRng rng(choice.seed, 1);
  for (Eigen::Index l = 0; l < reflectors_.cols(); ++l) {
    double norm = 0.0;
    while (norm == 0.0) {
      for (Eigen::Index r = 0; r < reflectors_.rows(); ++r) reflectors_(r, l) = rng.normal();
      norm = reflectors_.col(l).norm();
    }
    reflectors_.col(l) /= norm;
  }
}

void PopulationBasis::apply(Eigen::Ref<Eigen::VectorXd> y) const {
  // U = H_0 H_1 ... H_{k-1}; the last reflector acts first.
  for (Eigen::Index l = reflectors_.cols() - 1; l >= 0; --l) {
    const auto w = reflectors_.col(l);
    y.noalias() -= (2.0 * w.dot(y)) * w;
  }
}

void PopulationBasis::apply_transpose(Eigen::Ref<Eigen::VectorXd> y) const {
  for (Eigen::Index l = 0; l < reflectors_.cols(); ++l) {
    const auto w = reflectors_.col(l);
    y.noalias() -= (2.0 * w.dot(y)) * w;
  }
}

Eigen::VectorXd PopulationBasis::direction(std::size_t k) const {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d_));
  e(static_cast<Eigen::Index>(k)) = 1.0;
  apply(e);
  return e;
}

Eigen::MatrixXd PopulationBasis::directions(std::size_t count) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(d_), static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) out.col(static_cast<Eigen::Index>(k)) = direction(k);
  return out;
}

Eigen::MatrixXd PopulationBasis::project(const Eigen::MatrixXd& x, std::size_t count) const {
  const auto cols = static_cast<Eigen::Index>(count);
  if (is_canonical()) return x.topRows(cols).transpose();
  return x.transpose() * directions(count);
}

Eigen::MatrixXd PopulationBasis::materialize() const { return directions(d_); }

// ---------------------------------------------------------------------------
// Sampling

DataMatrix generate_sample(const SpikeSpec& spec, std::uint64_t seed, LatentMode mode) {
  DataMatrix data;
  data.spec = spec;
  data.eigenvalues = resolve_eigenvalues(spec);
  const std::size_t n = spec.n;
  const std::size_t d = spec.d;
  const std::size_t m = spec.spike_count();
  if (mode == LatentMode::Full && d > kMaxFullLatentDim) {
    throw ConfigError("full latent retention (diagnostic mode) requires d <= " + std::to_string(kMaxFullLatentDim));
  }
  data.basis = std::make_shared<const PopulationBasis>(d, m, spec.basis);

  const auto rows = static_cast<Eigen::Index>(d);
  const auto cols = static_cast<Eigen::Index>(n);
  Eigen::VectorXd root(rows);
  for (Eigen::Index k = 0; k < rows; ++k) root(k) = std::sqrt(data.eigenvalues[static_cast<std::size_t>(k)]);

  LatentScores latent;
  latent.spikes.resize(cols, static_cast<Eigen::Index>(m));
  latent.tail_sum_squares.resize(cols);
  if (mode == LatentMode::Full) latent.full.emplace(cols, rows);

  data.values.resize(rows, cols);
  CounterRng rng(seed, 0);
  const double offset = spec.mean.offset();
  for (Eigen::Index i = 0; i < cols; ++i) {
    auto column = data.values.col(i);
    rng.fill_normal(std::span<double>(column.data(), d));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(m); ++k) latent.spikes(i, k) = column(k);
    latent.tail_sum_squares(i) = column.tail(rows - static_cast<Eigen::Index>(m)).squaredNorm();
    if (latent.full) latent.full->row(i) = column.transpose();
    column.array() *= root.array();
    if (!data.basis->is_canonical()) data.basis->apply(column);
    if (offset != 0.0) column.array() += offset;
  }
  data.latent = std::move(latent);
  return data;
}

DataMatrix wrap_data(Eigen::MatrixXd values, const SpikeSpec& spec) {
  if (static_cast<std::size_t>(values.rows()) != spec.d || static_cast<std::size_t>(values.cols()) != spec.n) {
    throw InputError("data shape does not match spec (expected d x n)");
  }
  if (!values.allFinite()) throw InputError("data contains NaN or Inf");
  DataMatrix data;
  data.eigenvalues = resolve_eigenvalues(spec);
  data.basis = std::make_shared<const PopulationBasis>(spec.d, spec.spike_count(), spec.basis);
  data.values = std::move(values);
  data.spec = spec;
  return data;
}

Eigen::MatrixXd population_score_matrix(const DataMatrix& data) {
  const std::size_t m = data.spec.spike_count();
  Eigen::MatrixXd scores = data.basis->project(data.values, m);
  const double offset = data.spec.mean.offset();
  if (offset != 0.0) {
    // u_k^T (xi * 1) for each k.
    const Eigen::VectorXd ones = Eigen::VectorXd::Constant(data.values.rows(), offset);
    const Eigen::MatrixXd shift = data.basis->project(ones, m);
    scores.rowwise() -= shift.row(0);
  }
  for (std::size_t j = 0; j < m; ++j) {
    scores.col(static_cast<Eigen::Index>(j)) /= std::sqrt(data.eigenvalues[j]);
  }
  return scores;
}

}  // namespace hdpca
