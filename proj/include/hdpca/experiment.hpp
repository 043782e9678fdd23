#pragma once

// Monte Carlo sweeps over dimension (fixed n) or sample size, with replicate
// streams keyed by (master seed, grid value, replicate) so that results do
// not depend on the number of workers or on scheduling.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdpca/asymptotics.hpp"
#include "hdpca/config.hpp"
#include "hdpca/limit_dist.hpp"
#include "hdpca/pca_engine.hpp"
#include "hdpca/spike_model.hpp"

namespace hdpca {

inline constexpr const char* kVersion = "0.1.0";

/// The sweep was aborted or its outputs could not be written (CLI exit 2).
class RunFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentMode { HdlssSweep, GrowingNSweep, SinglePca };

std::string to_string(ExperimentMode mode);
ExperimentMode parse_mode(std::string_view text);

/// d = max(1, round(d_scale * n^d_exponent)) for growing-n sweeps.
struct Coupling {
  double d_scale = 1.0;
  double d_exponent = 1.0;

  std::size_t dimension_for(std::size_t n) const;
};

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::HdlssSweep;
  /// Spike profiles, tail, basis and mean. n is fixed here for HDLSS sweeps,
  /// d for single PCA runs; the grid supplies the other one.
  SpikeSpec spike_template;
  std::vector<std::size_t> grid;
  Coupling coupling;
  std::size_t replicates = 200;
  std::uint64_t master_seed = 20131107;
  double guard = kDefaultGuard;
  std::filesystem::path output_dir = "hdpca-out";
  /// 0 selects std::thread::hardware_concurrency().
  std::size_t workers = 0;
  Divisor divisor = Divisor::N;
  bool center = false;
  /// Keep the full latent matrix and evaluate the three-term ratio
  /// decomposition on every replicate (requires d <= 10000).
  bool decomposition = false;

  /// n = 10, lambda_1 = d^1.6, d in {500, 5000, 50000}, M = 200.
  static ExperimentConfig hdlss_defaults();
  /// d = n, lambda_1 = n^2, n in {100, 400, 1600}, M = 200.
  static ExperimentConfig growing_n_defaults();
  static ExperimentConfig single_pca_defaults();

  /// Overlays the keys of `kv` on the defaults for its mode (or `mode` when
  /// given). Unknown keys are a ConfigError.
  static ExperimentConfig from_kv(const KeyValueConfig& kv, std::optional<ExperimentMode> mode = std::nullopt);

  KeyValueConfig to_kv() const;

  std::size_t resolved_workers() const;
};

/// SpikeSpec at one grid value (a dimension for HDLSS/single PCA, a sample
/// size for growing-n sweeps).
SpikeSpec spec_at(const ExperimentConfig& config, std::size_t grid_value);

/// Validates the config. Throws ConfigError on a broken invariant, including
/// any grid point with d / lambda_m >= 1; returns warnings for points with
/// d / lambda_m >= 0.5.
std::vector<std::string> check_config(const ExperimentConfig& config);

std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t grid_value, std::size_t replicate);

struct SpikeDiagnostics {
  std::size_t j = 0;  // one-based
  double median_ratio = 0.0;
  double rel_spread = 0.0;
  double eig_ratio = 0.0;
  double angle_rad = 0.0;
  double leakage = 0.0;
  /// sqrt(lambda_k / lambda_j) |u_hat_j^T u_k| for every other spike k.
  std::vector<double> cross_overlaps;
  std::size_t n_excluded = 0;

  // Decomposition diagnostics (when enabled).
  std::optional<double> mean_abs_noise;
  std::optional<double> max_identity_error;
  std::optional<std::size_t> bound_violations;
};

struct PhaseTiming {
  double generate_s = 0.0;
  double pca_s = 0.0;
  double diagnostics_s = 0.0;
};

struct ReplicateRecord {
  std::size_t grid_value = 0;
  std::size_t replicate = 0;
  std::vector<SpikeDiagnostics> spikes;
  PhaseTiming timing;
};

/// Generates, analyses and summarizes one replicate. Throws NumericError or
/// DomainError when the replicate cannot be evaluated.
ReplicateRecord run_replicate(const ExperimentConfig& config, std::size_t grid_value, std::size_t replicate);

struct SpikeSummary {
  std::size_t j = 0;
  std::size_t samples = 0;
  /// HDLSS: KS of the per-replicate median ratios against RLaw(n).
  std::optional<KsOutcome> ks;
  double mean_median_ratio = 0.0;
  double mean_rel_spread = 0.0;
  double mean_angle = 0.0;
  double mean_leakage = 0.0;
  double mean_eig_ratio = 0.0;
  double var_eig_ratio = 0.0;
  double mean_abs_median_dev = 0.0;  // mean |median_ratio - 1|
  double max_abs_median_dev = 0.0;
  double mean_abs_eig_dev = 0.0;     // mean |eig_ratio - 1|
  std::vector<double> mean_cross_overlaps;
  std::optional<double> mean_abs_noise;
  std::optional<double> max_identity_error;
  std::optional<std::size_t> bound_violations;
};

struct GridSummary {
  std::size_t grid_value = 0;
  std::size_t n = 0;
  std::size_t d = 0;
  double lambda_m = 0.0;
  std::size_t failures = 0;
  std::vector<SpikeSummary> spikes;
  PhaseTiming timing;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ReplicateRecord> records;
  std::vector<GridSummary> grid;
  std::vector<CheckResult> checks;
  std::vector<std::string> warnings;
  std::vector<std::string> failures;
  double total_seconds = 0.0;

  bool all_checks_passed() const;
  nlohmann::ordered_json to_json() const;
};

ExperimentReport run_hdlss_sweep(const ExperimentConfig& config);
ExperimentReport run_growing_n_sweep(const ExperimentConfig& config);
/// Dispatches on config.mode. SinglePca runs one replicate at grid[0].
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Header: grid,replicate,j,median_ratio,rel_spread,eig_ratio,angle_rad,leakage,n_excluded
void write_records_csv(const ExperimentReport& report, std::ostream& out);

/// Writes records.csv and report.json into config.output_dir.
void write_outputs(const ExperimentReport& report);

/// Score scatter export: CSV with columns sample_index,score_a,score_b for
/// one-based components a and b (projection-scale scores).
void export_scores_scatter(const Eigen::MatrixXd& x, const PcaOptions& options, std::size_t a, std::size_t b,
                           std::ostream& out);
void export_scores_scatter(const Eigen::MatrixXd& x, const PcaOptions& options, std::size_t a, std::size_t b,
                           const std::filesystem::path& out_path);

}  // namespace hdpca
