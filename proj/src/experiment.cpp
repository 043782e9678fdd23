#include "hdpca/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "hdpca/errors.hpp"
#include "hdpca/matrix_io.hpp"
#include "hdpca/random.hpp"

namespace hdpca {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "mode",          "template.n",        "template.spikes",     "template.tail",
      "template.basis", "template.mean", "grid.d",           "grid.n",              "coupling.d_scale",
      "coupling.d_exponent", "replicates", "seed",          "guard",               "output_dir",
      "workers",       "pca.divisor", "pca.center",         "diagnostics.decomposition"};
  return keys;
}

std::vector<std::size_t> parse_grid(const std::string& text, const std::string& key) {
  std::vector<std::size_t> grid;
  for (const auto& item : split_list(text)) grid.push_back(parse_size(item, key));
  return grid;
}

std::string join_grid(const std::vector<std::size_t>& grid) {
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(grid[i]);
  }
  return out;
}

BasisChoice parse_basis(const std::string& text) {
  if (text == "canonical") return BasisChoice::canonical();
  const auto parts = split_list(text, ':');
  if (parts.size() == 2 && parts[0] == "random") {
    return BasisChoice::random_orthogonal(parse_u64(parts[1], "template.basis"));
  }
  throw ConfigError("template.basis must be 'canonical' or 'random:<seed>', got '" + text + "'");
}

MeanChoice parse_mean(const std::string& text) {
  if (text == "zero") return MeanChoice::zero();
  const auto parts = split_list(text, ':');
  if (parts.size() == 2 && parts[0] == "constant") {
    return MeanChoice::constant_value(parse_double(parts[1], "template.mean"));
  }
  throw ConfigError("template.mean must be 'zero' or 'constant:<value>', got '" + text + "'");
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_variance(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = mean_of(values);
  double sum = 0.0;
  for (double v : values) sum += (v - mean) * (v - mean);
  return sum / static_cast<double>(values.size() - 1);
}

}  // namespace

std::string to_string(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::HdlssSweep:
      return "hdlss";
    case ExperimentMode::GrowingNSweep:
      return "growing-n";
    case ExperimentMode::SinglePca:
      return "single-pca";
  }
  return "unknown";
}

ExperimentMode parse_mode(std::string_view text) {
  if (text == "hdlss") return ExperimentMode::HdlssSweep;
  if (text == "growing-n") return ExperimentMode::GrowingNSweep;
  if (text == "single-pca") return ExperimentMode::SinglePca;
  throw ConfigError("mode must be hdlss, growing-n or single-pca, got '" + std::string(text) + "'");
}

std::size_t Coupling::dimension_for(std::size_t n) const {
  const double d = d_scale * std::pow(static_cast<double>(n), d_exponent);
  return static_cast<std::size_t>(std::max(1.0, std::round(d)));
}

ExperimentConfig ExperimentConfig::hdlss_defaults() {
  ExperimentConfig config;
  config.mode = ExperimentMode::HdlssSweep;
  config.spike_template.spikes = {SpikeProfile::power(1.0, 1.6)};
  config.spike_template.n = 10;
  config.grid = {500, 5000, 50000};
  return config;
}

ExperimentConfig ExperimentConfig::growing_n_defaults() {
  ExperimentConfig config;
  config.mode = ExperimentMode::GrowingNSweep;
  // With d = n, lambda_1 = d^2 = n^2 and d / lambda_1 = 1 / n.
  config.spike_template.spikes = {SpikeProfile::power(1.0, 2.0)};
  config.grid = {100, 400, 1600};
  return config;
}

ExperimentConfig ExperimentConfig::single_pca_defaults() {
  ExperimentConfig config = hdlss_defaults();
  config.mode = ExperimentMode::SinglePca;
  config.grid = {5000};
  config.replicates = 1;
  return config;
}

ExperimentConfig ExperimentConfig::from_kv(const KeyValueConfig& kv, std::optional<ExperimentMode> mode) {
  for (const auto& [key, value] : kv.entries()) {
    if (known_keys().count(key) == 0) throw ConfigError("unknown config key '" + key + "'");
  }
  const ExperimentMode file_mode = kv.get("mode") ? parse_mode(*kv.get("mode")) : mode.value_or(ExperimentMode::HdlssSweep);
  if (mode && kv.get("mode") && *mode != file_mode) {
    throw ConfigError("config mode '" + to_string(file_mode) + "' does not match command '" + to_string(*mode) + "'");
  }

  ExperimentConfig config;
  switch (file_mode) {
    case ExperimentMode::HdlssSweep:
      config = hdlss_defaults();
      break;
    case ExperimentMode::GrowingNSweep:
      config = growing_n_defaults();
      break;
    case ExperimentMode::SinglePca:
      config = single_pca_defaults();
      break;
  }

  auto& tmpl = config.spike_template;
  if (auto v = kv.get("template.spikes")) {
    tmpl.spikes.clear();
    for (const auto& item : split_list(*v)) tmpl.spikes.push_back(SpikeProfile::parse(item));
  }
  if (auto v = kv.get("template.tail")) tmpl.tail_value = parse_double(*v, "template.tail");
  if (auto v = kv.get("template.basis")) tmpl.basis = parse_basis(*v);
  if (auto v = kv.get("template.mean")) tmpl.mean = parse_mean(*v);
  if (auto v = kv.get("template.n")) tmpl.n = parse_size(*v, "template.n");

  const bool over_n = config.mode == ExperimentMode::GrowingNSweep;
  if (auto v = kv.get("grid.d")) {
    if (over_n) throw ConfigError("growing-n sweeps take grid.n, not grid.d");
    config.grid = parse_grid(*v, "grid.d");
  }
  if (auto v = kv.get("grid.n")) {
    if (!over_n) throw ConfigError("grid.n is only valid for growing-n sweeps");
    config.grid = parse_grid(*v, "grid.n");
  }
  if (auto v = kv.get("coupling.d_scale")) config.coupling.d_scale = parse_double(*v, "coupling.d_scale");
  if (auto v = kv.get("coupling.d_exponent")) config.coupling.d_exponent = parse_double(*v, "coupling.d_exponent");
  if (auto v = kv.get("replicates")) config.replicates = parse_size(*v, "replicates");
  if (auto v = kv.get("seed")) config.master_seed = parse_u64(*v, "seed");
  if (auto v = kv.get("guard")) config.guard = parse_double(*v, "guard");
  if (auto v = kv.get("output_dir")) config.output_dir = *v;
  if (auto v = kv.get("workers")) config.workers = *v == "auto" ? 0 : parse_size(*v, "workers");
  if (auto v = kv.get("pca.divisor")) {
    if (*v == "n") {
      config.divisor = Divisor::N;
    } else if (*v == "n-1") {
      config.divisor = Divisor::NMinusOne;
    } else {
      throw ConfigError("pca.divisor must be 'n' or 'n-1'");
    }
  }
  if (auto v = kv.get("pca.center")) config.center = parse_bool(*v, "pca.center");
  if (auto v = kv.get("diagnostics.decomposition")) config.decomposition = parse_bool(*v, "diagnostics.decomposition");
  return config;
}

KeyValueConfig ExperimentConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("mode", to_string(mode));
  std::string spikes;
  for (std::size_t j = 0; j < spike_template.spikes.size(); ++j) {
    if (j > 0) spikes += ',';
    spikes += spike_template.spikes[j].to_string();
  }
  kv.set("template.spikes", spikes);
  kv.set("template.tail", format_double(spike_template.tail_value));
  kv.set("template.basis", spike_template.basis.kind == BasisKind::CanonicalAxes
                               ? std::string("canonical")
                               : "random:" + std::to_string(spike_template.basis.seed));
  kv.set("template.mean", spike_template.mean.constant ? "constant:" + format_double(spike_template.mean.value)
                                                       : std::string("zero"));
  if (mode != ExperimentMode::GrowingNSweep) kv.set("template.n", std::to_string(spike_template.n));
  kv.set(mode == ExperimentMode::GrowingNSweep ? "grid.n" : "grid.d", join_grid(grid));
  if (mode == ExperimentMode::GrowingNSweep) {
    kv.set("coupling.d_scale", format_double(coupling.d_scale));
    kv.set("coupling.d_exponent", format_double(coupling.d_exponent));
  }
  kv.set("replicates", std::to_string(replicates));
  kv.set("seed", std::to_string(master_seed));
  kv.set("guard", format_double(guard));
  kv.set("output_dir", output_dir.string());
  kv.set("workers", workers == 0 ? std::string("auto") : std::to_string(workers));
  kv.set("pca.divisor", divisor == Divisor::N ? "n" : "n-1");
  kv.set("pca.center", center ? "true" : "false");
  kv.set("diagnostics.decomposition", decomposition ? "true" : "false");
  return kv;
}

std::size_t ExperimentConfig::resolved_workers() const {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

SpikeSpec spec_at(const ExperimentConfig& config, std::size_t grid_value) {
  SpikeSpec spec = config.spike_template;
  if (config.mode == ExperimentMode::GrowingNSweep) {
    spec.n = grid_value;
    spec.d = config.coupling.dimension_for(grid_value);
  } else {
    spec.d = grid_value;
  }
  return spec;
}

std::vector<std::string> check_config(const ExperimentConfig& config) {
  if (config.grid.empty()) throw ConfigError("grid must not be empty");
  for (std::size_t i = 1; i < config.grid.size(); ++i) {
    if (config.grid[i] <= config.grid[i - 1]) throw ConfigError("grid must be strictly increasing");
  }
  if (config.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (!(config.guard > 0.0)) throw ConfigError("guard must be positive");
  if (config.mode == ExperimentMode::HdlssSweep && config.spike_template.n == 0) {
    throw ConfigError("HDLSS sweeps need template.n");
  }
  if (config.decomposition && config.center) {
    throw ConfigError("the ratio decomposition requires an uncentered PCA");
  }

  std::vector<std::string> warnings;
  for (std::size_t value : config.grid) {
    const SpikeSpec spec = spec_at(config, value);
    validate(spec);
    if (config.decomposition && spec.d > kMaxFullLatentDim) {
      throw ConfigError("decomposition diagnostics need d <= " + std::to_string(kMaxFullLatentDim) +
                        ", grid point has d = " + std::to_string(spec.d));
    }
    if (config.decomposition && spec.mean.offset() != 0.0) {
      throw ConfigError("decomposition diagnostics require a zero population mean");
    }
    if (config.mode == ExperimentMode::SinglePca) continue;
    const double lambda_m = spec.spikes.back().resolve(spec.d);
    const double ratio = static_cast<double>(spec.d) / lambda_m;
    std::ostringstream msg;
    msg << "grid point " << value << ": d / lambda_m = " << ratio;
    if (ratio >= 1.0) throw ConfigError(msg.str() + " >= 1; the spike does not dominate the dimension");
    if (ratio >= 0.5) warnings.push_back(msg.str() + " >= 0.5; convergence will be slow");
  }
  return warnings;
}

std::uint64_t replicate_seed(std::uint64_t master_seed, std::size_t grid_value, std::size_t replicate) {
  return derive_seed(master_seed, {static_cast<std::uint64_t>(grid_value), static_cast<std::uint64_t>(replicate)});
}

ReplicateRecord run_replicate(const ExperimentConfig& config, std::size_t grid_value, std::size_t replicate) {
  ReplicateRecord record;
  record.grid_value = grid_value;
  record.replicate = replicate;

  const SpikeSpec spec = spec_at(config, grid_value);
  const std::size_t m = spec.spike_count();

  auto start = Clock::now();
  const DataMatrix data = generate_sample(spec, replicate_seed(config.master_seed, grid_value, replicate),
                                          config.decomposition ? LatentMode::Full : LatentMode::SpikesOnly);
  record.timing.generate_s = seconds_since(start);

  start = Clock::now();
  PcaOptions options;
  options.center = config.center;
  options.divisor = config.divisor;
  options.rank = m;
  const PcaResult pca = dual_pca(data.values, options);
  record.timing.pca_s = seconds_since(start);

  start = Clock::now();
  const Eigen::MatrixXd sample = sample_score_matrix(pca, m, ScoreScale::Projection);
  const Eigen::MatrixXd population = population_score_matrix(data);
  const ScoreRatioTable table = score_ratio_table(sample, population, config.guard);
  const Eigen::MatrixXd overlaps = population_overlaps(pca, data.values, *data.basis, m, m);

  for (std::size_t j = 0; j < m; ++j) {
    const ColumnSummary& column = table.per_column[j];
    if (!column.stats) throw NumericError("degenerate score ratio column " + std::to_string(j + 1));
    SpikeDiagnostics diag;
    diag.j = j + 1;
    diag.median_ratio = column.stats->median;
    diag.rel_spread = column.stats->relative_spread;
    diag.eig_ratio = eigenvalue_ratio(pca, data.eigenvalues, j);
    diag.angle_rad = angle_to_population(overlaps, j);
    diag.leakage = tail_leakage(overlaps, j, m);
    diag.n_excluded = column.excluded;
    for (std::size_t k = 0; k < m; ++k) {
      if (k != j) diag.cross_overlaps.push_back(cross_spike_overlap(overlaps, data.eigenvalues, j, k));
    }

    if (config.decomposition) {
      const auto rows = ratio_decompositions(data, pca, j, config.guard);
      double noise_sum = 0.0;
      double worst = 0.0;
      std::size_t used = 0;
      std::size_t violations = 0;
      for (const auto& row : rows) {
        if (!row) continue;
        ++used;
        noise_sum += std::abs(row->noise);
        worst = std::max(worst, std::abs(row->term_sum() - row->total) / std::abs(row->total));
        if (row->noise * row->noise > row->noise_bound_squared * (1.0 + 1e-9) + 1e-300) ++violations;
      }
      diag.mean_abs_noise = used > 0 ? noise_sum / static_cast<double>(used) : 0.0;
      diag.max_identity_error = worst;
      diag.bound_violations = violations;
    }

    const bool finite = std::isfinite(diag.median_ratio) && std::isfinite(diag.rel_spread) &&
                        std::isfinite(diag.eig_ratio) && std::isfinite(diag.angle_rad) && std::isfinite(diag.leakage);
    if (!finite) throw NumericError("non-finite diagnostic for spike " + std::to_string(j + 1));
    record.spikes.push_back(std::move(diag));
  }
  record.timing.diagnostics_s = seconds_since(start);
  return record;
}

namespace {

struct SweepOutcome {
  std::vector<ReplicateRecord> records;
  std::vector<std::string> failures;
  std::vector<std::size_t> failures_per_grid;
};

SweepOutcome execute(const ExperimentConfig& config) {
  const std::size_t per_grid = config.replicates;
  const std::size_t total = config.grid.size() * per_grid;
  std::vector<std::optional<ReplicateRecord>> slots(total);
  std::vector<std::string> errors(total);

  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= total) return;
      const std::size_t grid_value = config.grid[task / per_grid];
      const std::size_t replicate = task % per_grid;
      try {
        slots[task] = run_replicate(config, grid_value, replicate);
      } catch (const NumericError& e) {
        errors[task] = e.what();
      } catch (const DomainError& e) {
        errors[task] = e.what();
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        next.store(total);
      }
    }
  };

  const std::size_t workers = std::min(config.resolved_workers(), total);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  SweepOutcome outcome;
  outcome.failures_per_grid.assign(config.grid.size(), 0);
  for (std::size_t task = 0; task < total; ++task) {
    if (slots[task]) {
      outcome.records.push_back(std::move(*slots[task]));
    } else {
      ++outcome.failures_per_grid[task / per_grid];
      std::ostringstream msg;
      msg << "grid " << config.grid[task / per_grid] << " replicate " << task % per_grid << ": " << errors[task];
      outcome.failures.push_back(msg.str());
    }
  }
  if (outcome.failures.size() * 100 > total) {
    throw RunFailure("sweep aborted: " + std::to_string(outcome.failures.size()) + " of " + std::to_string(total) +
                     " replicates failed (first: " + outcome.failures.front() + ")");
  }
  return outcome;
}

GridSummary summarize(const ExperimentConfig& config, std::size_t grid_value,
                      const std::vector<const ReplicateRecord*>& records, std::size_t failures) {
  const SpikeSpec spec = spec_at(config, grid_value);
  GridSummary summary;
  summary.grid_value = grid_value;
  summary.n = spec.n;
  summary.d = spec.d;
  summary.lambda_m = spec.spikes.back().resolve(spec.d);
  summary.failures = failures;
  for (const auto* record : records) {
    summary.timing.generate_s += record->timing.generate_s;
    summary.timing.pca_s += record->timing.pca_s;
    summary.timing.diagnostics_s += record->timing.diagnostics_s;
  }

  const std::size_t m = spec.spike_count();
  for (std::size_t j = 0; j < m; ++j) {
    SpikeSummary s;
    s.j = j + 1;
    std::vector<double> medians, spreads, angles, leakages, eig, median_dev, eig_dev, noise, ident;
    std::vector<std::vector<double>> cross(m > 0 ? m - 1 : 0);
    std::size_t violations = 0;
    for (const auto* record : records) {
      const SpikeDiagnostics& diag = record->spikes[j];
      medians.push_back(diag.median_ratio);
      spreads.push_back(diag.rel_spread);
      angles.push_back(diag.angle_rad);
      leakages.push_back(diag.leakage);
      eig.push_back(diag.eig_ratio);
      median_dev.push_back(std::abs(diag.median_ratio - 1.0));
      eig_dev.push_back(std::abs(diag.eig_ratio - 1.0));
      for (std::size_t k = 0; k < diag.cross_overlaps.size(); ++k) cross[k].push_back(diag.cross_overlaps[k]);
      if (diag.mean_abs_noise) noise.push_back(*diag.mean_abs_noise);
      if (diag.max_identity_error) ident.push_back(*diag.max_identity_error);
      if (diag.bound_violations) violations += *diag.bound_violations;
    }
    s.samples = medians.size();
    s.mean_median_ratio = mean_of(medians);
    s.mean_rel_spread = mean_of(spreads);
    s.mean_angle = mean_of(angles);
    s.mean_leakage = mean_of(leakages);
    s.mean_eig_ratio = mean_of(eig);
    s.var_eig_ratio = sample_variance(eig);
    s.mean_abs_median_dev = mean_of(median_dev);
    s.max_abs_median_dev = median_dev.empty() ? 0.0 : *std::max_element(median_dev.begin(), median_dev.end());
    s.mean_abs_eig_dev = mean_of(eig_dev);
    for (const auto& c : cross) s.mean_cross_overlaps.push_back(mean_of(c));
    if (!noise.empty()) {
      s.mean_abs_noise = mean_of(noise);
      s.max_identity_error = *std::max_element(ident.begin(), ident.end());
      s.bound_violations = violations;
    }
    if (config.mode == ExperimentMode::HdlssSweep && medians.size() >= 10) {
      const RLaw law(static_cast<int>(spec.n));
      s.ks = ks_test(medians, [&law](double r) { return r > 0.0 ? r_cdf(r, law) : 0.0; });
    }
    summary.spikes.push_back(std::move(s));
  }
  return summary;
}

template <typename Getter>
CheckResult strictly_decreasing(const std::string& name, const std::vector<GridSummary>& grid, std::size_t j,
                                Getter get) {
  CheckResult check{name, true, ""};
  std::ostringstream detail;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double value = get(grid[g].spikes[j]);
    detail << (g > 0 ? ", " : "") << grid[g].grid_value << ": " << value;
    if (g > 0 && !(value < get(grid[g - 1].spikes[j]))) check.passed = false;
  }
  check.detail = detail.str();
  return check;
}

ExperimentReport run_sweep(const ExperimentConfig& config) {
  const auto start = Clock::now();
  ExperimentReport report;
  report.config = config;
  report.warnings = check_config(config);

  SweepOutcome outcome = execute(config);
  report.records = std::move(outcome.records);
  report.failures = std::move(outcome.failures);

  for (std::size_t g = 0; g < config.grid.size(); ++g) {
    std::vector<const ReplicateRecord*> subset;
    for (const auto& record : report.records) {
      if (record.grid_value == config.grid[g]) subset.push_back(&record);
    }
    report.grid.push_back(summarize(config, config.grid[g], subset, outcome.failures_per_grid[g]));
  }

  const std::size_t m = config.spike_template.spike_count();
  for (std::size_t j = 0; j < m; ++j) {
    const std::string suffix = "_spike" + std::to_string(j + 1);
    if (config.mode == ExperimentMode::HdlssSweep) {
      const auto& last = report.grid.back().spikes[j];
      if (last.ks) {
        std::ostringstream detail;
        detail << "D = " << last.ks->statistic << ", critical = " << last.ks->critical_value_01
               << ", p ~ " << last.ks->p_value_approx;
        report.checks.push_back({"ks_not_rejected_at_largest_grid" + suffix, !last.ks->rejected_at_01, detail.str()});
      } else {
        report.warnings.push_back("fewer than 10 replicates; KS test skipped");
      }
      if (report.grid.size() > 1) {
        report.checks.push_back(strictly_decreasing("rel_spread_decreasing" + suffix, report.grid, j,
                                                    [](const SpikeSummary& s) { return s.mean_rel_spread; }));
        report.checks.push_back(strictly_decreasing("angle_decreasing" + suffix, report.grid, j,
                                                    [](const SpikeSummary& s) { return s.mean_angle; }));
      }
    } else if (config.mode == ExperimentMode::GrowingNSweep && report.grid.size() > 1) {
      report.checks.push_back(strictly_decreasing("median_deviation_decreasing" + suffix, report.grid, j,
                                                  [](const SpikeSummary& s) { return s.mean_abs_median_dev; }));
    }
  }
  report.total_seconds = seconds_since(start);
  return report;
}

nlohmann::ordered_json ks_json(const KsOutcome& ks) {
  return {{"statistic", ks.statistic},
          {"sample_size", ks.sample_size},
          {"critical_value_01", ks.critical_value_01},
          {"rejected_at_01", ks.rejected_at_01},
          {"p_value_approx", ks.p_value_approx}};
}

nlohmann::ordered_json timing_json(const PhaseTiming& t) {
  return {{"generate_s", t.generate_s}, {"pca_s", t.pca_s}, {"diagnostics_s", t.diagnostics_s}};
}

}  // namespace

ExperimentReport run_hdlss_sweep(const ExperimentConfig& config) {
  if (config.mode != ExperimentMode::HdlssSweep) throw ConfigError("run_hdlss_sweep needs mode = hdlss");
  return run_sweep(config);
}

ExperimentReport run_growing_n_sweep(const ExperimentConfig& config) {
  if (config.mode != ExperimentMode::GrowingNSweep) throw ConfigError("run_growing_n_sweep needs mode = growing-n");
  return run_sweep(config);
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.mode == ExperimentMode::SinglePca) {
    ExperimentConfig single = config;
    single.grid.resize(std::min<std::size_t>(single.grid.size(), 1));
    single.replicates = 1;
    return run_sweep(single);
  }
  return run_sweep(config);
}

bool ExperimentReport::all_checks_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::ordered_json ExperimentReport::to_json() const {
  nlohmann::ordered_json out;
  out["mode"] = to_string(config.mode);
  nlohmann::ordered_json echo = nlohmann::ordered_json::object();
  const KeyValueConfig kv = config.to_kv();
  for (const auto& [key, value] : kv.entries()) echo[key] = value;
  out["config"] = echo;
  out["versions"] = {{"hdpca", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}};

  nlohmann::ordered_json grid_json = nlohmann::ordered_json::array();
  for (const auto& g : grid) {
    nlohmann::ordered_json entry;
    entry["grid_value"] = g.grid_value;
    entry["n"] = g.n;
    entry["d"] = g.d;
    entry["lambda_m"] = g.lambda_m;
    entry["d_over_lambda_m"] = static_cast<double>(g.d) / g.lambda_m;
    entry["failures"] = g.failures;
    nlohmann::ordered_json spikes = nlohmann::ordered_json::array();
    for (const auto& s : g.spikes) {
      nlohmann::ordered_json sj;
      sj["j"] = s.j;
      sj["samples"] = s.samples;
      if (s.ks) sj["ks"] = ks_json(*s.ks);
      sj["mean_median_ratio"] = s.mean_median_ratio;
      sj["mean_rel_spread"] = s.mean_rel_spread;
      sj["mean_angle_rad"] = s.mean_angle;
      sj["mean_leakage"] = s.mean_leakage;
      sj["mean_eig_ratio"] = s.mean_eig_ratio;
      sj["var_eig_ratio"] = s.var_eig_ratio;
      sj["mean_abs_median_dev"] = s.mean_abs_median_dev;
      sj["max_abs_median_dev"] = s.max_abs_median_dev;
      sj["mean_abs_eig_dev"] = s.mean_abs_eig_dev;
      sj["mean_cross_overlaps"] = s.mean_cross_overlaps;
      if (s.mean_abs_noise) {
        sj["mean_abs_noise"] = *s.mean_abs_noise;
        sj["max_identity_error"] = *s.max_identity_error;
        sj["bound_violations"] = *s.bound_violations;
      }
      spikes.push_back(sj);
    }
    entry["spikes"] = spikes;
    entry["timing"] = timing_json(g.timing);
    grid_json.push_back(entry);
  }
  out["grid"] = grid_json;

  nlohmann::ordered_json checks_json = nlohmann::ordered_json::array();
  for (const auto& c : checks) checks_json.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  out["checks"] = checks_json;
  out["warnings"] = warnings;
  out["failures"] = failures;
  out["total_seconds"] = total_seconds;
  return out;
}

void write_records_csv(const ExperimentReport& report, std::ostream& out) {
  out << "grid,replicate,j,median_ratio,rel_spread,eig_ratio,angle_rad,leakage,n_excluded\n";
  for (const auto& record : report.records) {
    for (const auto& s : record.spikes) {
      out << record.grid_value << ',' << record.replicate << ',' << s.j << ',' << format_double(s.median_ratio) << ','
          << format_double(s.rel_spread) << ',' << format_double(s.eig_ratio) << ',' << format_double(s.angle_rad)
          << ',' << format_double(s.leakage) << ',' << s.n_excluded << '\n';
    }
  }
}

void write_outputs(const ExperimentReport& report) {
  const auto& dir = report.config.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw RunFailure("cannot create output directory '" + dir.string() + "': " + ec.message());

  std::ofstream records(dir / "records.csv", std::ios::binary);
  if (!records) throw RunFailure("cannot write " + (dir / "records.csv").string());
  write_records_csv(report, records);
  records.close();
  if (!records) throw RunFailure("failed writing " + (dir / "records.csv").string());

  std::ofstream json(dir / "report.json", std::ios::binary);
  if (!json) throw RunFailure("cannot write " + (dir / "report.json").string());
  json << report.to_json().dump(2) << '\n';
  json.close();
  if (!json) throw RunFailure("failed writing " + (dir / "report.json").string());
}

void export_scores_scatter(const Eigen::MatrixXd& x, const PcaOptions& options, std::size_t a, std::size_t b,
                           std::ostream& out) {
  if (a < 1 || b < 1) throw ConfigError("component indices are one-based");
  const std::size_t needed = std::max(a, b);
  const auto full_rank = static_cast<std::size_t>(std::min(x.rows(), x.cols()));
  if (needed > full_rank) {
    throw ConfigError("component " + std::to_string(needed) + " exceeds rank " + std::to_string(full_rank));
  }
  PcaOptions opts = options;
  opts.rank = needed;
  const PcaResult pca = dual_pca(x, opts);
  const Eigen::MatrixXd scores = sample_score_matrix(pca, needed, ScoreScale::Projection);
  out << "sample_index,score_a,score_b\n";
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    out << i + 1 << ',' << format_double(scores(i, static_cast<Eigen::Index>(a - 1))) << ','
        << format_double(scores(i, static_cast<Eigen::Index>(b - 1))) << '\n';
  }
}

void export_scores_scatter(const Eigen::MatrixXd& x, const PcaOptions& options, std::size_t a, std::size_t b,
                           const std::filesystem::path& out_path) {
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw RunFailure("cannot write " + out_path.string());
  export_scores_scatter(x, options, a, b, out);
  if (!out) throw RunFailure("failed writing " + out_path.string());
}

}  // namespace hdpca
