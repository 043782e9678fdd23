#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hdpca/errors.hpp"
#include "hdpca/experiment.hpp"
#include "hdpca/random.hpp"
#include "support/oracles.hpp"

using namespace hdpca;

namespace {

std::string records_csv(const ExperimentReport& report) {
  std::ostringstream out;
  write_records_csv(report, out);
  return out.str();
}

ExperimentConfig small_hdlss() {
  auto c = ExperimentConfig::hdlss_defaults();
  c.grid = {500, 2000};
  c.replicates = 12;
  c.workers = 1;
  return c;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) rows.push_back(split_list(line));
  return rows;
}

}  // namespace

TEST_CASE("single-replicate sweeps are deterministic") {
  auto c = ExperimentConfig::hdlss_defaults();
  c.grid = {500};
  c.replicates = 1;
  const auto a = run_hdlss_sweep(c);
  const auto b = run_hdlss_sweep(c);
  REQUIRE(a.records.size() == 1);
  CHECK(records_csv(a) == records_csv(b));
  const auto rows = parse_csv(records_csv(a));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"grid", "replicate", "j", "median_ratio", "rel_spread", "eig_ratio",
                                            "angle_rad", "leakage", "n_excluded"});
  CHECK(rows[1][0] == "500");

  auto g = ExperimentConfig::growing_n_defaults();
  g.grid = {100};
  g.replicates = 1;
  CHECK(records_csv(run_growing_n_sweep(g)) == records_csv(run_growing_n_sweep(g)));
}

TEST_CASE("records do not depend on the worker count") {
  auto c = small_hdlss();
  const std::string one = records_csv(run_hdlss_sweep(c));
  c.workers = 3;
  CHECK(records_csv(run_hdlss_sweep(c)) == one);
  c.master_seed += 1;
  CHECK(records_csv(run_hdlss_sweep(c)) != one);
}

TEST_CASE("replicate seeds and grid specs") {
  CHECK(replicate_seed(1, 500, 0) != replicate_seed(1, 500, 1));
  CHECK(replicate_seed(1, 500, 0) != replicate_seed(1, 5000, 0));
  CHECK(replicate_seed(1, 500, 0) != replicate_seed(2, 500, 0));

  const auto g = ExperimentConfig::growing_n_defaults();
  const SpikeSpec spec = spec_at(g, 400);
  CHECK(spec.n == 400);
  CHECK(spec.d == 400);
  CHECK(resolve_eigenvalues(spec)[0] == doctest::Approx(160000.0));
}

TEST_CASE("run_replicate diagnostics") {
  auto c = ExperimentConfig::hdlss_defaults();
  const ReplicateRecord r = run_replicate(c, 5000, 3);
  REQUIRE(r.spikes.size() == 1);
  const auto& s = r.spikes[0];
  CHECK(s.j == 1);
  CHECK(s.median_ratio > 0.3);
  CHECK(s.median_ratio < 3.0);
  CHECK(s.rel_spread < 0.1);
  CHECK(s.angle_rad >= 0.0);
  CHECK(s.leakage >= -1e-12);
  CHECK(s.leakage < 0.05);
  CHECK_FALSE(s.mean_abs_noise);

  // Two spikes: cross overlaps reported for the other spike.
  c.spike_template.spikes = {SpikeProfile::power(1, 1.8), SpikeProfile::power(1, 1.5)};
  const ReplicateRecord two = run_replicate(c, 2000, 0);
  REQUIRE(two.spikes.size() == 2);
  CHECK(two.spikes[0].cross_overlaps.size() == 1);
  CHECK(two.spikes[0].cross_overlaps[0] < 0.5);
}

TEST_CASE("decomposition diagnostics through the runner") {
  auto c = ExperimentConfig::hdlss_defaults();
  c.grid = {500, 5000};
  c.replicates = 20;
  c.decomposition = true;
  const auto report = run_hdlss_sweep(c);
  for (const auto& rec : report.records) {
    REQUIRE(rec.spikes[0].max_identity_error);
    CHECK(*rec.spikes[0].max_identity_error < 1e-10);
    CHECK(*rec.spikes[0].bound_violations == 0);
  }
  REQUIRE(report.grid.size() == 2);
  CHECK(*report.grid[1].spikes[0].mean_abs_noise < *report.grid[0].spikes[0].mean_abs_noise);
}

TEST_CASE("report contents") {
  auto c = small_hdlss();
  c.replicates = 15;
  const auto report = run_hdlss_sweep(c);
  REQUIRE(report.grid.size() == 2);
  const auto& top = report.grid.back().spikes[0];
  CHECK(top.samples == 15);
  REQUIRE(top.ks);
  CHECK(top.ks->sample_size == 15);
  const auto json = report.to_json();
  CHECK(json.contains("config"));
  CHECK(json["grid"].size() == 2);
  CHECK(json["checks"].is_array());
  CHECK(json["versions"]["hdpca"] == kVersion);

  const auto dir = std::filesystem::temp_directory_path() / "hdpca-test-outputs";
  std::filesystem::remove_all(dir);
  auto with_dir = report;
  with_dir.config.output_dir = dir;
  write_outputs(with_dir);
  CHECK(std::filesystem::exists(dir / "records.csv"));
  CHECK(std::filesystem::exists(dir / "report.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("invalid configs are rejected before running") {
  auto c = small_hdlss();
  c.spike_template.spikes = {SpikeProfile::power(1.0, 0.5)};
  CHECK_THROWS_AS(run_hdlss_sweep(c), ConfigError);
  auto g = ExperimentConfig::growing_n_defaults();
  CHECK_THROWS_AS(run_hdlss_sweep(g), ConfigError);
}

TEST_CASE("export_scores_scatter") {
  SUBCASE("rank-2 toy data") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(5, 4);
    x.row(0) << 4, -2, 1, 3;
    x.row(1) << 0.5, 1, -1, 0.25;
    std::ostringstream out;
    export_scores_scatter(x, PcaOptions{}, 1, 2, out);
    const auto rows = parse_csv(out.str());
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == std::vector<std::string>{"sample_index", "score_a", "score_b"});
    const Eigen::MatrixXd s = sample_score_matrix(dual_pca(x, PcaOptions{.rank = 2}), 2);
    for (int i = 0; i < 4; ++i) {
      CHECK(rows[i + 1][0] == std::to_string(i + 1));
      CHECK(std::stod(rows[i + 1][1]) == s(i, 0));
      CHECK(std::stod(rows[i + 1][2]) == s(i, 1));
    }
    std::ostringstream same;
    export_scores_scatter(x, PcaOptions{}, 1, 1, same);
    const auto same_rows = parse_csv(same.str());
    for (std::size_t r = 1; r < same_rows.size(); ++r) CHECK(same_rows[r][1] == same_rows[r][2]);
    std::ostringstream bad;
    CHECK_THROWS_AS(export_scores_scatter(x, PcaOptions{}, 1, 5, bad), ConfigError);
    CHECK_THROWS_AS(export_scores_scatter(x, PcaOptions{}, 0, 1, bad), ConfigError);
  }
  SUBCASE("two groups separate along the leading score") {
    // Group means differ along one direction; noise is isotropic. Scores are
    // unit-variance per component, so cluster on the leading score alone.
    constexpr int n = 40;
    constexpr int d = 2000;
    CounterRng rng(17, 0);
    Eigen::MatrixXd x(d, n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) x(k, i) = rng.normal();
      x(0, i) += i < n / 2 ? 60.0 : -60.0;
    }
    std::ostringstream out;
    export_scores_scatter(x, PcaOptions{.center = true, .rank = {}}, 1, 1, out);
    const auto rows = parse_csv(out.str());
    std::vector<std::pair<double, double>> pts;
    for (std::size_t r = 1; r < rows.size(); ++r) pts.emplace_back(std::stod(rows[r][1]), std::stod(rows[r][2]));
    const auto labels = oracle::two_means(pts);
    int agree = 0;
    for (int i = 0; i < n; ++i) agree += labels[i] == (i < n / 2 ? labels[0] : 1 - labels[0]) ? 1 : 0;
    // Chance agreement is about one half.
    CHECK(agree >= n - 2);
  }
}
