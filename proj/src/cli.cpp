#include "hdpca/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

#include "hdpca/errors.hpp"
#include "hdpca/experiment.hpp"
#include "hdpca/limit_dist.hpp"
#include "hdpca/matrix_io.hpp"

namespace hdpca {

namespace {

struct SweepFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> workers;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> replicates;
};

void add_sweep_flags(CLI::App* cmd, SweepFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Key-value config file");
  cmd->add_option("--seed", flags.seed, "Master seed (overrides config)");
  cmd->add_option("--workers", flags.workers, "Worker threads or 'auto' (overrides HDPCA_WORKERS and config)");
  cmd->add_option("--out", flags.out_dir, "Output directory (overrides config)");
  cmd->add_option("--replicates", flags.replicates, "Replicates per grid point (overrides config)");
}

std::size_t parse_workers(const std::string& text, std::string_view source) {
  return text == "auto" ? 0 : parse_size(text, source);
}

ExperimentConfig build_config(const SweepFlags& flags, ExperimentMode mode) {
  KeyValueConfig kv;
  if (!flags.config_path.empty()) kv = KeyValueConfig::load(flags.config_path);
  ExperimentConfig config = ExperimentConfig::from_kv(kv, mode);
  if (config.mode != mode) throw ConfigError("config mode does not match the subcommand");
  if (const char* env = std::getenv("HDPCA_WORKERS"); env != nullptr && *env != '\0') {
    config.workers = parse_workers(env, "HDPCA_WORKERS");
  }
  if (flags.seed) config.master_seed = *flags.seed;
  if (flags.workers) config.workers = parse_workers(*flags.workers, "--workers");
  if (flags.out_dir) config.output_dir = *flags.out_dir;
  if (flags.replicates) config.replicates = *flags.replicates;
  return config;
}

void print_summary(const ExperimentReport& report, std::ostream& out) {
  const bool over_n = report.config.mode == ExperimentMode::GrowingNSweep;
  out << (over_n ? "n" : "d") << "\tj\tmedian_ratio\trel_spread\teig_ratio\tangle_rad\tleakage\tks_D\tks_reject\n";
  for (const auto& g : report.grid) {
    for (const auto& s : g.spikes) {
      out << g.grid_value << '\t' << s.j << '\t' << s.mean_median_ratio << '\t' << s.mean_rel_spread << '\t'
          << s.mean_eig_ratio << '\t' << s.mean_angle << '\t' << s.mean_leakage << '\t';
      if (s.ks) {
        out << s.ks->statistic << '\t' << (s.ks->rejected_at_01 ? "yes" : "no");
      } else {
        out << "-\t-";
      }
      out << '\n';
    }
  }
  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
  for (const auto& c : report.checks) out << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
  out << "records: " << (report.config.output_dir / "records.csv").string() << '\n';
}

int run_sweep_command(const SweepFlags& flags, ExperimentMode mode, std::ostream& out) {
  const ExperimentConfig config = build_config(flags, mode);
  const ExperimentReport report = run_experiment(config);
  write_outputs(report);
  print_summary(report, out);
  return report.all_checks_passed() ? kExitOk : kExitCheckFailed;
}

PcaOptions pca_options(const std::string& divisor, bool center) {
  PcaOptions options;
  options.center = center;
  if (divisor == "n") {
    options.divisor = Divisor::N;
  } else if (divisor == "n-1") {
    options.divisor = Divisor::NMinusOne;
  } else {
    throw ConfigError("--divisor must be 'n' or 'n-1'");
  }
  return options;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-form PCA and Monte Carlo checks of high-dimensional PC score asymptotics", "hdpca"};
  app.require_subcommand(1);

  SweepFlags hdlss_flags;
  auto* hdlss = app.add_subcommand("hdlss-sweep", "Sweep the dimension d at fixed n");
  add_sweep_flags(hdlss, hdlss_flags);

  SweepFlags growing_flags;
  auto* growing = app.add_subcommand("growing-n-sweep", "Sweep the sample size n with d = d(n)");
  add_sweep_flags(growing, growing_flags);

  std::string pca_input;
  std::optional<std::size_t> pca_rank;
  std::string pca_divisor = "n";
  bool pca_center = false;
  bool pca_header = false;
  std::string pca_scores;
  auto* pca = app.add_subcommand("pca", "Dual PCA of a CSV matrix (rows = dimensions, columns = samples)");
  pca->add_option("--input", pca_input, "CSV input")->required();
  pca->add_option("--rank", pca_rank, "Components to retain");
  pca->add_option("--divisor", pca_divisor, "Covariance divisor: n or n-1");
  pca->add_flag("--center", pca_center, "Subtract the row means first");
  pca->add_flag("--header", pca_header, "Skip the first input line");
  pca->add_option("--scores", pca_scores, "Write projection-scale scores to this CSV");

  std::string scatter_input;
  std::string scatter_config;
  std::string scatter_components = "1,2";
  std::string scatter_out;
  std::optional<std::uint64_t> scatter_seed;
  std::string scatter_divisor = "n";
  bool scatter_center = false;
  bool scatter_header = false;
  auto* scatter = app.add_subcommand("scatter", "Export a two-component score scatter as CSV");
  auto* scatter_in_opt = scatter->add_option("--input", scatter_input, "CSV input");
  scatter->add_option("--config", scatter_config, "Generate data from this config's template at its first grid point")
      ->excludes(scatter_in_opt);
  scatter->add_option("--components", scatter_components, "One-based component pair, e.g. 1,2");
  scatter->add_option("--out", scatter_out, "Output CSV")->required();
  scatter->add_option("--seed", scatter_seed, "Sample seed when generating from a config");
  scatter->add_option("--divisor", scatter_divisor, "Covariance divisor: n or n-1");
  scatter->add_flag("--center", scatter_center, "Subtract the row means first");
  scatter->add_flag("--header", scatter_header, "Skip the first input line");

  int rdist_n = 0;
  std::vector<double> rdist_r;
  std::vector<double> rdist_p;
  auto* rdist = app.add_subcommand("r-dist", "Tabulate the CDF and quantiles of R = sqrt(n / chi2_n)");
  rdist->add_option("--n", rdist_n, "Degrees of freedom")->required();
  rdist->add_option("--r", rdist_r, "Evaluate the CDF at these r");
  rdist->add_option("--p", rdist_p, "Evaluate quantiles at these probabilities");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitConfig;
  }

  try {
    if (*hdlss) return run_sweep_command(hdlss_flags, ExperimentMode::HdlssSweep, out);
    if (*growing) return run_sweep_command(growing_flags, ExperimentMode::GrowingNSweep, out);

    if (*pca) {
      const Eigen::MatrixXd x = read_matrix_csv(pca_input, pca_header);
      PcaOptions options = pca_options(pca_divisor, pca_center);
      if (pca_rank) {
        const auto full_rank = static_cast<std::size_t>(std::min(x.rows(), x.cols()));
        if (*pca_rank > full_rank) {
          err << "note: rank " << *pca_rank << " exceeds min(n, d) = " << full_rank << "; using " << full_rank << '\n';
        }
        options.rank = std::min(*pca_rank, full_rank);
      }
      const PcaResult result = dual_pca(x, options);
      out << "d = " << x.rows() << ", n = " << x.cols() << ", divisor = " << result.divisor
          << (result.centered ? ", centered" : "") << '\n';
      out << std::setprecision(12);
      for (std::size_t j = 0; j < result.rank(); ++j) {
        out << "lambda_" << j + 1 << " = " << result.sample_eigenvalues(static_cast<Eigen::Index>(j)) << '\n';
      }
      if (!pca_scores.empty()) {
        std::ofstream scores(pca_scores, std::ios::binary);
        if (!scores) throw RunFailure("cannot write " + pca_scores);
        write_matrix_csv(scores, sample_score_matrix(result, result.rank(), ScoreScale::Projection));
      }
      return kExitOk;
    }

    if (*scatter) {
      const auto parts = split_list(scatter_components);
      if (parts.size() != 2) throw ConfigError("--components expects two indices, e.g. 1,2");
      const std::size_t a = parse_size(parts[0], "--components");
      const std::size_t b = parse_size(parts[1], "--components");
      Eigen::MatrixXd x;
      if (!scatter_input.empty()) {
        x = read_matrix_csv(scatter_input, scatter_header);
      } else if (!scatter_config.empty()) {
        const ExperimentConfig config = ExperimentConfig::from_kv(KeyValueConfig::load(scatter_config));
        const SpikeSpec spec = spec_at(config, config.grid.front());
        x = generate_sample(spec, scatter_seed.value_or(config.master_seed)).values;
      } else {
        throw ConfigError("scatter needs --input or --config");
      }
      export_scores_scatter(x, pca_options(scatter_divisor, scatter_center), a, b, std::filesystem::path(scatter_out));
      out << "wrote " << x.cols() << " rows to " << scatter_out << '\n';
      return kExitOk;
    }

    if (*rdist) {
      const RLaw law(rdist_n);
      out << std::setprecision(12);
      if (rdist_r.empty() && rdist_p.empty()) rdist_p = {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};
      if (!rdist_r.empty()) {
        out << "r\tcdf\n";
        for (double r : rdist_r) out << r << '\t' << r_cdf(r, law) << '\n';
      }
      if (!rdist_p.empty()) {
        out << "p\tquantile\n";
        for (double p : rdist_p) out << p << '\t' << r_quantile(p, law) << '\n';
      }
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "argument error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace hdpca
