#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hdpca/cli.hpp"

using namespace hdpca;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "hdpca");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "hdpca-cli-test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("r-dist") {
  const Run r = run({"r-dist", "--n", "2", "--r", "1.0"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("0.367879") != std::string::npos);
  const Run q = run({"r-dist", "--n", "10"});
  CHECK(q.code == kExitOk);
  CHECK(q.out.find("p\tquantile") != std::string::npos);
  CHECK(run({"r-dist", "--n", "0"}).code == kExitConfig);
  CHECK(run({"r-dist", "--n", "2", "--r", "-1"}).code == kExitConfig);
}

TEST_CASE("usage and config errors") {
  CHECK(run({"hdlss-sweep", "--config", "missing.toml"}).code == kExitConfig);
  const Run bogus = run({"pca", "--bogus"});
  CHECK(bogus.code == kExitConfig);
  CHECK(bogus.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"--help"}).code == kExitOk);

  const auto cfg = scratch("bad.toml");
  std::ofstream(cfg) << "unknown.key = 3\n";
  CHECK(run({"hdlss-sweep", "--config", cfg.string()}).code == kExitConfig);
}

TEST_CASE("pca subcommand") {
  const auto input = scratch("x.csv");
  std::ofstream(input) << "3\n0\n0\n";
  const Run r = run({"pca", "--input", input.string(), "--rank", "2"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("lambda_1 = 9\n") != std::string::npos);
  CHECK(r.err.find("note: rank 2") != std::string::npos);

  const auto scores = scratch("scores.csv");
  CHECK(run({"pca", "--input", input.string(), "--scores", scores.string()}).code == kExitOk);
  std::ifstream in(scores);
  std::string line;
  std::getline(in, line);
  CHECK((line == "1" || line == "-1"));

  CHECK(run({"pca", "--input", scratch("nope.csv").string()}).code == kExitRuntime);
  const auto broken = scratch("broken.csv");
  std::ofstream(broken) << "1,2\n3\n";
  CHECK(run({"pca", "--input", broken.string()}).code == kExitRuntime);
  CHECK(run({"pca", "--input", input.string(), "--divisor", "7"}).code == kExitConfig);
}

TEST_CASE("scatter subcommand") {
  const auto input = scratch("toy.csv");
  std::ofstream(input) << "4,-2,1,3\n0.5,1,-1,0.25\n0,0,0,0\n";
  const auto out = scratch("scatter.csv");
  CHECK(run({"scatter", "--input", input.string(), "--components", "1,2", "--out", out.string()}).code == kExitOk);
  std::ifstream in(out);
  std::string header;
  std::getline(in, header);
  CHECK(header == "sample_index,score_a,score_b");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 4);
  CHECK(run({"scatter", "--input", input.string(), "--components", "1", "--out", out.string()}).code == kExitConfig);
  CHECK(run({"scatter", "--out", out.string()}).code == kExitConfig);
}

TEST_CASE("sweep subcommands write outputs") {
  const auto dir = scratch("sweep-out");
  std::filesystem::remove_all(dir);
  const auto cfg = scratch("small.toml");
  std::ofstream(cfg) << "mode = hdlss\n[grid]\nd = 500\n";
  const Run r = run({"hdlss-sweep", "--config", cfg.string(), "--replicates", "3", "--workers", "2", "--out",
                     dir.string(), "--seed", "5"});
  CHECK(r.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "records.csv"));
  CHECK(std::filesystem::exists(dir / "report.json"));

  const auto gdir = scratch("growing-out");
  const auto gcfg = scratch("growing.toml");
  std::ofstream(gcfg) << "mode = growing-n\ngrid.n = 50\n";
  const Run g = run({"growing-n-sweep", "--config", gcfg.string(), "--replicates", "2", "--out", gdir.string()});
  CHECK(g.code == kExitOk);
  CHECK(g.out.find("records:") != std::string::npos);
  // The file's mode disagrees with the subcommand.
  CHECK(run({"growing-n-sweep", "--config", cfg.string()}).code == kExitConfig);
}
