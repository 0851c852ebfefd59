#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fullmatch/commands.hpp"

using namespace fullmatch;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fullmatch_test_commands_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& extra = "") {
  const fs::path p = dir / "run.conf";
  std::ofstream(p) << "iterations = 40\neval_interval = 10\ndata.samples = 480\nmodel.hidden = 16\n" << extra;
  return p;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("train writes a complete run directory") {
  const auto dir = scratch("train");
  const auto cfg = write_config(dir, "checkpoint_interval = 20\n");
  std::ostringstream out, err;
  REQUIRE(cmd_train(cfg.string(), (dir / "run").string(), std::nullopt, out, err) == 0);
  for (const char* f : {run_files::kConfig, run_files::kManifest, run_files::kMetrics, run_files::kTiming,
                        run_files::kSummary, run_files::kFinalCheckpoint}) {
    CHECK(fs::exists(dir / "run" / f));
  }
  CHECK(fs::exists(dir / "run" / "checkpoints" / "ckpt_20.txt"));
  CHECK(line_count(slurp(dir / "run" / run_files::kMetrics)) == 5);
  const auto manifest = nlohmann::json::parse(slurp(dir / "run" / run_files::kManifest));
  CHECK(manifest.at("metrics_schema") == kMetricsSchema);
  CHECK(manifest.at("seed") == 0);
  CHECK(manifest.contains("started_at"));
  const auto summary = nlohmann::json::parse(slurp(dir / "run" / run_files::kSummary));
  CHECK(summary.at("evaluations") == 4);
  CHECK(summary.at("final_test_accuracy").get<double>() >= 0.0);
}

TEST_CASE("train is byte-reproducible and the seed flag overrides the config") {
  const auto dir = scratch("determinism");
  const auto cfg = write_config(dir);
  std::ostringstream out, err;
  REQUIRE(cmd_train(cfg.string(), (dir / "a").string(), std::nullopt, out, err) == 0);
  REQUIRE(cmd_train(cfg.string(), (dir / "b").string(), std::nullopt, out, err) == 0);
  REQUIRE(cmd_train(cfg.string(), (dir / "c").string(), 5, out, err) == 0);
  CHECK(slurp(dir / "a" / run_files::kMetrics) == slurp(dir / "b" / run_files::kMetrics));
  CHECK(slurp(dir / "a" / run_files::kFinalCheckpoint) == slurp(dir / "b" / run_files::kFinalCheckpoint));
  CHECK(slurp(dir / "a" / run_files::kMetrics) != slurp(dir / "c" / run_files::kMetrics));
  CHECK(load_config((dir / "c" / run_files::kConfig).string()).seed == 5);

  // The saved config alone reproduces the run.
  REQUIRE(cmd_train((dir / "a" / run_files::kConfig).string(), (dir / "d").string(), std::nullopt, out, err) == 0);
  CHECK(slurp(dir / "a" / run_files::kMetrics) == slurp(dir / "d" / run_files::kMetrics));
}

TEST_CASE("train errors") {
  const auto dir = scratch("errors");
  std::ostringstream out, err;
  CHECK(cmd_train((dir / "missing.conf").string(), (dir / "r").string(), std::nullopt, out, err) != 0);
  CHECK(err.str().find("missing.conf") != std::string::npos);

  std::ostringstream err2;
  const auto bad = dir / "bad.conf";
  std::ofstream(bad) << "threshold = 2\n";
  CHECK(cmd_train(bad.string(), (dir / "r").string(), std::nullopt, out, err2) != 0);
  CHECK(err2.str().find("threshold") != std::string::npos);
}

TEST_CASE("ablate smoke grid") {
  const auto dir = scratch("ablate");
  const auto cfg = dir / "abl.conf";
  std::ofstream(cfg) << "iterations = 10\neval_interval = 5\ndata.samples = 240\nmodel.hidden = 8\n";
  std::ostringstream out, err;
  REQUIRE(cmd_ablate(cfg.string(), (dir / "out").string(), 1, out, err) == 0);
  const auto table = slurp(dir / "out" / "ablation.csv");
  CHECK(line_count(table) == 17);
  CHECK(table.find("nan") == std::string::npos);
  CHECK(table.find("\"fixmatch+eml(ce)\"") != std::string::npos);
  CHECK(table.find("\"fullmatch(alpha=2,beta=0.5)\"") != std::string::npos);
}

TEST_CASE("gradcheck command") {
  std::ostringstream out, err;
  CHECK(cmd_gradcheck(3, 6, out, err) == 0);
  CHECK(out.str().find("FAIL") == std::string::npos);
  CHECK(out.str().find("eml") != std::string::npos);
}

TEST_CASE("export curves and dataset") {
  const auto dir = scratch("export");
  const auto cfg = write_config(dir);
  std::ostringstream out, err;
  REQUIRE(cmd_train(cfg.string(), (dir / "run").string(), std::nullopt, out, err) == 0);

  REQUIRE(cmd_export((dir / "run").string(), "curves", (dir / "curves.csv").string(), out, err) == 0);
  const auto curves = slurp(dir / "curves.csv");
  CHECK(line_count(curves) == 5);
  CHECK(curves.substr(0, curves.find('\n')).find(",step_time") != std::string::npos);

  REQUIRE(cmd_export((dir / "run").string(), "dataset", (dir / "data.csv").string(), out, err) == 0);
  const auto text = slurp(dir / "data.csv");
  std::istringstream is(text);
  const auto ds = read_dataset(is);
  std::ostringstream again;
  write_dataset(again, ds);
  CHECK(again.str() == text);
  CHECK(ds.indices(Split::labeled).size() == 16);

  const auto empty = scratch("export_empty");
  std::ostringstream err2;
  CHECK(cmd_export(empty.string(), "curves", "", out, err2) != 0);
  CHECK(cmd_export((dir / "run").string(), "weights", "", out, err2) != 0);
}

TEST_CASE("compare reports accuracy delta and overhead") {
  const auto dir = scratch("compare");
  const auto fix = write_config(dir, "method = fixmatch\n");
  std::ostringstream out, err;
  REQUIRE(cmd_train(fix.string(), (dir / "a").string(), std::nullopt, out, err) == 0);
  std::ostringstream report;
  REQUIRE(cmd_compare((dir / "a").string(), (dir / "a").string(), report, err) == 0);
  CHECK(report.str().find("accuracy_delta=0") != std::string::npos);
  CHECK(report.str().find("time_overhead_ratio=1") != std::string::npos);
  CHECK(cmd_compare((dir / "nope").string(), (dir / "a").string(), report, err) != 0);
}

TEST_CASE("command-line binary") {
  const char* cli = std::getenv("FULLMATCH_CLI");
  if (cli == nullptr) {
    MESSAGE("FULLMATCH_CLI not set, skipping");
    return;
  }
  const auto dir = scratch("cli");
  const auto cfg = write_config(dir);
  const std::string exe = std::string("\"") + cli + "\"";
  CHECK(std::system((exe + " train --config " + cfg.string() + " --out " + (dir / "run").string() + " > /dev/null").c_str()) == 0);
  CHECK(fs::exists(dir / "run" / run_files::kMetrics));
  CHECK(std::system((exe + " export --run " + (dir / "run").string() + " --what curves > /dev/null").c_str()) == 0);
  CHECK(fs::exists(dir / "run" / "curves.csv"));
  CHECK(std::system((exe + " gradcheck --seed 1 --instances 3 > /dev/null").c_str()) == 0);
  CHECK(std::system((exe + " train --config /nonexistent.conf --out " + (dir / "x").string() + " 2> /dev/null").c_str()) != 0);
  CHECK(std::system((exe + " frobnicate 2> /dev/null").c_str()) != 0);
}
