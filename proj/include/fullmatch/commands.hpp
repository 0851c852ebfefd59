#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "fullmatch/config.hpp"
#include "fullmatch/metrics.hpp"
#include "fullmatch/trainer.hpp"

namespace fullmatch {

/// Files written into a run directory.
namespace run_files {
inline constexpr const char* kConfig = "config.txt";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kTiming = "timing.csv";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kFinalCheckpoint = "final.ckpt";
inline constexpr const char* kAbortDump = "abort_state.txt";
}  // namespace run_files

const char* version_string();

struct RunSummary {
  double final_test_accuracy = 0.0;
  double mean_last10_test_accuracy = 0.0;
  std::size_t evaluations = 0;
};

/// Trains one configuration into out_dir and writes every run file.
/// Throws on training failure after writing the abort dump.
RunSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir);

// Each command returns a process exit status and reports on out/err.
int cmd_train(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
              std::ostream& out, std::ostream& err);
int cmd_ablate(const std::string& config_path, const std::string& out_dir, std::size_t seeds, std::ostream& out,
               std::ostream& err);
int cmd_gradcheck(std::uint64_t seed, std::size_t instances, std::ostream& out, std::ostream& err);
/// what is "curves" or "dataset"; the artifact goes to out_path, or into the run directory when empty.
int cmd_export(const std::string& run_dir, const std::string& what, const std::string& out_path, std::ostream& out,
               std::ostream& err);
/// Accuracy and per-iteration time of run b relative to run a.
int cmd_compare(const std::string& run_a, const std::string& run_b, std::ostream& out, std::ostream& err);

}  // namespace fullmatch
