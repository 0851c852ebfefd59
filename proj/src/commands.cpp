#include "fullmatch/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fullmatch/gradcheck.hpp"

#ifndef FULLMATCH_VERSION
#define FULLMATCH_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace fullmatch {

const char* version_string() { return FULLMATCH_VERSION; }

namespace {

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

nlohmann::ordered_json config_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  std::istringstream in(to_text(config));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string cell_dir_name(std::string name) {
  for (char& ch : name) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-') ch = '_';
  }
  return name;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const std::string started = timestamp();
  write_text(dir / run_files::kConfig, to_text(config));

  std::ofstream metrics_os(dir / run_files::kMetrics, std::ios::binary);
  std::ofstream timing_os(dir / run_files::kTiming, std::ios::binary);
  if (!metrics_os || !timing_os) throw std::runtime_error("cannot open metrics files in " + out_dir);
  MetricsWriter writer(metrics_os, config.data.classes, default_entropy_edges(config.data.classes).size() - 1);
  timing_os << "iteration,step_time\n" << std::setprecision(9);

  TrainCallbacks callbacks;
  callbacks.on_eval = [&](const MetricsRecord& rec) {
    writer.write(rec);
    timing_os << rec.iteration << ',' << rec.step_time << '\n';
  };
  if (config.checkpoint_interval > 0) {
    fs::create_directories(dir / "checkpoints");
    callbacks.on_checkpoint = [&](std::size_t it, const ModelParameters& p) {
      save_checkpoint((dir / "checkpoints" / ("ckpt_" + std::to_string(it) + ".txt")).string(), p);
    };
  }

  TrainResult result;
  try {
    result = train(config, callbacks);
  } catch (const TrainingAborted& e) {
    write_text(dir / run_files::kAbortDump, std::string(e.what()) + "\n");
    throw;
  }
  save_checkpoint((dir / run_files::kFinalCheckpoint).string(), result.params);

  RunSummary summary;
  summary.evaluations = result.log.size();
  if (!result.log.empty()) {
    summary.final_test_accuracy = result.log.back().test_accuracy;
    const std::size_t n = std::min<std::size_t>(10, result.log.size());
    double total = 0.0;
    for (std::size_t i = result.log.size() - n; i < result.log.size(); ++i) total += result.log[i].test_accuracy;
    summary.mean_last10_test_accuracy = total / static_cast<double>(n);
  }
  nlohmann::ordered_json sj;
  sj["method"] = to_string(config.method);
  sj["seed"] = config.seed;
  sj["iterations"] = config.iterations;
  sj["evaluations"] = summary.evaluations;
  sj["final_test_accuracy"] = summary.final_test_accuracy;
  sj["mean_last10_test_accuracy"] = summary.mean_last10_test_accuracy;
  write_text(dir / run_files::kSummary, sj.dump(2) + "\n");

  nlohmann::ordered_json manifest;
  manifest["version"] = version_string();
  manifest["metrics_schema"] = kMetricsSchema;
  manifest["seed"] = config.seed;
  manifest["started_at"] = started;
  manifest["finished_at"] = timestamp();
  manifest["config"] = config_json(config);
  manifest["outputs"] = {{"config", run_files::kConfig},   {"metrics", run_files::kMetrics},
                         {"timing", run_files::kTiming},   {"summary", run_files::kSummary},
                         {"final_checkpoint", run_files::kFinalCheckpoint},
                         {"checkpoints", config.checkpoint_interval > 0 ? "checkpoints/" : ""}};
  write_text(dir / run_files::kManifest, manifest.dump(2) + "\n");
  return summary;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
              std::ostream& out, std::ostream& err) {
  if (!fs::exists(config_path)) {
    err << "error: config file '" << config_path << "' does not exist\n";
    return 2;
  }
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "error: " << config_path << ": " << e.what() << "\n";
    return 2;
  }
  if (seed) config.seed = *seed;
  try {
    const RunSummary s = run_experiment(config, out_dir);
    out << "method=" << to_string(config.method) << " seed=" << config.seed << " iterations=" << config.iterations
        << " final_test_accuracy=" << s.final_test_accuracy
        << " mean_last10_test_accuracy=" << s.mean_last10_test_accuracy << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir, std::size_t seeds, std::ostream& out,
               std::ostream& err) {
  if (seeds < 1) {
    err << "error: --seeds must be >= 1\n";
    return 2;
  }
  ExperimentConfig base;
  try {
    base = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "error: " << config_path << ": " << e.what() << "\n";
    return 2;
  }

  struct Cell {
    std::string name;
    ExperimentConfig config;
  };
  std::vector<Cell> cells;
  const auto add = [&](std::string name, Method m, EmlVariant v, NegativeScope s, double a, double b) {
    ExperimentConfig c = base;
    c.method = m;
    c.eml_variant = v;
    c.anl_scope = s;
    c.alpha = a;
    c.beta = b;
    cells.push_back({std::move(name), c});
  };
  add("fixmatch", Method::fixmatch, EmlVariant::bce, NegativeScope::all, 1, 1);
  add("fixmatch+eml(ce)", Method::fixmatch_eml, EmlVariant::ce, NegativeScope::all, 1, 1);
  add("fixmatch+eml(bce)", Method::fixmatch_eml, EmlVariant::bce, NegativeScope::all, 1, 1);
  add("fixmatch+anl(with_pl)", Method::fixmatch_anl, EmlVariant::bce, NegativeScope::with_pseudo_label, 1, 1);
  add("fixmatch+anl(without_pl)", Method::fixmatch_anl, EmlVariant::bce, NegativeScope::without_pseudo_label, 1, 1);
  add("fixmatch+anl(all)", Method::fixmatch_anl, EmlVariant::bce, NegativeScope::all, 1, 1);
  add("fullmatch", Method::fullmatch, EmlVariant::bce, NegativeScope::all, 1, 1);
  for (double a : {0.5, 1.0, 2.0}) {
    for (double b : {0.5, 1.0, 2.0}) {
      std::ostringstream name;
      name << "fullmatch(alpha=" << a << ",beta=" << b << ")";
      add(name.str(), Method::fullmatch, EmlVariant::bce, NegativeScope::all, a, b);
    }
  }

  const fs::path root(out_dir);
  fs::create_directories(root);
  std::ofstream table(root / "ablation.csv", std::ios::binary);
  table << "cell,method,eml_variant,anl_scope,alpha,beta,seeds,mean_final_accuracy,mean_last10_accuracy";
  for (std::size_t s = 0; s < seeds; ++s) table << ",final_accuracy_seed" << base.seed + s;
  table << '\n' << std::setprecision(10);
  out << std::left << std::setw(34) << "cell" << "mean_final_acc  mean_last10_acc\n";
  for (const Cell& cell : cells) {
    std::vector<double> finals, last10;
    for (std::size_t s = 0; s < seeds; ++s) {
      ExperimentConfig c = cell.config;
      c.seed = base.seed + s;
      const fs::path dir = root / cell_dir_name(cell.name) / ("seed_" + std::to_string(c.seed));
      try {
        const RunSummary r = run_experiment(c, dir.string());
        finals.push_back(r.final_test_accuracy);
        last10.push_back(r.mean_last10_test_accuracy);
      } catch (const std::exception& e) {
        err << "error: cell " << cell.name << " seed " << c.seed << ": " << e.what() << "\n";
        return 1;
      }
    }
    const double mean_final = std::accumulate(finals.begin(), finals.end(), 0.0) / static_cast<double>(seeds);
    const double mean_last10 = std::accumulate(last10.begin(), last10.end(), 0.0) / static_cast<double>(seeds);
    table << '"' << cell.name << "\"," << to_string(cell.config.method) << ',' << to_string(cell.config.eml_variant)
          << ',' << to_string(cell.config.anl_scope) << ',' << cell.config.alpha << ',' << cell.config.beta << ','
          << seeds << ',' << mean_final << ',' << mean_last10;
    for (double f : finals) table << ',' << f;
    table << '\n';
    out << std::left << std::setw(34) << cell.name << std::setw(16) << mean_final << mean_last10 << "\n";
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t instances, std::ostream& out, std::ostream& err) {
  GradcheckReport report;
  try {
    report = run_gradient_checks(seed, instances);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  out << std::left << std::setw(32) << "check" << std::setw(12) << "instances" << std::setw(16) << "max_rel_error"
      << std::setw(12) << "tolerance" << "status\n";
  for (const auto& e : report.entries) {
    out << std::left << std::setw(32) << e.name << std::setw(12) << e.instances << std::setw(16) << std::setprecision(3)
        << std::scientific << e.max_error << std::setw(12) << e.tolerance << std::defaultfloat
        << (e.passed() ? "ok" : "FAIL") << "\n";
  }
  out << "target-class gradient negative when all non-target p < 0.5: " << report.sign_negative << "/"
      << report.sign_checked << (report.sign_negative == report.sign_checked ? " ok" : " FAIL") << "\n";
  return report.passed() ? 0 : 1;
}

int cmd_export(const std::string& run_dir, const std::string& what, const std::string& out_path, std::ostream& out,
               std::ostream& err) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir / run_files::kConfig) || !fs::exists(dir / run_files::kMetrics)) {
    err << "error: '" << run_dir << "' is not a completed run directory\n";
    return 2;
  }
  try {
    if (what == "curves") {
      const auto metrics = read_csv(dir / run_files::kMetrics);
      std::map<std::string, std::string> step_time;
      if (fs::exists(dir / run_files::kTiming)) {
        const auto timing = read_csv(dir / run_files::kTiming);
        for (std::size_t i = 1; i < timing.size(); ++i) {
          if (timing[i].size() == 2) step_time[timing[i][0]] = timing[i][1];
        }
      }
      const fs::path target = out_path.empty() ? dir / "curves.csv" : fs::path(out_path);
      std::ofstream os(target, std::ios::binary);
      if (!os) throw std::runtime_error("cannot write " + target.string());
      for (std::size_t r = 0; r < metrics.size(); ++r) {
        for (std::size_t c = 0; c < metrics[r].size(); ++c) os << (c ? "," : "") << metrics[r][c];
        os << ',' << (r == 0 ? std::string("step_time") : step_time[metrics[r][0]]) << '\n';
      }
      out << target.string() << "\n";
      return 0;
    }
    if (what == "dataset") {
      const ExperimentConfig config = load_config((dir / run_files::kConfig).string());
      const Dataset ds =
          split(generate(config.data, config.seed), config.labels_per_class, config.test_fraction, config.seed);
      const fs::path target = out_path.empty() ? dir / "dataset.csv" : fs::path(out_path);
      std::ofstream os(target, std::ios::binary);
      if (!os) throw std::runtime_error("cannot write " + target.string());
      write_dataset(os, ds);
      out << target.string() << "\n";
      return 0;
    }
    err << "error: --what must be 'curves' or 'dataset', got '" << what << "'\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_compare(const std::string& run_a, const std::string& run_b, std::ostream& out, std::ostream& err) {
  struct Run {
    std::string method;
    double final_accuracy = 0.0;
    double mean_step_time = 0.0;
  };
  const auto load = [](const fs::path& dir) {
    const auto summary = nlohmann::json::parse(read_text(dir / run_files::kSummary));
    Run r;
    r.method = summary.at("method").get<std::string>();
    r.final_accuracy = summary.at("final_test_accuracy").get<double>();
    const auto timing = read_csv(dir / run_files::kTiming);
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 1; i < timing.size(); ++i) {
      total += std::stod(timing[i][1]);
      ++n;
    }
    r.mean_step_time = n ? total / static_cast<double>(n) : 0.0;
    return r;
  };
  try {
    const Run a = load(run_a);
    const Run b = load(run_b);
    out << "run_a method=" << a.method << " final_accuracy=" << a.final_accuracy
        << " mean_step_time=" << a.mean_step_time << "\n"
        << "run_b method=" << b.method << " final_accuracy=" << b.final_accuracy
        << " mean_step_time=" << b.mean_step_time << "\n"
        << "accuracy_delta=" << b.final_accuracy - a.final_accuracy
        << " time_overhead_ratio=" << (a.mean_step_time > 0 ? b.mean_step_time / a.mean_step_time : 0.0) << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace fullmatch
