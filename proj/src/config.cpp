#include "fullmatch/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace fullmatch {

bool uses_eml(Method m) { return m == Method::fixmatch_eml || m == Method::fullmatch; }
bool uses_anl(Method m) { return m == Method::fixmatch_anl || m == Method::fullmatch; }

std::string to_string(Method m) {
  switch (m) {
    case Method::fixmatch: return "fixmatch";
    case Method::fixmatch_eml: return "fixmatch+eml";
    case Method::fixmatch_anl: return "fixmatch+anl";
    case Method::fullmatch: return "fullmatch";
  }
  return "?";
}

std::string to_string(EmlVariant v) { return v == EmlVariant::bce ? "bce" : "ce"; }

std::string to_string(NegativeScope s) {
  switch (s) {
    case NegativeScope::all: return "all";
    case NegativeScope::with_pseudo_label: return "with_pl";
    case NegativeScope::without_pseudo_label: return "without_pl";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "fixmatch") return Method::fixmatch;
  if (s == "fixmatch+eml") return Method::fixmatch_eml;
  if (s == "fixmatch+anl") return Method::fixmatch_anl;
  if (s == "fullmatch") return Method::fullmatch;
  throw InvalidArgument("unknown method '" + s + "' (fixmatch, fixmatch+eml, fixmatch+anl, fullmatch)");
}

EmlVariant parse_eml_variant(const std::string& s) {
  if (s == "bce") return EmlVariant::bce;
  if (s == "ce") return EmlVariant::ce;
  throw InvalidArgument("unknown eml variant '" + s + "' (bce, ce)");
}

NegativeScope parse_negative_scope(const std::string& s) {
  if (s == "all") return NegativeScope::all;
  if (s == "with_pl") return NegativeScope::with_pseudo_label;
  if (s == "without_pl") return NegativeScope::without_pseudo_label;
  throw InvalidArgument("unknown anl scope '" + s + "' (all, with_pl, without_pl)");
}

std::vector<std::size_t> ExperimentConfig::layer_dims() const {
  std::vector<std::size_t> dims{data.dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(data.classes);
  return dims;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return to_text(a) == to_text(b); }

namespace {

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw InvalidArgument("trailing characters in number '" + s + "'");
  return v;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw InvalidArgument("not a non-negative integer: '" + s + "'");
  return v;
}

std::vector<std::size_t> parse_dims(const std::string& s) {
  std::vector<std::size_t> out;
  if (s.empty() || s == "none") return out;
  std::istringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(static_cast<std::size_t>(parse_uint(trim(part))));
  return out;
}

std::string fmt_dims(const std::vector<std::size_t>& dims) {
  if (dims.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) out += (i ? "," : "") + std::to_string(dims[i]);
  return out;
}

struct Field {
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
Field uint_field(std::string name, T ExperimentConfig::*member) {
  return {std::move(name), [member](const ExperimentConfig& c) { return std::to_string(c.*member); },
          [member](ExperimentConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_uint(v)); }};
}

Field double_field(std::string name, double ExperimentConfig::*member) {
  return {std::move(name), [member](const ExperimentConfig& c) { return fmt_double(c.*member); },
          [member](ExperimentConfig& c, const std::string& v) { c.*member = parse_double(v); }};
}

Field augment_field(std::string name, double AugmentPolicy::*member) {
  return {std::move(name), [member](const ExperimentConfig& c) { return fmt_double(c.augment.*member); },
          [member](ExperimentConfig& c, const std::string& v) { c.augment.*member = parse_double(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      uint_field("seed", &ExperimentConfig::seed),
      {"method", [](const ExperimentConfig& c) { return to_string(c.method); },
       [](ExperimentConfig& c, const std::string& v) { c.method = parse_method(v); }},
      {"eml_variant", [](const ExperimentConfig& c) { return to_string(c.eml_variant); },
       [](ExperimentConfig& c, const std::string& v) { c.eml_variant = parse_eml_variant(v); }},
      {"anl_scope", [](const ExperimentConfig& c) { return to_string(c.anl_scope); },
       [](ExperimentConfig& c, const std::string& v) { c.anl_scope = parse_negative_scope(v); }},
      double_field("threshold", &ExperimentConfig::threshold),
      double_field("alpha", &ExperimentConfig::alpha),
      double_field("beta", &ExperimentConfig::beta),
      double_field("lr", &ExperimentConfig::lr),
      double_field("momentum", &ExperimentConfig::momentum),
      double_field("weight_decay", &ExperimentConfig::weight_decay),
      uint_field("iterations", &ExperimentConfig::iterations),
      uint_field("labeled_batch", &ExperimentConfig::labeled_batch),
      uint_field("unlabeled_ratio", &ExperimentConfig::unlabeled_ratio),
      uint_field("eval_interval", &ExperimentConfig::eval_interval),
      uint_field("checkpoint_interval", &ExperimentConfig::checkpoint_interval),
      uint_field("eval_seed", &ExperimentConfig::eval_seed),
      {"model.hidden", [](const ExperimentConfig& c) { return fmt_dims(c.hidden); },
       [](ExperimentConfig& c, const std::string& v) { c.hidden = parse_dims(v); }},
      augment_field("augment.weak_noise_sigma", &AugmentPolicy::weak_noise_sigma),
      augment_field("augment.strong_noise_sigma", &AugmentPolicy::strong_noise_sigma),
      augment_field("augment.strong_dropout_fraction", &AugmentPolicy::strong_dropout_fraction),
      augment_field("augment.strong_scale_min", &AugmentPolicy::strong_scale_min),
      augment_field("augment.strong_scale_max", &AugmentPolicy::strong_scale_max),
      {"data.kind", [](const ExperimentConfig& c) { return to_string(c.data.kind); },
       [](ExperimentConfig& c, const std::string& v) { c.data.kind = parse_dataset_kind(v); }},
      {"data.classes", [](const ExperimentConfig& c) { return std::to_string(c.data.classes); },
       [](ExperimentConfig& c, const std::string& v) { c.data.classes = parse_uint(v); }},
      {"data.samples", [](const ExperimentConfig& c) { return std::to_string(c.data.samples); },
       [](ExperimentConfig& c, const std::string& v) { c.data.samples = parse_uint(v); }},
      {"data.dim", [](const ExperimentConfig& c) { return std::to_string(c.data.dim); },
       [](ExperimentConfig& c, const std::string& v) { c.data.dim = parse_uint(v); }},
      {"data.noise", [](const ExperimentConfig& c) { return fmt_double(c.data.noise); },
       [](ExperimentConfig& c, const std::string& v) { c.data.noise = parse_double(v); }},
      {"data.separation", [](const ExperimentConfig& c) { return fmt_double(c.data.separation); },
       [](ExperimentConfig& c, const std::string& v) { c.data.separation = parse_double(v); }},
      uint_field("data.labels_per_class", &ExperimentConfig::labels_per_class),
      double_field("data.test_fraction", &ExperimentConfig::test_fraction),
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(threshold > 0.5 && threshold < 1.0)) throw ConfigError("threshold", "must lie in (0.5, 1)");
  if (!(alpha >= 0.0)) throw ConfigError("alpha", "must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("beta", "must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("lr", "must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be >= 0");
  if (labeled_batch < 1) throw ConfigError("labeled_batch", "must be >= 1");
  if (unlabeled_ratio < 1) throw ConfigError("unlabeled_ratio", "must be >= 1");
  if (eval_interval < 1) throw ConfigError("eval_interval", "must be >= 1");
  for (std::size_t h : hidden) {
    if (h < 1) throw ConfigError("model.hidden", "layer widths must be >= 1");
  }
  try {
    augment.validate();
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.substr(0, msg.find(' ')), msg);
  }
  if (data.classes < 2) throw ConfigError("data.classes", "must be >= 2");
  if (data.kind == DatasetKind::two_moons && data.classes != 2) {
    throw ConfigError("data.classes", "two_moons supports exactly 2 classes");
  }
  if (data.dim < 1 || (data.kind != DatasetKind::gaussian_blobs && data.dim < 2)) {
    throw ConfigError("data.dim", "too small for the dataset kind");
  }
  if (data.samples < 10 * data.classes) throw ConfigError("data.samples", "need at least 10 samples per class");
  if (!(data.noise >= 0.0)) throw ConfigError("data.noise", "must be >= 0");
  if (labels_per_class < 1) throw ConfigError("data.labels_per_class", "must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("data.test_fraction", "must lie in (0, 1)");
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(data.samples) * test_fraction));
  const std::size_t test_per_class = (n_test + data.classes - 1) / data.classes;
  if (n_test < data.classes) throw ConfigError("data.test_fraction", "test set cannot hold every class");
  if (labels_per_class + test_per_class > data.samples / data.classes) {
    throw ConfigError("data.labels_per_class", "labeled plus test samples exceed the dataset");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, const Field*> by_name;
  for (const auto& f : fields()) by_name[f.name] = &f;
  ExperimentConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = by_name.find(key);
    if (it == by_name.end()) throw ConfigError(key, "unknown key");
    if (!seen.insert(key).second) throw ConfigError(key, "given more than once");
    try {
      it->second->set(config, value);
    } catch (const std::exception& e) {
      throw ConfigError(key, std::string("bad value '") + value + "': " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.name + " = " + f.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.name);
  return out;
}

}  // namespace fullmatch
