#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fullmatch/augment.hpp"
#include "fullmatch/data.hpp"
#include "fullmatch/labeling.hpp"
#include "fullmatch/losses.hpp"

namespace fullmatch {

enum class Method { fixmatch, fixmatch_eml, fixmatch_anl, fullmatch };

bool uses_eml(Method m);
bool uses_anl(Method m);

/// Error in a configuration file; key() names the offending key when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : "config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Every experiment knob. Defaults are the desk-scale reference setup.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  Method method = Method::fullmatch;
  EmlVariant eml_variant = EmlVariant::bce;
  NegativeScope anl_scope = NegativeScope::all;

  double threshold = 0.95;
  double alpha = 1.0;
  double beta = 1.0;

  double lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t iterations = 20000;
  std::size_t labeled_batch = 8;
  std::size_t unlabeled_ratio = 7;

  std::size_t eval_interval = 250;
  /// 0 disables periodic checkpoints; the final parameters are always saved by the CLI.
  std::size_t checkpoint_interval = 0;
  /// Seed of the fixed weak views used for pool-wide evaluation.
  std::uint64_t eval_seed = 20240601;

  std::vector<std::size_t> hidden = {64, 64};

  AugmentPolicy augment;
  DatasetSpec data;
  std::size_t labels_per_class = 4;
  double test_fraction = 1.0 / 6.0;

  std::size_t unlabeled_batch() const { return unlabeled_ratio * labeled_batch; }
  std::vector<std::size_t> layer_dims() const;

  /// Throws ConfigError naming the first offending key.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&);
};

/// Parses "key = value" lines; '#' starts a comment. Unknown and duplicate
/// keys are errors. Unset keys keep their defaults. The result is validated.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical dump of every key in a fixed order; parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& config);

/// Names of all recognized keys, in canonical order.
std::vector<std::string> config_keys();

std::string to_string(Method m);
std::string to_string(EmlVariant v);
std::string to_string(NegativeScope s);
Method parse_method(const std::string& s);
EmlVariant parse_eml_variant(const std::string& s);
NegativeScope parse_negative_scope(const std::string& s);

}  // namespace fullmatch
