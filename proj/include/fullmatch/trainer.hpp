#pragma once

#include <chrono>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fullmatch/config.hpp"
#include "fullmatch/data.hpp"
#include "fullmatch/labeling.hpp"
#include "fullmatch/losses.hpp"
#include "fullmatch/metrics.hpp"
#include "fullmatch/model.hpp"
#include "fullmatch/rng.hpp"

namespace fullmatch {

/// Thrown when a step produces a non-finite loss or gradient. what() carries
/// a human-readable dump of the step state.
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Threshold for (iteration, class). Defaults to the configured constant.
using ThresholdProvider = std::function<double(std::size_t iteration, std::size_t cls)>;

/// lr0 * cos(7 pi t / (16 T)).
double cosine_lr(std::size_t t, std::size_t total, double lr0);

/// v <- momentum v + grad + weight_decay param; param <- param - lr v.
void sgd_momentum_step(ModelParameters& params, const ModelGradients& grads, ModelGradients& velocity, double lr,
                       double momentum, double weight_decay);

/// Feature rows of one step. Unlabeled samples carry no labels.
struct StepBatch {
  Matrix labeled_features;
  std::vector<std::size_t> labels;
  Matrix unlabeled_features;
};

struct SelectionSummary {
  std::size_t k = 0;
  std::size_t batch_size = 0;
  std::size_t pseudo_labeled = 0;
  std::size_t negatives = 0;
};

struct StepResult {
  LossBreakdown losses;
  SelectionSummary selection;
  SelectionState state;  // as used by the losses (after scope filtering)
};

/// One FullMatch iteration: augment, forward, select, assemble the loss,
/// backpropagate and take an SGD step at cosine_lr(t).
StepResult train_step(ModelParameters& params, ModelGradients& velocity, const StepBatch& batch,
                      const ExperimentConfig& config, std::size_t t, Rng& augment_rng,
                      const ThresholdProvider& threshold = {});

/// Owns the dataset, model, optimizer state and random streams of one run.
class Trainer {
 public:
  explicit Trainer(ExperimentConfig config, ThresholdProvider threshold = {});

  /// Runs iteration iteration() and advances it.
  StepResult step();
  /// Evaluation record at the current iteration; resets interval statistics.
  MetricsRecord evaluate();

  const ExperimentConfig& config() const { return config_; }
  const Dataset& dataset() const { return dataset_; }
  const ModelParameters& params() const { return params_; }
  std::size_t iteration() const { return iteration_; }
  std::size_t num_entropy_bins() const { return entropy_edges_.size() - 1; }
  /// Wall-clock seconds of every step run so far.
  const std::vector<double>& step_durations() const { return durations_; }

 private:
  ExperimentConfig config_;
  ThresholdProvider threshold_;
  Dataset dataset_;
  BatchIterator batches_;
  ModelParameters params_;
  ModelGradients velocity_;
  Rng augment_rng_;
  std::vector<double> entropy_edges_;
  std::size_t iteration_ = 0;

  NplAccumulator npl_;
  LossBreakdown loss_totals_;
  std::size_t interval_steps_ = 0;
  std::size_t interval_start_ = 0;
  std::vector<double> durations_;
};

struct TrainCallbacks {
  std::function<void(const MetricsRecord&)> on_eval;
  std::function<void(std::size_t iteration, const ModelParameters&)> on_checkpoint;
};

struct TrainResult {
  ModelParameters params;
  std::vector<MetricsRecord> log;
};

/// Runs config.iterations steps, evaluating every eval_interval steps and at the end.
TrainResult train(const ExperimentConfig& config, const TrainCallbacks& callbacks = {},
                  ThresholdProvider threshold = {});

}  // namespace fullmatch
