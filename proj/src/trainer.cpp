#include "fullmatch/trainer.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "fullmatch/augment.hpp"

namespace fullmatch {

double cosine_lr(std::size_t t, std::size_t total, double lr0) {
  if (total == 0) return lr0;
  return lr0 * std::cos(7.0 * std::numbers::pi * static_cast<double>(t) / (16.0 * static_cast<double>(total)));
}

void sgd_momentum_step(ModelParameters& params, const ModelGradients& grads, ModelGradients& velocity, double lr,
                       double momentum, double weight_decay) {
  if (!grads.congruent_with(params) || !velocity.congruent_with(params)) {
    throw InvalidArgument("sgd_momentum_step: gradient or velocity shape differs from the parameters");
  }
  if (!grads.all_finite()) throw TrainingAborted("sgd_momentum_step: non-finite gradient");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    auto& v = velocity.layers[l];
    const auto& g = grads.layers[l];
    v.weight = momentum * v.weight + g.weight + weight_decay * p.weight;
    v.bias = momentum * v.bias + g.bias + weight_decay * p.bias;
    p.weight -= lr * v.weight;
    p.bias -= lr * v.bias;
  }
  ++params.version;
}

namespace {

std::string dump_state(std::size_t t, const LossBreakdown& l, const SelectionState& s, const ModelParameters& p) {
  std::ostringstream os;
  os << "training aborted at iteration " << t << ": non-finite loss or gradient\n"
     << "  l_s=" << l.l_s << " l_us=" << l.l_us << " l_eml=" << l.l_eml << " l_anl=" << l.l_anl
     << " l_sum=" << l.l_sum << " alpha=" << l.alpha << " beta=" << l.beta << "\n"
     << "  k=" << s.k << " batch=" << s.batch_size << " pseudo_labeled=" << s.num_pseudo_labeled()
     << " negatives=" << s.negative_mask.count() << "\n"
     << "  parameters finite: " << (p.all_finite() ? "yes" : "no");
  return os.str();
}

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.l_s) && std::isfinite(l.l_us) && std::isfinite(l.l_eml) && std::isfinite(l.l_anl) &&
         std::isfinite(l.l_sum);
}

}  // namespace

StepResult train_step(ModelParameters& params, ModelGradients& velocity, const StepBatch& batch,
                      const ExperimentConfig& config, std::size_t t, Rng& augment_rng,
                      const ThresholdProvider& threshold) {
  const auto n_l = batch.labeled_features.rows();
  const auto n_u = batch.unlabeled_features.rows();
  const std::size_t classes = params.output_dim();
  if (static_cast<std::size_t>(n_l) != batch.labels.size()) throw InvalidArgument("train_step: label count mismatch");

  // Views are drawn in a fixed order: labeled weak, unlabeled weak, unlabeled strong.
  const Matrix labeled_weak = weak_augment_rows(batch.labeled_features, config.augment, augment_rng);
  const Matrix unlabeled_weak = weak_augment_rows(batch.unlabeled_features, config.augment, augment_rng);
  const Matrix unlabeled_strong = strong_augment_rows(batch.unlabeled_features, config.augment, augment_rng);

  // Labeled weak and unlabeled strong rows share one differentiated pass; the
  // weak unlabeled pass only produces targets.
  Matrix trained_inputs(n_l + n_u, batch.labeled_features.cols());
  trained_inputs.topRows(n_l) = labeled_weak;
  trained_inputs.bottomRows(n_u) = unlabeled_strong;
  ForwardCache cache;
  const Matrix logits = forward(params, trained_inputs, &cache);
  const Matrix weak_logits = forward(params, unlabeled_weak);

  const ProbabilityBatch p_labeled(softmax_rows(logits.topRows(n_l)));
  const auto p_strong = ProbabilityBatch::strong(softmax_rows(logits.bottomRows(n_u)));
  const auto q_weak = ProbabilityBatch::weak(softmax_rows(weak_logits));

  std::vector<double> thresholds(classes, config.threshold);
  if (threshold) {
    for (std::size_t c = 0; c < classes; ++c) thresholds[c] = threshold(t, c);
  }
  SelectionState state =
      build_selection_state(q_weak, p_strong, thresholds, SelectionOptions{.adaptive_k = uses_anl(config.method)});
  if (uses_anl(config.method)) restrict_negatives(state, config.anl_scope);

  const double l_s = supervised_loss(p_labeled, batch.labels);
  const double l_us = unsupervised_loss(p_strong, state);
  const double l_eml = uses_eml(config.method) ? eml_loss(p_strong, state, config.eml_variant) : 0.0;
  const double l_anl = uses_anl(config.method) ? anl_loss(p_strong, state) : 0.0;
  StepResult result;
  result.losses = total_loss(l_s, l_us, l_anl, l_eml, config.alpha, config.beta);
  if (!finite(result.losses)) throw TrainingAborted(dump_state(t, result.losses, state, params));

  Matrix grad_strong = unsupervised_loss_grad(p_strong, state);
  // Zero-weight terms are skipped rather than scaled, so alpha = beta = 0
  // reproduces the plain FixMatch update bit for bit.
  if (uses_anl(config.method) && config.alpha != 0.0) grad_strong += config.alpha * anl_loss_grad(p_strong, state);
  if (uses_eml(config.method) && config.beta != 0.0) {
    grad_strong += config.beta * eml_loss_grad(p_strong, state, config.eml_variant);
  }
  Matrix grad_logits(logits.rows(), logits.cols());
  grad_logits.topRows(n_l) = softmax_backward(p_labeled.values(), supervised_loss_grad(p_labeled, batch.labels));
  grad_logits.bottomRows(n_u) = softmax_backward(p_strong.values(), grad_strong);

  const ModelGradients grads = backward(params, cache, grad_logits);
  if (!grads.all_finite()) throw TrainingAborted(dump_state(t, result.losses, state, params));
  sgd_momentum_step(params, grads, velocity, cosine_lr(t, config.iterations, config.lr), config.momentum,
                    config.weight_decay);

  result.selection = {state.k, state.batch_size, state.num_pseudo_labeled(), state.negative_mask.count()};
  result.state = std::move(state);
  return result;
}

namespace {

Dataset make_dataset(const ExperimentConfig& config) {
  config.validate();
  return split(generate(config.data, config.seed), config.labels_per_class, config.test_fraction, config.seed);
}

}  // namespace

Trainer::Trainer(ExperimentConfig config, ThresholdProvider threshold)
    : config_(std::move(config)),
      threshold_(std::move(threshold)),
      dataset_(make_dataset(config_)),
      batches_(dataset_, config_.labeled_batch, config_.unlabeled_batch(), config_.seed),
      params_(init_model(config_.layer_dims(), config_.seed)),
      velocity_(zeros_like(params_)),
      augment_rng_(make_stream(config_.seed, "augment")),
      entropy_edges_(default_entropy_edges(config_.data.classes)) {}

StepResult Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  const BatchIndices idx = batches_.next();
  StepBatch batch;
  batch.labeled_features = dataset_.gather(idx.labeled);
  batch.labels.reserve(idx.labeled.size());
  for (std::size_t i : idx.labeled) batch.labels.push_back(dataset_.labels[i]);
  batch.unlabeled_features = dataset_.gather(idx.unlabeled);

  StepResult result = train_step(params_, velocity_, batch, config_, iteration_, augment_rng_, threshold_);
  durations_.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());

  // Diagnostics only: true labels of the unlabeled batch never reach train_step.
  std::vector<std::size_t> truth;
  truth.reserve(idx.unlabeled.size());
  for (std::size_t i : idx.unlabeled) truth.push_back(dataset_.labels[i]);
  npl_.add(result.state, truth);
  loss_totals_.l_s += result.losses.l_s;
  loss_totals_.l_us += result.losses.l_us;
  loss_totals_.l_eml += result.losses.l_eml;
  loss_totals_.l_anl += result.losses.l_anl;
  loss_totals_.l_sum += result.losses.l_sum;
  ++interval_steps_;
  ++iteration_;
  return result;
}

MetricsRecord Trainer::evaluate() {
  MetricsRecord rec;
  rec.iteration = iteration_;

  const auto pool_idx = dataset_.indices(Split::unlabeled);
  if (!pool_idx.empty()) {
    Rng eval_rng = make_stream(config_.eval_seed, "eval-weak");
    const Matrix pool_weak = weak_augment_rows(dataset_.gather(pool_idx), config_.augment, eval_rng);
    rec.pseudo_label_ratio =
        pseudo_label_ratio(ProbabilityBatch(softmax_rows(forward(params_, pool_weak))), config_.threshold);
  }

  const auto test_idx = dataset_.indices(Split::test);
  std::vector<std::size_t> test_labels;
  for (std::size_t i : test_idx) test_labels.push_back(dataset_.labels[i]);
  const ProbabilityBatch p_test(softmax_rows(forward(params_, dataset_.gather(test_idx))));
  for (std::size_t k = 1; k <= config_.data.classes; ++k) rec.topk_accuracy.push_back(topk_accuracy(p_test, test_labels, k));
  rec.test_accuracy = rec.topk_accuracy.front();
  rec.entropy_histogram = entropy_histogram(p_test, entropy_edges_);
  std::size_t low = 0;
  for (std::size_t i = 0; i < p_test.batch_size(); ++i) {
    if (entropy(p_test.row(i)) < 0.25) ++low;
  }
  rec.low_entropy_fraction = static_cast<double>(low) / static_cast<double>(p_test.batch_size());

  const NplStats npl = npl_.stats();
  rec.mean_npl_per_sample = npl.mean_count;
  rec.npl_accuracy = npl.accuracy;
  rec.k_value = npl_.mean_k();
  if (interval_steps_ > 0) {
    const double n = static_cast<double>(interval_steps_);
    rec.l_s = loss_totals_.l_s / n;
    rec.l_us = loss_totals_.l_us / n;
    rec.l_eml = loss_totals_.l_eml / n;
    rec.l_anl = loss_totals_.l_anl / n;
    rec.l_sum = loss_totals_.l_sum / n;
    rec.step_time = step_timer(std::span<const double>(durations_).subspan(interval_start_));
  }

  npl_.reset();
  loss_totals_ = LossBreakdown{};
  interval_steps_ = 0;
  interval_start_ = durations_.size();
  return rec;
}

TrainResult train(const ExperimentConfig& config, const TrainCallbacks& callbacks, ThresholdProvider threshold) {
  Trainer trainer(config, std::move(threshold));
  TrainResult result;
  while (trainer.iteration() < config.iterations) {
    trainer.step();
    const std::size_t done = trainer.iteration();
    if (done % config.eval_interval == 0 || done == config.iterations) {
      result.log.push_back(trainer.evaluate());
      if (callbacks.on_eval) callbacks.on_eval(result.log.back());
    }
    if (callbacks.on_checkpoint && config.checkpoint_interval > 0 && done % config.checkpoint_interval == 0) {
      callbacks.on_checkpoint(done, trainer.params());
    }
  }
  result.params = trainer.params();
  return result;
}

}  // namespace fullmatch
