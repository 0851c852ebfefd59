#include "fullmatch/gradcheck.hpp"

#include <array>
#include <random>

#include "fullmatch/augment.hpp"
#include "fullmatch/model.hpp"

namespace fullmatch {

LossInstance random_loss_instance(Rng& rng, std::size_t batch, std::size_t classes, bool adaptive_k) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
  std::bernoulli_distribution confident(0.5);
  const auto B = static_cast<Eigen::Index>(batch);
  const auto C = static_cast<Eigen::Index>(classes);
  LossInstance inst;
  inst.weak_logits.resize(B, C);
  inst.strong_logits.resize(B, C);
  for (Eigen::Index i = 0; i < B; ++i) {
    for (Eigen::Index c = 0; c < C; ++c) inst.weak_logits(i, c) = 1.5 * gauss(rng);
    if (confident(rng)) inst.weak_logits(i, static_cast<Eigen::Index>(pick(rng))) += 12.0;
    for (Eigen::Index c = 0; c < C; ++c) inst.strong_logits(i, c) = 0.6 * inst.weak_logits(i, c) + 0.5 * gauss(rng);
  }
  const std::size_t labeled = std::max<std::size_t>(1, batch / 7);
  inst.labeled_logits.resize(static_cast<Eigen::Index>(labeled), C);
  for (Eigen::Index i = 0; i < inst.labeled_logits.rows(); ++i) {
    for (Eigen::Index c = 0; c < C; ++c) inst.labeled_logits(i, c) = gauss(rng);
    inst.labels.push_back(pick(rng));
  }
  inst.state = build_selection_state(ProbabilityBatch::weak(softmax_rows(inst.weak_logits)),
                                     ProbabilityBatch::strong(softmax_rows(inst.strong_logits)), 0.95,
                                     {.adaptive_k = adaptive_k});
  return inst;
}

bool GradcheckReport::passed() const {
  for (const auto& e : entries) {
    if (!e.passed()) return false;
  }
  return sign_negative == sign_checked;
}

namespace {

Matrix as_matrix(std::span<const double> flat, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  std::copy(flat.begin(), flat.end(), m.data());
  return m;
}

std::span<const double> flat(const Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }

// Rows of a selection state, keeping the class count.
SelectionState row_state(const SelectionState& s, std::size_t i) {
  SelectionState r;
  r.batch_size = 1;
  r.num_classes = s.num_classes;
  r.k = s.k;
  r.has_pseudo_label = {s.has_pseudo_label[i]};
  r.target_class = {s.target_class[i]};
  r.positive_mask = Mask(1, s.num_classes);
  r.u_mask = Mask(1, s.num_classes);
  r.negative_mask = Mask(1, s.num_classes);
  for (std::size_t c = 0; c < s.num_classes; ++c) {
    r.positive_mask.set(0, c, s.positive_mask(i, c));
    r.u_mask.set(0, c, s.u_mask(i, c));
    r.negative_mask.set(0, c, s.negative_mask(i, c));
  }
  return r;
}

// With the selection state frozen every loss is a sum of per-row terms, so
// each row is perturbed and re-evaluated on its own. row_term(i, z_i) must
// return row i's contribution to the batch loss.
using RowTerm = std::function<double(std::size_t, const Matrix&)>;

std::vector<double> rowwise_difference(const Matrix& z, const RowTerm& row_term) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Matrix zi = z.row(i);
    const auto g = finite_difference_gradient(
        [&](std::span<const double> x) { return row_term(static_cast<std::size_t>(i), as_matrix(x, 1, z.cols())); },
        flat(zi));
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

double row_sum(const Matrix& z, const RowTerm& row_term) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) total += row_term(static_cast<std::size_t>(i), z.row(i));
  return total;
}

double relative_gap(double a, double b) {
  const std::array<double, 1> x{a}, y{b};
  return max_relative_error(x, y);
}

using StrongLoss = std::function<double(const ProbabilityBatch&, const SelectionState&)>;
using StrongGrad = std::function<Matrix(const ProbabilityBatch&, const SelectionState&)>;

// Row term of a loss normalized by the batch size.
RowTerm mean_row_term(const LossInstance& inst, const StrongLoss& loss) {
  const double scale = 1.0 / static_cast<double>(inst.state.batch_size);
  return [&inst, loss, scale](std::size_t i, const Matrix& zi) {
    return scale * loss(ProbabilityBatch::strong(softmax_rows(zi)), row_state(inst.state, i));
  };
}

double strong_loss_error(const LossInstance& inst, const StrongLoss& loss, const StrongGrad& grad,
                         const RowTerm& row_term, double& separability) {
  const Matrix& z = inst.strong_logits;
  const auto probs = ProbabilityBatch::strong(softmax_rows(z));
  const Matrix analytic = softmax_backward(probs.values(), grad(probs, inst.state));
  separability = std::max(separability, relative_gap(row_sum(z, row_term), loss(probs, inst.state)));
  return max_relative_error(flat(analytic), rowwise_difference(z, row_term));
}

double total_loss_error(const LossInstance& inst, double alpha, double beta, double& separability) {
  const Matrix& zl = inst.labeled_logits;
  const Matrix& zs = inst.strong_logits;
  const double inv_l = 1.0 / static_cast<double>(zl.rows());
  const double inv_u = 1.0 / static_cast<double>(inst.state.batch_size);
  const RowTerm labeled_term = [&](std::size_t i, const Matrix& zi) {
    const std::array<std::size_t, 1> y{inst.labels[i]};
    return inv_l * supervised_loss(ProbabilityBatch(softmax_rows(zi)), y);
  };
  const RowTerm strong_term = [&](std::size_t i, const Matrix& zi) {
    const auto p = ProbabilityBatch::strong(softmax_rows(zi));
    const auto s = row_state(inst.state, i);
    return inv_u * (unsupervised_loss(p, s) + alpha * anl_loss(p, s) + beta * eml_loss(p, s));
  };
  const ProbabilityBatch pl(softmax_rows(zl));
  const auto ps = ProbabilityBatch::strong(softmax_rows(zs));
  const double full = total_loss(supervised_loss(pl, inst.labels), unsupervised_loss(ps, inst.state),
                                 anl_loss(ps, inst.state), eml_loss(ps, inst.state), alpha, beta)
                          .l_sum;
  separability = std::max(separability, relative_gap(row_sum(zl, labeled_term) + row_sum(zs, strong_term), full));

  const Matrix g_l = softmax_backward(pl.values(), supervised_loss_grad(pl, inst.labels));
  const Matrix g_s = softmax_backward(ps.values(), unsupervised_loss_grad(ps, inst.state) +
                                                       alpha * anl_loss_grad(ps, inst.state) +
                                                       beta * eml_loss_grad(ps, inst.state));
  std::vector<double> analytic(flat(g_l).begin(), flat(g_l).end());
  analytic.insert(analytic.end(), g_s.data(), g_s.data() + g_s.size());
  auto numeric = rowwise_difference(zl, labeled_term);
  const auto numeric_s = rowwise_difference(zs, strong_term);
  numeric.insert(numeric.end(), numeric_s.begin(), numeric_s.end());
  return max_relative_error(analytic, numeric);
}

// Relative gap between the loss module's dL/dp_target and the closed form,
// maximized over pseudo-labeled rows.
double target_gradient_error(const LossInstance& inst, GradcheckReport& report) {
  const auto ps = ProbabilityBatch::strong(softmax_rows(inst.strong_logits));
  const Matrix g = eml_loss_grad(ps, inst.state);
  double worst = 0.0;
  for (std::size_t i = 0; i < inst.state.batch_size; ++i) {
    if (!inst.state.has_pseudo_label[i]) continue;
    std::vector<std::size_t> nontarget;
    bool all_small = true;
    for (std::size_t c = 0; c < inst.state.num_classes; ++c) {
      if (!inst.state.u_mask(i, c)) continue;
      nontarget.push_back(c);
      all_small = all_small && ps(i, c) < 0.5;
    }
    const std::size_t t = *inst.state.target_class[i];
    const double closed = eml_target_class_gradient(ps.row(i), t, nontarget, inst.state.batch_size,
                                                    inst.state.num_classes);
    const double via_loss = g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
    const std::array<double, 1> a{closed}, b{via_loss};
    worst = std::max(worst, max_relative_error(a, b));
    if (all_small) {
      ++report.sign_checked;
      if (closed < 0.0) ++report.sign_negative;
    }
  }
  return worst;
}

// Full FullMatch objective of a small MLP, differentiated with respect to
// every parameter. The selection state is frozen at the initial parameters.
double model_gradient_error(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::array<std::size_t, 3> dims{5, 8, 3};
  ModelParameters params = init_model(dims, rng());
  for (auto& layer : params.layers) {
    for (Eigen::Index j = 0; j < layer.bias.size(); ++j) layer.bias(j) = 0.1 * gauss(rng);
  }
  const Eigen::Index n_l = 2, n_u = 4;
  Matrix x_l(n_l, 5), x_w(n_u, 5), x_s(n_u, 5);
  for (Matrix* m : {&x_l, &x_w, &x_s}) {
    for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = gauss(rng);
  }
  const std::vector<std::size_t> labels{0, 2};
  // Weak rows pushed toward a confident prediction so EML and ANL have work to do.
  Matrix q = softmax_rows(forward(params, x_w));
  for (Eigen::Index i = 0; i < n_u; i += 2) {
    q.row(i).setConstant(0.01);
    q(i, i % 3) = 0.98;
  }
  const auto weak = ProbabilityBatch::weak(q);
  const auto state0 = build_selection_state(weak, ProbabilityBatch::strong(softmax_rows(forward(params, x_s))), 0.95);

  const auto objective = [&](const ModelParameters& p) {
    const ProbabilityBatch pl(softmax_rows(forward(p, x_l)));
    const auto ps = ProbabilityBatch::strong(softmax_rows(forward(p, x_s)));
    return total_loss(supervised_loss(pl, labels), unsupervised_loss(ps, state0), anl_loss(ps, state0),
                      eml_loss(ps, state0), 1.0, 1.0)
        .l_sum;
  };

  ForwardCache cache_l, cache_s;
  const Matrix zl = forward(params, x_l, &cache_l);
  const ProbabilityBatch pl(softmax_rows(zl));
  ModelGradients g = backward(params, cache_l, softmax_backward(pl.values(), supervised_loss_grad(pl, labels)));
  const Matrix zs = forward(params, x_s, &cache_s);
  const auto ps = ProbabilityBatch::strong(softmax_rows(zs));
  const ModelGradients gs =
      backward(params, cache_s,
               softmax_backward(ps.values(), unsupervised_loss_grad(ps, state0) + anl_loss_grad(ps, state0) +
                                                 eml_loss_grad(ps, state0)));
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    g.layers[l].weight += gs.layers[l].weight;
    g.layers[l].bias += gs.layers[l].bias;
  }
  const auto analytic = flatten(g.layers);
  const auto numeric = finite_difference_gradient(
      [&](std::span<const double> theta) {
        ModelParameters p = params;
        unflatten(theta, p.layers);
        return objective(p);
      },
      flatten(params.layers));
  return max_relative_error(analytic, numeric);
}

}  // namespace

GradcheckReport run_gradient_checks(std::uint64_t seed, std::size_t instances) {
  Rng rng = make_stream(seed, "gradcheck");
  constexpr std::array<std::size_t, 3> kClasses{3, 10, 100};
  constexpr std::array<std::size_t, 3> kBatches{1, 8, 64};
  constexpr std::array<double, 3> kWeights{0.5, 1.0, 2.0};

  GradcheckReport report;
  GradcheckEntry sup{"L_s", 0.0, 1e-6}, us{"L_us", 0.0, 1e-6}, eml_bce{"L_eml(bce)", 0.0, 1e-6},
      eml_ce{"L_eml(ce)", 0.0, 1e-6}, anl{"L_anl", 0.0, 1e-6}, sum{"L_sum", 0.0, 1e-6},
      l2{"L_l2", 0.0, 1e-6}, eq7{"eml target-class closed form", 0.0, 1e-10},
      split{"row decomposition", 0.0, 1e-12};
  for (std::size_t n = 0; n < instances; ++n) {
    const std::size_t C = kClasses[n % 3];
    const std::size_t B = kBatches[(n / 3) % 3];
    const LossInstance inst = random_loss_instance(rng, B, C, n % 5 != 4);

    const auto check = [&](GradcheckEntry& entry, const StrongLoss& loss, const StrongGrad& grad) {
      entry.max_error =
          std::max(entry.max_error, strong_loss_error(inst, loss, grad, mean_row_term(inst, loss), split.max_error));
    };
    check(us, [](auto& p, auto& s) { return unsupervised_loss(p, s); },
          [](auto& p, auto& s) { return unsupervised_loss_grad(p, s); });
    check(eml_bce, [](auto& p, auto& s) { return eml_loss(p, s, EmlVariant::bce); },
          [](auto& p, auto& s) { return eml_loss_grad(p, s, EmlVariant::bce); });
    check(eml_ce, [](auto& p, auto& s) { return eml_loss(p, s, EmlVariant::ce); },
          [](auto& p, auto& s) { return eml_loss_grad(p, s, EmlVariant::ce); });
    check(anl, [](auto& p, auto& s) { return anl_loss(p, s); }, [](auto& p, auto& s) { return anl_loss_grad(p, s); });
    {
      // Plain sum over rows, no batch normalization.
      const auto weak = ProbabilityBatch::weak(softmax_rows(inst.weak_logits));
      const RowTerm l2_term = [&](std::size_t i, const Matrix& zi) {
        return l2_consistency(ProbabilityBatch(weak.values().row(static_cast<Eigen::Index>(i))),
                              ProbabilityBatch(softmax_rows(zi)));
      };
      l2.max_error = std::max(
          l2.max_error, strong_loss_error(inst, [&](auto& p, auto&) { return l2_consistency(weak, p); },
                                          [&](auto& p, auto&) { return l2_consistency_grad(weak, p); }, l2_term,
                                          split.max_error));
    }
    {
      const Matrix& z = inst.labeled_logits;
      const ProbabilityBatch p(softmax_rows(z));
      const Matrix analytic = softmax_backward(p.values(), supervised_loss_grad(p, inst.labels));
      const double inv_l = 1.0 / static_cast<double>(z.rows());
      const RowTerm term = [&](std::size_t i, const Matrix& zi) {
        const std::array<std::size_t, 1> y{inst.labels[i]};
        return inv_l * supervised_loss(ProbabilityBatch(softmax_rows(zi)), y);
      };
      split.max_error = std::max(split.max_error, relative_gap(row_sum(z, term), supervised_loss(p, inst.labels)));
      sup.max_error = std::max(sup.max_error, max_relative_error(flat(analytic), rowwise_difference(z, term)));
    }
    sum.max_error =
        std::max(sum.max_error, total_loss_error(inst, kWeights[n % 3], kWeights[(n / 3) % 3], split.max_error));
    eq7.max_error = std::max(eq7.max_error, target_gradient_error(inst, report));
    for (GradcheckEntry* e : {&sup, &us, &eml_bce, &eml_ce, &anl, &sum, &l2, &eq7, &split}) ++e->instances;
  }
  report.entries = {sup, us, eml_bce, eml_ce, anl, sum, l2, eq7, split};

  GradcheckEntry model{"model backward (L_sum)", 0.0, 1e-5};
  for (std::size_t n = 0; n < 20; ++n) {
    model.max_error = std::max(model.max_error, model_gradient_error(rng));
    ++model.instances;
  }
  report.entries.push_back(model);
  return report;
}

}  // namespace fullmatch
