#include "crfiqa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "crfiqa/csv.hpp"
#include "crfiqa/errors.hpp"
#include "crfiqa/geometry.hpp"
#include "crfiqa/rng.hpp"

namespace crfiqa {

namespace {

constexpr uint64_t kShuffleSalt = 0x9e3779b97f4a7c15ull;

double activation_derivative(Activation a, double pre, double post) {
  switch (a) {
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - post * post;
  }
  return 1.0;
}

void check_batch(const ModelState& state, const Matrix& inputs, std::span<const int> labels) {
  if (inputs.rows < 1) throw DimensionError("evaluate: empty batch");
  if (static_cast<std::size_t>(inputs.rows) != labels.size()) {
    throw DimensionError("evaluate: " + std::to_string(inputs.rows) + " inputs vs " +
                         std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= state.num_classes) {
      throw LabelError("evaluate: label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " out of range [0, " +
                       std::to_string(state.num_classes) + ")");
    }
  }
}

struct BatchForward {
  std::vector<ForwardTrace> traces;
  Matrix cosines;                           // N x C, clamped
  std::vector<double> predictions;          // N
  std::vector<ClassifiabilityRecord> records;
  double mean_ccs = 0.0;
  double mean_nnccs = 0.0;
};

BatchForward run_forward(const ModelState& state, const Matrix& inputs,
                         std::span<const int> labels, double eps) {
  const int n = inputs.rows;
  const int c = state.num_classes;

  BatchForward fwd;
  fwd.traces.reserve(n);
  fwd.cosines = Matrix(n, c);
  fwd.predictions.resize(n);
  fwd.records.resize(n);

  for (int i = 0; i < n; ++i) {
    fwd.traces.push_back(forward_traced(state, inputs.row(i)));
    const ForwardTrace& tr = fwd.traces.back();
    for (int j = 0; j < c; ++j) fwd.cosines.at(i, j) = tr.cosines[j];
    fwd.predictions[i] = tr.quality;

    ClassifiabilityRecord& rec = fwd.records[i];
    rec.label = labels[i];
    rec.ccs = tr.cosines[labels[i]];
    double best = -2.0;
    for (int j = 0; j < c; ++j) {
      if (j == labels[i]) continue;
      best = std::max(best, tr.cosines[j]);
    }
    rec.nnccs = best;
    rec.cr = certainty_ratio(rec.ccs, rec.nnccs, eps);
    fwd.mean_ccs += rec.ccs;
    fwd.mean_nnccs += rec.nnccs;
  }
  fwd.mean_ccs /= n;
  fwd.mean_nnccs /= n;
  return fwd;
}

std::vector<double> resolve_targets(const BatchForward& fwd, const TrainConfig& cfg,
                                    std::span<const double> targets) {
  const std::size_t n = fwd.records.size();
  if (!targets.empty()) {
    if (targets.size() != n) {
      throw DimensionError("evaluate: " + std::to_string(targets.size()) + " targets vs " +
                           std::to_string(n) + " samples");
    }
    return {targets.begin(), targets.end()};
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = cfg.target_mode == TrainConfig::Target::cr ? fwd.records[i].cr : fwd.records[i].ccs;
  }
  return out;
}

// Shared embedding-to-parameter backward: dn is d(loss)/d(normalized), de_extra
// adds straight onto d(loss)/d(embedding) after the normalization Jacobian.
void backprop_sample(const ModelState& state, const Matrix& inputs, int i,
                     const ForwardTrace& tr, std::vector<double>& dn,
                     const std::vector<double>& de_extra, Gradients& grads) {
  const int d = state.backbone.embedding_dim;
  const double r = tr.embedding_norm;

  // x/|x| Jacobian: (I - n n^T) / |x|
  double dn_dot_n = 0.0;
  for (int k = 0; k < d; ++k) dn_dot_n += dn[k] * tr.normalized[k];
  std::vector<double> g(d);
  for (int k = 0; k < d; ++k) {
    g[k] = (dn[k] - dn_dot_n * tr.normalized[k]) / r;
  }
  if (!de_extra.empty()) {
    for (int k = 0; k < d; ++k) g[k] += de_extra[k];
  }

  const int num_layers = static_cast<int>(state.layers.size());
  for (int l = num_layers - 1; l >= 0; --l) {
    const DenseLayer& layer = state.layers[l];
    const std::span<const double> x_in =
        l == 0 ? inputs.row(i) : std::span<const double>(tr.hidden_post[l - 1]);
    std::vector<double>& gw = grads.layer_weight[l];
    std::vector<double>& gb = grads.layer_bias[l];
    for (int o = 0; o < layer.out; ++o) {
      const double go = g[o];
      double* gw_row = gw.data() + static_cast<std::size_t>(o) * layer.in;
      for (int k = 0; k < layer.in; ++k) gw_row[k] += go * x_in[k];
      gb[o] += go;
    }
    if (l > 0) {
      std::vector<double> gprev(layer.in, 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double go = g[o];
        const double* w_row = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
        for (int k = 0; k < layer.in; ++k) gprev[k] += w_row[k] * go;
      }
      for (int k = 0; k < layer.in; ++k) {
        gprev[k] *= activation_derivative(state.backbone.activation, tr.hidden_pre[l - 1][k],
                                          tr.hidden_post[l - 1][k]);
      }
      g = std::move(gprev);
    }
  }
}

}  // namespace

Gradients make_gradients(const ModelState& state) {
  Gradients g;
  for (const DenseLayer& layer : state.layers) {
    g.layer_weight.emplace_back(layer.weight.size(), 0.0);
    g.layer_bias.emplace_back(layer.bias.size(), 0.0);
  }
  g.centers.assign(state.centers.data.size(), 0.0);
  g.head_weight.assign(state.head_weight.size(), 0.0);
  g.head_bias = 0.0;
  return g;
}

std::vector<std::span<double>> gradient_blocks(Gradients& grads) {
  std::vector<std::span<double>> blocks;
  for (std::size_t l = 0; l < grads.layer_weight.size(); ++l) {
    blocks.emplace_back(grads.layer_weight[l]);
    blocks.emplace_back(grads.layer_bias[l]);
  }
  blocks.emplace_back(grads.centers);
  blocks.emplace_back(grads.head_weight);
  blocks.emplace_back(&grads.head_bias, 1);
  return blocks;
}

EvalResult evaluate_batch(const ModelState& state, const Matrix& inputs,
                          std::span<const int> labels, const TrainConfig& cfg,
                          std::span<const double> targets) {
  check_batch(state, inputs, labels);
  const int n = inputs.rows;
  const int c = state.num_classes;
  const int d = state.backbone.embedding_dim;

  BatchForward fwd = run_forward(state, inputs, labels, cfg.loss.eps);
  const std::vector<double> tgt = resolve_targets(fwd, cfg, targets);

  const LossValue arc = arcface_loss(fwd.cosines, labels, cfg.loss.s, cfg.loss.m);
  const LossValue reg = smooth_l1(fwd.predictions, tgt, cfg.loss.beta);
  const CombinedLoss comb = combined_loss(arc, reg, cfg.loss.lambda);

  EvalResult result;
  result.arc_loss = arc.value;
  result.cr_loss = reg.value;
  result.total_loss = comb.value;
  result.mean_ccs = fwd.mean_ccs;
  result.mean_nnccs = fwd.mean_nnccs;
  result.grads = make_gradients(state);

  const bool head_active = cfg.loss.lambda != 0.0;
  std::vector<double> dn(d);
  std::vector<double> de_extra;
  for (int i = 0; i < n; ++i) {
    const ForwardTrace& tr = fwd.traces[i];
    std::fill(dn.begin(), dn.end(), 0.0);

    // cosine gradients fan out over the centers
    for (int j = 0; j < c; ++j) {
      const double gc = comb.cosine_grad[static_cast<std::size_t>(i) * c + j];
      const std::span<const double> w = state.centers.column(j);
      double* gcenter = result.grads.centers.data() + static_cast<std::size_t>(j) * d;
      for (int k = 0; k < d; ++k) {
        dn[k] += gc * w[k];
        gcenter[k] += gc * tr.normalized[k];
      }
    }

    de_extra.clear();
    if (head_active) {
      const double dp = comb.prediction_grad[i];
      if (state.head_on_normalized) {
        for (int k = 0; k < d; ++k) {
          dn[k] += dp * state.head_weight[k];
          result.grads.head_weight[k] += dp * tr.normalized[k];
        }
      } else {
        de_extra.resize(d);
        for (int k = 0; k < d; ++k) {
          de_extra[k] = dp * state.head_weight[k];
          result.grads.head_weight[k] += dp * tr.embedding[k];
        }
      }
      result.grads.head_bias += dp;
    }

    backprop_sample(state, inputs, i, tr, dn, de_extra, result.grads);
  }
  return result;
}

EvalResult evaluate_on_top(const ModelState& state, const Matrix& inputs,
                           std::span<const int> labels, const TrainConfig& cfg,
                           std::span<const double> targets) {
  check_batch(state, inputs, labels);
  const int n = inputs.rows;
  const int d = state.backbone.embedding_dim;

  BatchForward fwd = run_forward(state, inputs, labels, cfg.loss.eps);
  const std::vector<double> tgt = resolve_targets(fwd, cfg, targets);
  const LossValue reg = smooth_l1(fwd.predictions, tgt, cfg.loss.beta);

  EvalResult result;
  result.arc_loss = 0.0;
  result.cr_loss = reg.value;
  result.total_loss = reg.value;
  result.mean_ccs = fwd.mean_ccs;
  result.mean_nnccs = fwd.mean_nnccs;
  result.grads = make_gradients(state);

  for (int i = 0; i < n; ++i) {
    const ForwardTrace& tr = fwd.traces[i];
    const double dp = reg.grad[i];
    const std::vector<double>& head_in = state.head_on_normalized ? tr.normalized : tr.embedding;
    for (int k = 0; k < d; ++k) result.grads.head_weight[k] += dp * head_in[k];
    result.grads.head_bias += dp;
  }
  return result;
}

void sgd_update(std::span<double> param, std::span<const double> grad,
                std::span<double> velocity, double lr, double momentum, double weight_decay) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw DimensionError("sgd_update: block size mismatch");
  }
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double g = grad[k] + weight_decay * param[k];
    velocity[k] = momentum * velocity[k] + g;
    param[k] -= lr * velocity[k];
  }
}

SgdState make_sgd_state(const ModelState& state) {
  SgdState opt;
  const auto blocks = parameter_blocks(state);
  opt.velocity.reserve(blocks.size());
  for (const auto& b : blocks) opt.velocity.emplace_back(b.size(), 0.0);
  return opt;
}

std::vector<long long> default_milestones(long long total_iterations) {
  return {static_cast<long long>(std::floor(0.625 * static_cast<double>(total_iterations))),
          static_cast<long long>(std::floor(0.875 * static_cast<double>(total_iterations)))};
}

double lr_at(const TrainConfig& cfg, long long iteration) {
  const std::vector<long long> milestones =
      cfg.lr_milestones.empty() ? default_milestones(cfg.total_iterations) : cfg.lr_milestones;
  double lr = cfg.lr;
  for (long long m : milestones) {
    if (iteration >= m) lr /= 10.0;
  }
  return lr;
}

StepReport train_step(ModelState& state, SgdState& opt, const Matrix& inputs,
                      std::span<const int> labels, const TrainConfig& cfg, long long iteration) {
  const bool on_top = cfg.training_mode == TrainConfig::Mode::on_top;

  EvalResult ev;
  try {
    ev = on_top ? evaluate_on_top(state, inputs, labels, cfg)
                : evaluate_batch(state, inputs, labels, cfg);
  } catch (const NormalizationError& e) {
    throw DivergenceError(iteration, std::string("embedding collapsed: ") + e.what());
  }
  if (!std::isfinite(ev.total_loss)) {
    throw DivergenceError(iteration, "non-finite loss");
  }

  const double lr = lr_at(cfg, iteration);
  auto params = parameter_blocks(state);
  auto grads = gradient_blocks(ev.grads);
  const std::size_t head_weight_block = params.size() - 2;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (on_top && b < head_weight_block) continue;
    sgd_update(params[b], grads[b], opt.velocity[b], lr, cfg.momentum, cfg.weight_decay);
  }
  if (!on_top) state.centers.renormalize_columns();

  for (const auto& block : params) {
    for (double v : block) {
      if (!std::isfinite(v)) throw DivergenceError(iteration, "non-finite parameter");
    }
  }

  StepReport report;
  report.iteration = iteration;
  report.arc_loss = ev.arc_loss;
  report.cr_loss = ev.cr_loss;
  report.total_loss = ev.total_loss;
  report.mean_ccs = ev.mean_ccs;
  report.mean_nnccs = ev.mean_nnccs;
  return report;
}

std::vector<std::vector<int>> make_batch_schedule(int num_samples, int batch_size,
                                                  long long total_iterations, uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (batch_size > num_samples) {
    throw ConfigError("batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(num_samples));
  }
  std::vector<int> perm(num_samples);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed ^ kShuffleSalt);

  std::vector<std::vector<int>> schedule;
  schedule.reserve(static_cast<std::size_t>(total_iterations));
  int pos = num_samples;  // forces a shuffle before the first batch
  for (long long t = 0; t < total_iterations; ++t) {
    if (pos + batch_size > num_samples) {
      rng.shuffle(perm);
      pos = 0;
    }
    schedule.emplace_back(perm.begin() + pos, perm.begin() + pos + batch_size);
    pos += batch_size;
  }
  return schedule;
}

TrainResult train(const ModelState& initial, const TrainingSet& data, const TrainConfig& cfg) {
  if (data.inputs.rows < 1) throw DimensionError("train: empty dataset");
  if (static_cast<std::size_t>(data.inputs.rows) != data.labels.size()) {
    throw DimensionError("train: inputs/labels size mismatch");
  }
  std::vector<bool> seen(initial.num_classes, false);
  for (int label : data.labels) {
    if (label < 0 || label >= initial.num_classes) {
      throw LabelError("train: label " + std::to_string(label) + " out of range");
    }
    seen[label] = true;
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw ConfigError("train: every class must be represented in the dataset");
  }

  TrainResult result;
  result.state = initial;
  if (cfg.total_iterations == 0) return result;

  const auto schedule =
      make_batch_schedule(data.inputs.rows, cfg.batch_size, cfg.total_iterations, cfg.seed);
  SgdState opt = make_sgd_state(result.state);
  result.reports.reserve(schedule.size());

  Matrix batch_inputs(cfg.batch_size, data.inputs.cols);
  std::vector<int> batch_labels(cfg.batch_size);
  for (long long t = 0; t < cfg.total_iterations; ++t) {
    const std::vector<int>& idx = schedule[static_cast<std::size_t>(t)];
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto src = data.inputs.row(idx[b]);
      std::copy(src.begin(), src.end(), batch_inputs.row(b).begin());
      batch_labels[b] = data.labels[idx[b]];
    }
    result.reports.push_back(
        train_step(result.state, opt, batch_inputs, batch_labels, cfg, t));
  }
  return result;
}

TrainResult train_on_top_with_reports(const ModelState& frozen, const TrainingSet& data,
                                      const TrainConfig& cfg) {
  TrainConfig on_top_cfg = cfg;
  on_top_cfg.training_mode = TrainConfig::Mode::on_top;
  return train(frozen, data, on_top_cfg);
}

ModelState train_on_top(const ModelState& frozen, const TrainingSet& data,
                        const TrainConfig& cfg) {
  return train_on_top_with_reports(frozen, data, cfg).state;
}

void write_training_log_csv(const std::string& path, std::span<const StepReport> reports,
                            long long log_interval) {
  if (log_interval < 1) throw ConfigError("log_interval must be positive");
  CsvWriter out(path);
  out.row({"iteration", "arc_loss", "cr_loss", "total_loss", "mean_ccs", "mean_nnccs"});
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const StepReport& r = reports[i];
    const bool keep = r.iteration % log_interval == 0 || i + 1 == reports.size();
    if (!keep) continue;
    out.row({std::to_string(r.iteration), format_double(r.arc_loss), format_double(r.cr_loss),
             format_double(r.total_loss), format_double(r.mean_ccs),
             format_double(r.mean_nnccs)});
  }
}

}  // namespace crfiqa
