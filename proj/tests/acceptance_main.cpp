// Acceptance suite: prints one pass/fail line per criterion and exits nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "crfiqa/classifiability.hpp"
#include "crfiqa/commands.hpp"
#include "crfiqa/errors.hpp"
#include "crfiqa/evaluation.hpp"
#include "crfiqa/geometry.hpp"
#include "crfiqa/losses.hpp"
#include "crfiqa/model.hpp"
#include "crfiqa/rng.hpp"
#include "crfiqa/synthdata.hpp"
#include "crfiqa/trainer.hpp"

using namespace crfiqa;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// harness

struct Criterion {
  int number;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Criterion> g_results;

void record(int number, const std::string& name, bool pass, const std::string& detail) {
  g_results.push_back({number, name, pass, detail});
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", number, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / denom;
}

// ---------------------------------------------------------------------------
// reference run fixture

constexpr uint64_t kDataSeed = 20260810;
constexpr uint64_t kTrainSeed = 777;
constexpr uint64_t kPairSeed = 99;
constexpr double kSpearmanBound = 0.8;

struct Fixture {
  std::vector<SyntheticSample> all;
  std::vector<SyntheticSample> train_samples;
  std::vector<SyntheticSample> heldout;
  TrainingSet train_set;
  TrainingSet heldout_set;
  BackboneConfig backbone;
  TrainConfig cfg;
  ModelState initial;
  ModelState reference;              // simultaneous, CR target
  std::vector<StepReport> reports;
  EmbeddingStore heldout_embeddings{16};
  PairList heldout_pairs;
};

Fixture build_fixture() {
  Fixture fx;
  SyntheticSpec spec;
  spec.num_classes = 20;
  spec.samples_per_class = 50;
  spec.input_dim = 32;
  spec.noise_levels = {0.05, 0.2, 0.5, 1.0};
  spec.seed = kDataSeed;
  fx.all = generate(spec);

  const SplitResult split = split_per_class(fx.all, 10);
  fx.train_samples = split.train;
  fx.heldout = split.heldout;
  fx.train_set = to_training_set(fx.train_samples);
  fx.heldout_set = to_training_set(fx.heldout);

  fx.backbone.input_dim = 32;
  fx.backbone.hidden_dims = {64};
  fx.backbone.embedding_dim = 16;
  fx.backbone.activation = Activation::relu;

  fx.cfg.loss = LossConfig{};  // s=64, m=0.5, lambda=10, beta=1, eps=1e-9
  fx.cfg.batch_size = 32;
  fx.cfg.total_iterations = 5000;
  fx.cfg.lr = 0.1;
  fx.cfg.momentum = 0.9;
  fx.cfg.weight_decay = 5e-4;
  fx.cfg.seed = kTrainSeed;

  fx.initial = init_model(fx.backbone, 20, kTrainSeed);
  TrainResult result = train(fx.initial, fx.train_set, fx.cfg);
  fx.reference = std::move(result.state);
  fx.reports = std::move(result.reports);

  for (const SyntheticSample& s : fx.heldout) {
    fx.heldout_embeddings.add(s.id, forward(fx.reference, s.input).normalized);
  }
  fx.heldout_pairs = make_pairs(fx.heldout, 600, 4000, kPairSeed);
  return fx;
}

// ERC-AUC on the held-out pairs for an arbitrary per-sample quality map.
double heldout_erc_auc(const Fixture& fx, const std::function<double(const SyntheticSample&)>& q) {
  std::vector<GenuinePair> genuine;
  std::vector<double> impostors;
  std::unordered_map<int, double> quality;
  for (const SyntheticSample& s : fx.heldout) quality[s.id] = q(s);
  for (const Pair& p : fx.heldout_pairs) {
    const double score =
        cosine_similarity(fx.heldout_embeddings.get(p.id_a), fx.heldout_embeddings.get(p.id_b));
    if (p.genuine) {
      genuine.push_back({score, std::min(quality.at(p.id_a), quality.at(p.id_b))});
    } else {
      impostors.push_back(score);
    }
  }
  const auto grid = reject_grid(0.01, 0.95);
  return erc_curve(genuine, impostors, 1e-2, grid).auc;
}

std::unordered_map<int, double> predicted_quality_by_id(const Fixture& fx,
                                                        const ModelState& model) {
  std::unordered_map<int, double> out;
  for (const SyntheticSample& s : fx.heldout) {
    out[s.id] = forward(model, s.input).quality;
  }
  return out;
}

// ---------------------------------------------------------------------------
// criterion 1: gradients

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  Rng rng(424242);

  // arcface: every cosine coordinate, 100 instances
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.bounded(8));
    const int c = 2 + static_cast<int>(rng.bounded(4));
    Matrix cosines(n, c);
    for (double& v : cosines.data) v = rng.uniform(-0.95, 0.95);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.bounded(c));
    const double s = rng.uniform(2.0, 64.0);
    const double m = rng.uniform(0.0, 0.6);
    const LossValue v = arcface_loss(cosines, labels, s, m);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < c; ++j) {
        Matrix probe = cosines;
        probe.at(i, j) = cosines.at(i, j) + 1e-5;
        const double up = arcface_loss(probe, labels, s, m).value;
        probe.at(i, j) = cosines.at(i, j) - 1e-5;
        const double down = arcface_loss(probe, labels, s, m).value;
        worst = std::max(worst, rel_err(v.grad[static_cast<std::size_t>(i) * c + j],
                                        (up - down) / 2e-5));
      }
    }
  }

  // smooth_l1, 100 instances
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.bounded(8));
    const double beta = rng.uniform(0.2, 2.0);
    std::vector<double> pred(n), tgt(n);
    for (double& x : pred) x = rng.uniform(-3.0, 3.0);
    for (double& x : tgt) x = rng.uniform(-3.0, 3.0);
    const LossValue v = smooth_l1(pred, tgt, beta);
    for (int i = 0; i < n; ++i) {
      if (std::abs(std::abs(tgt[static_cast<std::size_t>(i)] - pred[static_cast<std::size_t>(i)]) -
                   beta) < 1e-3) {
        continue;  // switch point is not differentiable
      }
      std::vector<double> probe = pred;
      probe[static_cast<std::size_t>(i)] += 1e-5;
      const double up = smooth_l1(probe, tgt, beta).value;
      probe[static_cast<std::size_t>(i)] -= 2e-5;
      const double down = smooth_l1(probe, tgt, beta).value;
      worst = std::max(worst, rel_err(v.grad[static_cast<std::size_t>(i)], (up - down) / 2e-5));
    }
  }

  // combined objective over both inputs, 100 instances
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.bounded(6));
    const int c = 2 + static_cast<int>(rng.bounded(4));
    Matrix cosines(n, c);
    for (double& v : cosines.data) v = rng.uniform(-0.95, 0.95);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.bounded(c));
    std::vector<double> pred(n), tgt(n);
    for (double& x : pred) x = rng.uniform(-2.0, 2.0);
    for (double& x : tgt) x = rng.uniform(-2.0, 2.0);
    const double s = rng.uniform(2.0, 32.0);
    const double m = rng.uniform(0.0, 0.5);
    const double beta = rng.uniform(0.5, 1.5);
    const double lambda = rng.uniform(0.0, 10.0);

    const auto value_of = [&](const Matrix& cm, const std::vector<double>& pm) {
      return combined_loss(arcface_loss(cm, labels, s, m), smooth_l1(pm, tgt, beta), lambda).value;
    };
    const CombinedLoss comb =
        combined_loss(arcface_loss(cosines, labels, s, m), smooth_l1(pred, tgt, beta), lambda);
    for (int i = 0; i < n; ++i) {
      // one cosine coordinate and one prediction per row keeps this cheap
      const int j = static_cast<int>(rng.bounded(c));
      Matrix probe = cosines;
      probe.at(i, j) = cosines.at(i, j) + 1e-5;
      const double up = value_of(probe, pred);
      probe.at(i, j) = cosines.at(i, j) - 1e-5;
      const double down = value_of(probe, pred);
      worst = std::max(worst, rel_err(comb.cosine_grad[static_cast<std::size_t>(i) * c + j],
                                      (up - down) / 2e-5));

      if (std::abs(std::abs(tgt[static_cast<std::size_t>(i)] - pred[static_cast<std::size_t>(i)]) -
                   beta) < 1e-3) {
        continue;
      }
      std::vector<double> pprobe = pred;
      pprobe[static_cast<std::size_t>(i)] += 1e-5;
      const double pup = value_of(cosines, pprobe);
      pprobe[static_cast<std::size_t>(i)] -= 2e-5;
      const double pdown = value_of(cosines, pprobe);
      worst = std::max(worst, rel_err(comb.prediction_grad[static_cast<std::size_t>(i)],
                                      (pup - pdown) / 2e-5));
    }
  }

  // full train-step composite incl. weight decay, 100 instances
  BackboneConfig backbone;
  backbone.input_dim = 6;
  backbone.hidden_dims = {5};
  backbone.embedding_dim = 4;
  TrainConfig cfg;
  cfg.loss.s = 16.0;
  cfg.loss.m = 0.4;
  cfg.loss.lambda = 10.0;
  cfg.weight_decay = 5e-4;
  for (int trial = 0; trial < 100; ++trial) {
    ModelState state = init_model(backbone, 3, 5000 + static_cast<uint64_t>(trial));
    for (double& w : state.head_weight) w = rng.uniform(-0.5, 0.5);
    state.head_bias = rng.uniform(-0.5, 0.5);
    const int n = 4;
    Matrix inputs(n, 6);
    for (double& v : inputs.data) v = rng.uniform(-1.0, 1.0);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.bounded(3));

    // targets frozen at the base point: they are constants of the step
    std::vector<double> targets;
    for (int i = 0; i < n; ++i) {
      const ForwardResult out = forward(state, inputs.row(i));
      const double own = out.cosines[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
      double best = -2.0;
      for (int j = 0; j < 3; ++j) {
        if (j != labels[static_cast<std::size_t>(i)]) {
          best = std::max(best, out.cosines[static_cast<std::size_t>(j)]);
        }
      }
      targets.push_back(certainty_ratio(own, best, cfg.loss.eps));
    }

    EvalResult base = evaluate_batch(state, inputs, labels, cfg, targets);
    std::vector<double> analytic;
    {
      auto blocks = gradient_blocks(base.grads);
      const auto params = parameter_blocks(state);
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t k = 0; k < blocks[b].size(); ++k) {
          analytic.push_back(blocks[b][k] + cfg.weight_decay * params[b][k]);
        }
      }
    }

    const auto penalized = [&](ModelState& probe) {
      const double loss = evaluate_batch(probe, inputs, labels, cfg, targets).total_loss;
      double sq = 0.0;
      for (const auto block : parameter_blocks(probe)) {
        for (double v : block) sq += v * v;
      }
      return loss + 0.5 * cfg.weight_decay * sq;
    };

    std::size_t flat = 0;
    auto blocks = parameter_blocks(state);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (std::size_t k = 0; k < blocks[b].size(); ++k, ++flat) {
        if (flat % 5 != static_cast<std::size_t>(trial % 5)) continue;  // rotating subset
        ModelState probe = state;
        auto probe_blocks = parameter_blocks(probe);
        const double x0 = probe_blocks[b][k];
        probe_blocks[b][k] = x0 + 1e-5;
        const double up = penalized(probe);
        probe_blocks[b][k] = x0 - 1e-5;
        const double down = penalized(probe);
        worst = std::max(worst, rel_err(analytic[flat], (up - down) / 2e-5));
      }
    }
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  record(1, "analytic gradients vs central differences", worst < 1e-4 && seconds < 30.0,
         "max rel err " + fmt(worst) + ", " + fmt(seconds) + " s");
}

// ---------------------------------------------------------------------------
// criterion 2: degenerate equivalences

// ArcFace-only step used as the independent oracle for lambda = 0: no quality
// head machinery anywhere, arithmetic mirrored from the production backward.
void arcface_only_step(ModelState& state, SgdState& opt, const Matrix& inputs,
                       const std::vector<int>& labels, const TrainConfig& cfg,
                       long long iteration) {
  const int n = inputs.rows;
  const int c = state.num_classes;
  const int d = state.backbone.embedding_dim;

  std::vector<ForwardTrace> traces;
  traces.reserve(n);
  Matrix cosines(n, c);
  for (int i = 0; i < n; ++i) {
    traces.push_back(forward_traced(state, inputs.row(i)));
    for (int j = 0; j < c; ++j) cosines.at(i, j) = traces.back().cosines[j];
  }
  const LossValue arc = arcface_loss(cosines, labels, cfg.loss.s, cfg.loss.m);

  Gradients grads = make_gradients(state);
  std::vector<double> dn(d);
  for (int i = 0; i < n; ++i) {
    const ForwardTrace& tr = traces[static_cast<std::size_t>(i)];
    std::fill(dn.begin(), dn.end(), 0.0);
    for (int j = 0; j < c; ++j) {
      const double gc = arc.grad[static_cast<std::size_t>(i) * c + j];
      const std::span<const double> w = state.centers.column(j);
      double* gcenter = grads.centers.data() + static_cast<std::size_t>(j) * d;
      for (int k = 0; k < d; ++k) {
        dn[k] += gc * w[k];
        gcenter[k] += gc * tr.normalized[k];
      }
    }

    double dn_dot_n = 0.0;
    for (int k = 0; k < d; ++k) dn_dot_n += dn[k] * tr.normalized[k];
    std::vector<double> g(d);
    for (int k = 0; k < d; ++k) {
      g[k] = (dn[k] - dn_dot_n * tr.normalized[k]) / tr.embedding_norm;
    }

    const int num_layers = static_cast<int>(state.layers.size());
    for (int l = num_layers - 1; l >= 0; --l) {
      const DenseLayer& layer = state.layers[static_cast<std::size_t>(l)];
      const std::span<const double> x_in =
          l == 0 ? inputs.row(i) : std::span<const double>(tr.hidden_post[static_cast<std::size_t>(l - 1)]);
      std::vector<double>& gw = grads.layer_weight[static_cast<std::size_t>(l)];
      std::vector<double>& gb = grads.layer_bias[static_cast<std::size_t>(l)];
      for (int o = 0; o < layer.out; ++o) {
        const double go = g[static_cast<std::size_t>(o)];
        double* gw_row = gw.data() + static_cast<std::size_t>(o) * layer.in;
        for (int k = 0; k < layer.in; ++k) gw_row[k] += go * x_in[static_cast<std::size_t>(k)];
        gb[static_cast<std::size_t>(o)] += go;
      }
      if (l > 0) {
        std::vector<double> gprev(static_cast<std::size_t>(layer.in), 0.0);
        for (int o = 0; o < layer.out; ++o) {
          const double go = g[static_cast<std::size_t>(o)];
          const double* w_row = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
          for (int k = 0; k < layer.in; ++k) gprev[static_cast<std::size_t>(k)] += w_row[k] * go;
        }
        for (int k = 0; k < layer.in; ++k) {
          const double pre = tr.hidden_pre[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(k)];
          gprev[static_cast<std::size_t>(k)] *= pre > 0.0 ? 1.0 : 0.0;  // relu
        }
        g = std::move(gprev);
      }
    }
  }

  auto params = parameter_blocks(state);
  auto gblocks = gradient_blocks(grads);
  const double lr = lr_at(cfg, iteration);
  for (std::size_t b = 0; b < params.size(); ++b) {
    sgd_update(params[b], gblocks[b], opt.velocity[b], lr, cfg.momentum, cfg.weight_decay);
  }
  state.centers.renormalize_columns();
}

void criterion_degenerate() {
  Rng rng(9090);
  // (a) m = 0 equals softmax cross-entropy on scaled logits
  double worst_ce = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.bounded(8));
    const int c = 2 + static_cast<int>(rng.bounded(5));
    Matrix cosines(n, c);
    for (double& v : cosines.data) v = rng.uniform(-1.0, 1.0);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.bounded(c));
    const double s = rng.uniform(1.0, 30.0);
    double ce = 0.0;
    for (int i = 0; i < n; ++i) {
      double denom = 0.0;
      for (int j = 0; j < c; ++j) denom += std::exp(s * cosines.at(i, j));
      ce += -std::log(std::exp(s * cosines.at(i, labels[static_cast<std::size_t>(i)])) / denom);
    }
    ce /= n;
    worst_ce = std::max(worst_ce, std::abs(arcface_loss(cosines, labels, s, 0.0).value - ce));
  }

  // (b) lambda = 0 runs bit-identical to the ArcFace-only oracle for 100 steps
  SyntheticSpec spec;
  spec.num_classes = 3;
  spec.samples_per_class = 10;
  spec.input_dim = 6;
  spec.noise_levels = {0.1, 0.4};
  spec.seed = 21;
  const TrainingSet data = to_training_set(generate(spec));

  BackboneConfig backbone;
  backbone.input_dim = 6;
  backbone.hidden_dims = {5};
  backbone.embedding_dim = 4;
  const ModelState initial = init_model(backbone, 3, 31);

  TrainConfig cfg;
  cfg.loss.s = 16.0;
  cfg.loss.m = 0.4;
  cfg.loss.lambda = 0.0;
  cfg.batch_size = 5;
  cfg.total_iterations = 100;
  cfg.lr = 0.05;
  cfg.seed = 17;

  const TrainResult lib = train(initial, data, cfg);

  ModelState oracle = initial;
  SgdState opt = make_sgd_state(oracle);
  const auto schedule =
      make_batch_schedule(data.inputs.rows, cfg.batch_size, cfg.total_iterations, cfg.seed);
  Matrix batch(cfg.batch_size, 6);
  std::vector<int> blabels(static_cast<std::size_t>(cfg.batch_size));
  for (long long t = 0; t < cfg.total_iterations; ++t) {
    const auto& idx = schedule[static_cast<std::size_t>(t)];
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto src = data.inputs.row(idx[static_cast<std::size_t>(b)]);
      std::copy(src.begin(), src.end(), batch.row(b).begin());
      blabels[static_cast<std::size_t>(b)] = data.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
    }
    arcface_only_step(oracle, opt, batch, blabels, cfg, t);
  }

  bool identical = true;
  const auto pa = parameter_blocks(lib.state);
  const auto pb = parameter_blocks(oracle);
  for (std::size_t b = 0; b + 2 < pa.size() && identical; ++b) {  // backbone + centers
    for (std::size_t k = 0; k < pa[b].size(); ++k) {
      if (pa[b][k] != pb[b][k]) {
        identical = false;
        break;
      }
    }
  }
  // head must not have moved either
  bool head_untouched = lib.state.head_bias == 0.0;
  for (double w : lib.state.head_weight) head_untouched = head_untouched && w == 0.0;

  record(2, "degenerate-loss equivalences", worst_ce <= 1e-10 && identical && head_untouched,
         "max |arcface(m=0) - ce| " + fmt(worst_ce) + ", 100-step bit-identity " +
             (identical ? "holds" : "BROKEN") + ", head " +
             (head_untouched ? "untouched" : "MOVED"));
}

// ---------------------------------------------------------------------------
// criterion 3: CR formula suite

void criterion_cr_formulas() {
  bool pass = true;
  std::string detail;

  // spec'd examples, exact or at stated tolerance
  pass = pass && certainty_ratio(0.0, 0.37, 1e-9) == 0.0;
  pass = pass && certainty_ratio(0.0, -1.0, 1e-9) == 0.0;
  pass = pass && std::abs(certainty_ratio(0.5, 0.0, 1e-9) - 0.4999999995) <= 1e-12;
  const double limit = certainty_ratio(1.0, -1.0, 1e-9);
  pass = pass && std::abs(limit - 1e9) <= 1e-6;

  // brute-force oracle over 1000 random samples
  Rng rng(1357);
  const int c = 20;
  const int d = 16;
  ClassCenterMatrix centers(d, c);
  for (double& v : centers.data) v = rng.uniform(-1.0, 1.0);
  centers.renormalize_columns();

  const int n = 1000;
  Matrix embeddings(n, d);
  for (double& v : embeddings.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> labels(n);
  for (int& l : labels) l = static_cast<int>(rng.bounded(c));

  const auto records = batch_classifiability(embeddings, labels, centers, 1e-9);

  int mismatches = 0;
  for (int i = 0; i < n; ++i) {
    // naive recomputation with its own loops
    const auto cosine_to = [&](int j) {
      double dot_xw = 0.0, nx = 0.0, nw = 0.0;
      for (int k = 0; k < d; ++k) {
        const double xv = embeddings.at(i, k);
        const double wv = centers.column(j)[static_cast<std::size_t>(k)];
        dot_xw += xv * wv;
        nx += xv * xv;
        nw += wv * wv;
      }
      return std::clamp(dot_xw / (std::sqrt(nx) * std::sqrt(nw)), -1.0, 1.0);
    };
    const double own = cosine_to(labels[static_cast<std::size_t>(i)]);
    double best = -2.0;
    for (int j = 0; j < c; ++j) {
      if (j == labels[static_cast<std::size_t>(i)]) continue;
      const double s = cosine_to(j);
      if (s > best) best = s;
    }
    const double cr = own / (best + 1.0 + 1e-9);
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.ccs != own || r.nnccs != best || r.cr != cr) ++mismatches;
  }
  pass = pass && mismatches == 0;

  record(3, "CR formula suite vs brute force", pass,
         "limit value " + fmt(limit) + ", oracle mismatches " + std::to_string(mismatches) +
             "/1000");
}

// ---------------------------------------------------------------------------
// criteria 4, 5, 7, 8 share the reference run

void criterion_spearman(const Fixture& fx) {
  Matrix inputs = fx.heldout_set.inputs;
  const std::vector<double> predicted = predict_quality(fx.reference, inputs);
  std::vector<double> truth;
  truth.reserve(fx.heldout.size());
  for (const SyntheticSample& s : fx.heldout) truth.push_back(s.true_quality);

  const double rho = spearman(predicted, truth);
  record(4, "held-out quality rank correlation", rho >= kSpearmanBound,
         "spearman " + fmt(rho) + " vs bound " + fmt(kSpearmanBound));
}

void criterion_erc_behavior(const Fixture& fx) {
  const auto predicted = predicted_quality_by_id(fx, fx.reference);
  const double auc_pred =
      heldout_erc_auc(fx, [&](const SyntheticSample& s) { return predicted.at(s.id); });
  const double auc_oracle =
      heldout_erc_auc(fx, [](const SyntheticSample& s) { return s.true_quality; });

  double auc_random_sum = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    std::unordered_map<int, double> random_q;
    for (const SyntheticSample& s : fx.heldout) random_q[s.id] = rng.uniform(0.0, 1.0);
    auc_random_sum +=
        heldout_erc_auc(fx, [&](const SyntheticSample& s) { return random_q.at(s.id); });
  }
  const double auc_random = auc_random_sum / 5.0;

  const bool pass = auc_pred < auc_random && auc_oracle <= auc_pred + 0.02;
  record(5, "ERC drops under predicted-quality rejection", pass,
         "auc predicted " + fmt(auc_pred) + ", random " + fmt(auc_random) + ", oracle " +
             fmt(auc_oracle));
}

// ---------------------------------------------------------------------------
// criterion 6: ERC oracle equivalence

struct NaiveErc {
  double threshold = 0.0;
  std::vector<std::pair<double, double>> points;
  double auc = 0.0;
};

NaiveErc naive_erc(const std::vector<GenuinePair>& genuine, const std::vector<double>& impostors,
                   double fmr, const std::vector<double>& grid) {
  NaiveErc out;
  // own threshold scan
  std::vector<double> sorted = impostors;
  std::sort(sorted.begin(), sorted.end());
  out.threshold = sorted.back() + 1.0;
  for (double candidate : sorted) {
    long long count = 0;
    for (double s : impostors) {
      if (s >= candidate) ++count;
    }
    if (static_cast<double>(count) <= fmr * static_cast<double>(impostors.size())) {
      out.threshold = candidate;
      break;
    }
  }

  const long long g = static_cast<long long>(genuine.size());
  for (double r : grid) {
    // full re-sort and recount from scratch at every grid point
    std::vector<int> order(genuine.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return genuine[static_cast<std::size_t>(a)].quality <
             genuine[static_cast<std::size_t>(b)].quality;
    });
    const long long reject = std::min(erc_reject_count(r, g), g - 1);
    long long below = 0;
    for (long long k = reject; k < g; ++k) {
      if (genuine[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])].score <
          out.threshold) {
        ++below;
      }
    }
    out.points.emplace_back(r, static_cast<double>(below) / static_cast<double>(g - reject));
  }
  out.auc = erc_auc(out.points, grid.back());
  return out;
}

void criterion_erc_oracle() {
  Rng rng(2468);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int ng = 5 + static_cast<int>(rng.bounded(196));
    const int ni = 20 + static_cast<int>(rng.bounded(1981));
    std::vector<GenuinePair> genuine(static_cast<std::size_t>(ng));
    for (auto& p : genuine) {
      p.score = rng.uniform(-1.0, 1.0);
      // discrete qualities now and then to exercise the tie-break
      p.quality = trial % 3 == 0 ? static_cast<double>(rng.bounded(4)) : rng.uniform(0.0, 1.0);
    }
    std::vector<double> impostors(static_cast<std::size_t>(ni));
    for (double& s : impostors) s = rng.uniform(-1.0, 0.9);
    const double fmr = std::vector<double>{0.5, 0.1, 0.05, 1.0 / 3.0}[trial % 4];
    const double step = std::vector<double>{0.01, 0.05, 0.1}[trial % 3];
    const double r_max = std::vector<double>{0.5, 0.9, 0.95}[trial % 3];
    const auto grid = reject_grid(step, r_max);

    const ErcCurve fast = erc_curve(genuine, impostors, fmr, grid);
    const NaiveErc naive = naive_erc(genuine, impostors, fmr, grid);
    bool same = fast.threshold == naive.threshold && fast.auc == naive.auc &&
                fast.points.size() == naive.points.size();
    if (same) {
      for (std::size_t i = 0; i < fast.points.size(); ++i) {
        if (fast.points[i] != naive.points[i]) {
          same = false;
          break;
        }
      }
    }
    if (!same) ++mismatches;
  }
  record(6, "fast ERC equals the naive oracle exactly", mismatches == 0,
         std::to_string(50 - mismatches) + "/50 instances identical");
}

// ---------------------------------------------------------------------------
// criterion 7: ablation direction

void criterion_ablation(const Fixture& fx) {
  // same seeds and budget, CCS target instead of CR
  TrainConfig ccs_cfg = fx.cfg;
  ccs_cfg.target_mode = TrainConfig::Target::ccs;
  const ModelState ccs_model = train(fx.initial, fx.train_set, ccs_cfg).state;

  // pretrained base (margin objective only), then the head fitted on top
  TrainConfig base_cfg = fx.cfg;
  base_cfg.loss.lambda = 0.0;
  const ModelState base_model = train(fx.initial, fx.train_set, base_cfg).state;
  const ModelState on_top_model = train_on_top(base_model, fx.train_set, fx.cfg);

  const auto q_cr = predicted_quality_by_id(fx, fx.reference);
  const auto q_ccs = predicted_quality_by_id(fx, ccs_model);
  const auto q_top = predicted_quality_by_id(fx, on_top_model);

  const double auc_cr = heldout_erc_auc(fx, [&](const SyntheticSample& s) { return q_cr.at(s.id); });
  const double auc_ccs =
      heldout_erc_auc(fx, [&](const SyntheticSample& s) { return q_ccs.at(s.id); });
  const double auc_top =
      heldout_erc_auc(fx, [&](const SyntheticSample& s) { return q_top.at(s.id); });

  const bool pass = auc_cr <= auc_ccs + 0.005 && auc_cr <= auc_top + 0.005;
  record(7, "ablation soft dominance (CR vs CCS, simultaneous vs on-top)", pass,
         "auc cr " + fmt(auc_cr) + ", ccs " + fmt(auc_ccs) + ", on-top " + fmt(auc_top));
}

// ---------------------------------------------------------------------------
// criterion 8: quality-weighted template verification

void criterion_weighted_verification(const Fixture& fx) {
  const int templates_per_class = 5;
  const int per_class = 50;

  // round-robin grouping over the full dataset; every template mixes levels
  std::unordered_map<int, std::vector<const SyntheticSample*>> members;
  std::vector<int> template_ids;
  for (const SyntheticSample& s : fx.all) {
    const int within = s.id - s.label * per_class;
    const int tid = s.label * templates_per_class + within % templates_per_class;
    auto [it, inserted] = members.try_emplace(tid);
    if (inserted) template_ids.push_back(tid);
    it->second.push_back(&s);
  }

  EmbeddingStore sample_embeddings(16);
  for (const SyntheticSample& s : fx.all) {
    sample_embeddings.add(s.id, forward(fx.reference, s.input).normalized);
  }

  const auto aggregate = [&](bool use_oracle_quality) {
    EmbeddingStore store(16);
    for (int tid : template_ids) {
      std::vector<std::vector<double>> embeddings;
      std::vector<double> weights;
      for (const SyntheticSample* s : members.at(tid)) {
        const auto e = sample_embeddings.get(s->id);
        embeddings.emplace_back(e.begin(), e.end());
        weights.push_back(use_oracle_quality ? s->true_quality : 1.0);
      }
      store.add(tid, weighted_template_aggregate(embeddings, weights));
    }
    return store;
  };

  // template pairs: all genuine combos, seeded impostor sample
  PairList pairs;
  for (int j = 0; j < 20; ++j) {
    for (int a = 0; a < templates_per_class; ++a) {
      for (int b = a + 1; b < templates_per_class; ++b) {
        pairs.push_back({j * templates_per_class + a, j * templates_per_class + b, true});
      }
    }
  }
  std::vector<std::pair<int, int>> impostor_candidates;
  for (int ja = 0; ja < 20; ++ja) {
    for (int jb = ja + 1; jb < 20; ++jb) {
      for (int a = 0; a < templates_per_class; ++a) {
        for (int b = 0; b < templates_per_class; ++b) {
          impostor_candidates.emplace_back(ja * templates_per_class + a,
                                           jb * templates_per_class + b);
        }
      }
    }
  }
  Rng rng(4242);
  rng.shuffle(impostor_candidates);
  for (int i = 0; i < 2000; ++i) {
    pairs.push_back({impostor_candidates[static_cast<std::size_t>(i)].first,
                     impostor_candidates[static_cast<std::size_t>(i)].second, false});
  }

  const auto fnmr_of = [&](const EmbeddingStore& store) {
    std::vector<double> genuine_scores, impostor_scores;
    for (const Pair& p : pairs) {
      const double s = cosine_similarity(store.get(p.id_a), store.get(p.id_b));
      (p.genuine ? genuine_scores : impostor_scores).push_back(s);
    }
    return fnmr_at_threshold(genuine_scores, threshold_at_fmr(impostor_scores, 1e-2));
  };

  const double weighted = fnmr_of(aggregate(true));
  const double uniform = fnmr_of(aggregate(false));
  record(8, "oracle-weighted template FNMR vs uniform", weighted <= uniform,
         "weighted " + fmt(weighted) + ", uniform " + fmt(uniform));
}

// ---------------------------------------------------------------------------
// criterion 9: command determinism

void criterion_cmd_determinism() {
  const fs::path root = "acceptance_out";
  fs::remove_all(root);
  fs::create_directories(root);

  GenDataArgs gen;
  gen.seed = 5;
  gen.classes = 5;
  gen.per_class = 12;
  gen.dim = 10;
  gen.noise_levels = {0.05, 0.4};
  gen.num_genuine = 40;
  gen.num_impostor = 80;
  gen.out_dir = (root / "data").string();
  bool pass = cmd_gen_data(gen) == kExitOk;

  TrainArgs tr;
  tr.dataset = (root / "data" / "dataset.csv").string();
  tr.out_dir = (root / "a").string();
  tr.seed = 11;
  tr.iterations = 300;
  tr.batch_size = 10;
  tr.scale = 32.0;
  tr.embedding_dim = 8;
  tr.hidden_dims = {16};
  pass = pass && cmd_train(tr) == kExitOk;
  TrainArgs tr2 = tr;
  tr2.out_dir = (root / "b").string();
  pass = pass && cmd_train(tr2) == kExitOk;

  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  const bool ckpt_same =
      slurp(root / "a" / "checkpoint.bin") == slurp(root / "b" / "checkpoint.bin");
  const bool log_same = slurp(root / "a" / "train_log.csv") == slurp(root / "b" / "train_log.csv");
  const bool manifest_same =
      slurp(root / "a" / "manifest.json") == slurp(root / "b" / "manifest.json");
  fs::remove_all(root);

  record(9, "repeated cmd_train is byte-identical", pass && ckpt_same && log_same && manifest_same,
         std::string("checkpoint ") + (ckpt_same ? "same" : "DIFFERS") + ", log " +
             (log_same ? "same" : "DIFFERS") + ", manifest " +
             (manifest_same ? "same" : "DIFFERS"));
}

// ---------------------------------------------------------------------------
// criterion 10: smooth-L1 boundary

void criterion_smooth_l1_boundary() {
  double worst_value = 0.0;
  double worst_grad = 0.0;
  for (const double beta : {0.25, 0.5, 1.0, 2.0}) {
    for (const double sign : {1.0, -1.0}) {
      const double d = sign * beta;
      const double quad_value = 0.5 * d * d / beta;
      const double lin_value = std::abs(d) - 0.5 * beta;
      worst_value = std::max(worst_value, std::abs(quad_value - lin_value));
      // gradients in the prediction for target - prediction = d
      const double quad_grad = -d / beta;
      const double lin_grad = d > 0.0 ? -1.0 : 1.0;
      worst_grad = std::max(worst_grad, std::abs(quad_grad - lin_grad));
    }
  }
  record(10, "smooth-L1 branch agreement at |d| = beta", worst_value <= 1e-12 && worst_grad <= 1e-9,
         "value gap " + fmt(worst_value) + ", grad gap " + fmt(worst_grad));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();

  criterion_gradients();
  criterion_degenerate();
  criterion_cr_formulas();

  std::printf("building reference run (20 classes x 50, 5000 iterations)...\n");
  std::fflush(stdout);
  const Fixture fx = build_fixture();

  criterion_spearman(fx);
  criterion_erc_behavior(fx);
  criterion_erc_oracle();
  criterion_ablation(fx);
  criterion_weighted_verification(fx);
  criterion_cmd_determinism();
  criterion_smooth_l1_boundary();

  int failed = 0;
  for (const Criterion& c : g_results) {
    if (!c.pass) ++failed;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d/%zu criteria passed in %.1f s\n", static_cast<int>(g_results.size()) - failed,
              g_results.size(), seconds);
  return failed == 0 ? 0 : 1;
}
