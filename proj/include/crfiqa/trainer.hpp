#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crfiqa/losses.hpp"
#include "crfiqa/model.hpp"

namespace crfiqa {

struct TrainConfig {
  LossConfig loss;
  int batch_size = 32;
  long long total_iterations = 1000;
  double lr = 0.1;
  std::vector<long long> lr_milestones;  // empty: 0.625 and 0.875 of the budget
  double momentum = 0.9;
  double weight_decay = 5e-4;
  uint64_t seed = 0;

  enum class Target { cr, ccs };
  Target target_mode = Target::cr;

  enum class Mode { simultaneous, on_top };
  Mode training_mode = Mode::simultaneous;

  long long log_interval = 100;
};

struct StepReport {
  long long iteration = 0;
  double arc_loss = 0.0;
  double cr_loss = 0.0;
  double total_loss = 0.0;
  double mean_ccs = 0.0;
  double mean_nnccs = 0.0;
};

// Gradient blocks mirroring parameter_blocks() order.
struct Gradients {
  std::vector<std::vector<double>> layer_weight;
  std::vector<std::vector<double>> layer_bias;
  std::vector<double> centers;
  std::vector<double> head_weight;
  double head_bias = 0.0;
};

Gradients make_gradients(const ModelState& state);
std::vector<std::span<double>> gradient_blocks(Gradients& grads);

struct EvalResult {
  double arc_loss = 0.0;
  double cr_loss = 0.0;
  double total_loss = 0.0;
  double mean_ccs = 0.0;
  double mean_nnccs = 0.0;
  Gradients grads;  // of total_loss w.r.t. parameters; no weight decay term
};

// Combined objective on one batch. Regression targets are recomputed from the
// live cosines and enter the loss as constants; pass `targets` to supply them
// externally instead (the gradients must not change either way).
EvalResult evaluate_batch(const ModelState& state, const Matrix& inputs,
                          std::span<const int> labels, const TrainConfig& cfg,
                          std::span<const double> targets = {});

// Regression-only objective on a frozen feature extractor; only the head
// blocks receive gradient.
EvalResult evaluate_on_top(const ModelState& state, const Matrix& inputs,
                           std::span<const int> labels, const TrainConfig& cfg,
                           std::span<const double> targets = {});

// g += wd * p; v = mu * v + g; p -= lr * v.
void sgd_update(std::span<double> param, std::span<const double> grad,
                std::span<double> velocity, double lr, double momentum, double weight_decay);

struct SgdState {
  std::vector<std::vector<double>> velocity;  // one buffer per parameter block
};
SgdState make_sgd_state(const ModelState& state);

std::vector<long long> default_milestones(long long total_iterations);
double lr_at(const TrainConfig& cfg, long long iteration);

// One optimizer step (0-based iteration index selects the scheduled lr).
// Throws DivergenceError when the loss or any parameter goes non-finite.
StepReport train_step(ModelState& state, SgdState& opt, const Matrix& inputs,
                      std::span<const int> labels, const TrainConfig& cfg, long long iteration);

// Seeded epoch shuffles, consecutive full batches, remainder dropped.
std::vector<std::vector<int>> make_batch_schedule(int num_samples, int batch_size,
                                                  long long total_iterations, uint64_t seed);

struct TrainResult {
  ModelState state;
  std::vector<StepReport> reports;  // one per iteration
};

TrainResult train(const ModelState& initial, const TrainingSet& data, const TrainConfig& cfg);

// Fits only the quality head against targets computed from the frozen model;
// backbone and centers are byte-identical before and after.
ModelState train_on_top(const ModelState& frozen, const TrainingSet& data, const TrainConfig& cfg);
TrainResult train_on_top_with_reports(const ModelState& frozen, const TrainingSet& data,
                                      const TrainConfig& cfg);

// CSV: iteration,arc_loss,cr_loss,total_loss,mean_ccs,mean_nnccs; one row per
// log_interval plus the final iteration.
void write_training_log_csv(const std::string& path, std::span<const StepReport> reports,
                            long long log_interval);

}  // namespace crfiqa
