#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crfiqa {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;

struct GenDataArgs {
  uint64_t seed = 0;
  int classes = 20;
  int per_class = 50;
  int dim = 32;
  std::vector<double> noise_levels = {0.05, 0.2, 0.5, 1.0};
  int holdout_per_class = 0;  // > 0 writes a train/eval split
  int num_genuine = 600;
  int num_impostor = 4000;
  int templates_per_class = 0;  // > 0 also writes template files
  int template_impostors = 0;   // 0: same count as the genuine template pairs
  std::string out_dir;
};

struct TrainArgs {
  std::string dataset;
  std::string out_dir;
  std::string checkpoint_in;  // required for mode on-top
  uint64_t seed = 0;
  long long iterations = 5000;
  int batch_size = 32;
  double lr = 0.1;
  std::vector<long long> lr_milestones;  // empty: derived from iterations
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lambda = 10.0;
  double margin = 0.5;
  double scale = 64.0;
  double beta = 1.0;
  double eps = 1e-9;
  std::string target = "cr";          // cr | ccs
  std::string mode = "simultaneous";  // simultaneous | on-top
  int embedding_dim = 16;
  std::vector<int> hidden_dims = {64};
  std::string activation = "relu";  // relu | tanh
  bool head_on_normalized = false;
  long long log_interval = 100;
};

struct ScoreArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out_dir;
};

struct ErcArgs {
  std::string checkpoint;
  std::string dataset;
  std::string pairs;
  std::string scores;
  std::string out_dir;
  double fmr = 1e-2;
  double grid_step = 0.01;
  double grid_max = 0.95;
  std::string pair_quality = "min";  // min | mean
};

struct WeightedVerifyArgs {
  std::string checkpoint;
  std::string dataset;
  std::string templates;  // CSV template_id,sample_id
  std::string pairs;      // CSV id_a,id_b,genuine over template ids
  std::string scores;
  std::string out_dir;
  double fmr = 1e-2;
};

int cmd_gen_data(const GenDataArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_score(const ScoreArgs& args);
int cmd_erc(const ErcArgs& args);
int cmd_weighted_verify(const WeightedVerifyArgs& args);

}  // namespace crfiqa
