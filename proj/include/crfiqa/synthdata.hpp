#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crfiqa/evaluation.hpp"
#include "crfiqa/model.hpp"

namespace crfiqa {

struct SyntheticSpec {
  int num_classes = 20;
  int samples_per_class = 50;
  int input_dim = 32;
  std::vector<double> noise_levels = {0.05, 0.2, 0.5, 1.0};  // ascending sigmas
  uint64_t seed = 0;
};

struct SyntheticSample {
  int id = 0;
  int label = 0;
  double sigma = 0.0;
  double true_quality = 0.0;  // sigma_min / sigma, 1 for the cleanest level
  std::vector<double> input;  // unit norm
};

// Class prototypes drawn uniformly on the unit sphere; each sample is the
// renormalized prototype plus sigma-scaled gaussian noise, with sigma cycling
// over noise_levels within each class. Deterministic for a fixed seed.
std::vector<SyntheticSample> generate(const SyntheticSpec& spec);

// Distinct unordered pairs drawn by enumerating all candidates and taking a
// seeded shuffle prefix: exact counts, no rejection loops. Genuine pairs come
// first in the output.
PairList make_pairs(const std::vector<SyntheticSample>& samples, int num_genuine,
                    int num_impostor, uint64_t seed);

struct SplitResult {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> heldout;
};

// The last holdout_per_class samples of each class go to the held-out side.
SplitResult split_per_class(const std::vector<SyntheticSample>& samples, int holdout_per_class);

TrainingSet to_training_set(const std::vector<SyntheticSample>& samples);

// CSV: id,label,sigma,true_quality,x0..x{dim-1}
void write_dataset_csv(const std::string& path, const std::vector<SyntheticSample>& samples);
std::vector<SyntheticSample> read_dataset_csv(const std::string& path);

// CSV: id_a,id_b,genuine
void write_pairs_csv(const std::string& path, const PairList& pairs);
PairList read_pairs_csv(const std::string& path);

}  // namespace crfiqa
