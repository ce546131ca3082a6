#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace crfiqa {

struct Pair {
  int id_a = 0;
  int id_b = 0;
  bool genuine = false;
};

using PairList = std::vector<Pair>;

class EmbeddingStore {
 public:
  explicit EmbeddingStore(int dim);

  void add(int id, std::vector<double> embedding);
  std::span<const double> get(int id) const;
  bool contains(int id) const;
  int dim() const { return dim_; }
  std::size_t size() const { return by_id_.size(); }

 private:
  int dim_;
  std::unordered_map<int, std::vector<double>> by_id_;
};

// Cosine of the two (re-normalized) embeddings, one score per pair.
std::vector<double> comparison_scores(const EmbeddingStore& embeddings, const PairList& pairs);

// Smallest observed score t with fraction(impostor >= t) <= fmr_target; when
// even the maximum score admits too many matches, a value above the maximum is
// returned (FMR 0). Ties count together: FMR uses >=.
double threshold_at_fmr(std::span<const double> impostor_scores, double fmr_target);

// Fraction of genuine scores strictly below the threshold.
double fnmr_at_threshold(std::span<const double> genuine_scores, double threshold);

struct GenuinePair {
  double score = 0.0;
  double quality = 0.0;
};

struct ErcOptions {
  // Re-derive the threshold after each rejection step. Impostor pairs are
  // then rejected by quality as well, so impostor_qualities must be given.
  bool recalibrate_threshold = false;
  std::vector<double> impostor_qualities;
};

struct ErcCurve {
  double fmr_target = 0.0;
  double threshold = 0.0;  // fixed at rejection ratio 0
  double r_max = 0.0;
  std::vector<std::pair<double, double>> points;  // (reject_ratio, fnmr)
  double auc = 0.0;
};

// 0, step, 2*step, ... up to r_max inclusive.
std::vector<double> reject_grid(double step, double r_max);

// ceil(r * G), never negative. Callers additionally cap it at G - 1 so at
// least one genuine pair always remains.
long long erc_reject_count(double reject_ratio, long long num_genuine);

// Error-vs-reject curve: the threshold is fixed from the impostor scores at
// rejection 0, then for every grid ratio the lowest-quality genuine pairs are
// removed (stable tie-break by pair index) and FNMR is recomputed.
ErcCurve erc_curve(std::span<const GenuinePair> genuine, std::span<const double> impostor_scores,
                   double fmr_target, std::span<const double> grid,
                   const ErcOptions& options = {});

// Trapezoidal area normalized by r_max.
double erc_auc(std::span<const std::pair<double, double>> points, double r_max);
double erc_auc(const ErcCurve& curve);

// l2_normalize(sum(q_i e_i) / sum(q_i)); qualities must be nonnegative and
// not all zero.
std::vector<double> weighted_template_aggregate(const std::vector<std::vector<double>>& embeddings,
                                                std::span<const double> qualities);

// Spearman rank correlation with average-rank tie handling.
double spearman(std::span<const double> a, std::span<const double> b);

// Min-max to [0, 1]; a constant input maps to all 0.5.
std::vector<double> normalize_scores(std::span<const double> scores);

void write_erc_csv(const std::string& path, const ErcCurve& curve);
void write_erc_json(const std::string& path, const ErcCurve& curve);
std::vector<std::pair<double, double>> read_erc_points_csv(const std::string& path);

}  // namespace crfiqa
