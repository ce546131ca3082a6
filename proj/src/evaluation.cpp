#include "crfiqa/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "crfiqa/csv.hpp"
#include "crfiqa/errors.hpp"
#include "crfiqa/geometry.hpp"

namespace crfiqa {

EmbeddingStore::EmbeddingStore(int dim) : dim_(dim) {
  if (dim < 1) throw DimensionError("EmbeddingStore: dim must be positive");
}

void EmbeddingStore::add(int id, std::vector<double> embedding) {
  if (static_cast<int>(embedding.size()) != dim_) {
    throw DimensionError("EmbeddingStore: embedding for id " + std::to_string(id) + " has dim " +
                         std::to_string(embedding.size()) + ", expected " + std::to_string(dim_));
  }
  const auto [_, inserted] = by_id_.emplace(id, std::move(embedding));
  if (!inserted) throw LookupError("EmbeddingStore: duplicate id " + std::to_string(id));
}

std::span<const double> EmbeddingStore::get(int id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) throw LookupError("EmbeddingStore: unknown id " + std::to_string(id));
  return it->second;
}

bool EmbeddingStore::contains(int id) const { return by_id_.contains(id); }

std::vector<double> comparison_scores(const EmbeddingStore& embeddings, const PairList& pairs) {
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const Pair& p : pairs) {
    scores.push_back(cosine_similarity(embeddings.get(p.id_a), embeddings.get(p.id_b)));
  }
  return scores;
}

double threshold_at_fmr(std::span<const double> impostor_scores, double fmr_target) {
  if (impostor_scores.empty()) throw EmptyScoresError("threshold_at_fmr: no impostor scores");
  if (!(fmr_target > 0.0 && fmr_target <= 1.0)) {
    throw ConfigError("threshold_at_fmr: fmr_target must be in (0, 1]");
  }
  std::vector<double> sorted(impostor_scores.begin(), impostor_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const long long n = static_cast<long long>(sorted.size());
  const long long allowed =
      static_cast<long long>(std::floor(fmr_target * static_cast<double>(n)));
  // Walk distinct values upward; count(>= sorted[i]) = n - i at each first
  // occurrence. The smallest admissible observed value wins.
  for (long long i = 0; i < n; ++i) {
    if (i > 0 && sorted[i] == sorted[i - 1]) continue;
    if (n - i <= allowed) return sorted[i];
  }
  return sorted.back() + 1.0;  // above every observed score: FMR 0
}

double fnmr_at_threshold(std::span<const double> genuine_scores, double threshold) {
  if (genuine_scores.empty()) throw EmptyScoresError("fnmr_at_threshold: no genuine scores");
  long long below = 0;
  for (double s : genuine_scores) {
    if (s < threshold) ++below;
  }
  return static_cast<double>(below) / static_cast<double>(genuine_scores.size());
}

std::vector<double> reject_grid(double step, double r_max) {
  if (!(step > 0.0)) throw ConfigError("reject_grid: step must be positive");
  if (!(r_max >= 0.0)) throw ConfigError("reject_grid: r_max must be nonnegative");
  std::vector<double> grid;
  for (long long i = 0;; ++i) {
    const double r = static_cast<double>(i) * step;
    if (r > r_max + 1e-12) break;
    grid.push_back(std::min(r, r_max));
  }
  return grid;
}

long long erc_reject_count(double reject_ratio, long long num_genuine) {
  const long long k =
      static_cast<long long>(std::ceil(reject_ratio * static_cast<double>(num_genuine)));
  return std::max<long long>(k, 0);
}

namespace {

void validate_grid(std::span<const double> grid) {
  if (grid.size() < 2) throw InsufficientPointsError("erc_curve: grid needs at least 2 ratios");
  if (grid.front() != 0.0) throw ConfigError("erc_curve: grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ConfigError("erc_curve: grid must be strictly ascending");
  }
  if (grid.back() >= 1.0) throw ConfigError("erc_curve: cannot reject everything (r_max >= 1)");
}

// Pair indices ordered worst quality first, ties kept in input order.
std::vector<int> quality_order(std::span<const GenuinePair> genuine) {
  std::vector<int> order(genuine.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return genuine[a].quality < genuine[b].quality; });
  return order;
}

}  // namespace

ErcCurve erc_curve(std::span<const GenuinePair> genuine, std::span<const double> impostor_scores,
                   double fmr_target, std::span<const double> grid, const ErcOptions& options) {
  if (genuine.empty()) throw EmptyScoresError("erc_curve: no genuine pairs");
  validate_grid(grid);
  if (options.recalibrate_threshold &&
      options.impostor_qualities.size() != impostor_scores.size()) {
    throw ConfigError("erc_curve: recalibration needs one quality per impostor pair");
  }

  ErcCurve curve;
  curve.fmr_target = fmr_target;
  curve.threshold = threshold_at_fmr(impostor_scores, fmr_target);
  curve.r_max = grid.back();

  const long long g = static_cast<long long>(genuine.size());
  const std::vector<int> order = quality_order(genuine);

  // suffix_below[k] = among pairs order[k..], how many score under the fixed
  // threshold; rejecting the k worst leaves exactly that count of misses.
  std::vector<long long> suffix_below(genuine.size() + 1, 0);
  for (long long k = g - 1; k >= 0; --k) {
    suffix_below[k] = suffix_below[k + 1] +
                      (genuine[order[static_cast<std::size_t>(k)]].score < curve.threshold ? 1 : 0);
  }

  std::vector<int> impostor_order;
  if (options.recalibrate_threshold) {
    impostor_order.resize(impostor_scores.size());
    std::iota(impostor_order.begin(), impostor_order.end(), 0);
    std::stable_sort(impostor_order.begin(), impostor_order.end(), [&](int a, int b) {
      return options.impostor_qualities[static_cast<std::size_t>(a)] <
             options.impostor_qualities[static_cast<std::size_t>(b)];
    });
  }

  for (double r : grid) {
    const long long reject = std::min(erc_reject_count(r, g), g - 1);
    const long long remaining = g - reject;
    double fnmr;
    if (!options.recalibrate_threshold) {
      fnmr = static_cast<double>(suffix_below[static_cast<std::size_t>(reject)]) /
             static_cast<double>(remaining);
    } else {
      const long long ni = static_cast<long long>(impostor_scores.size());
      const long long reject_imp = std::min(erc_reject_count(r, ni), ni - 1);
      std::vector<double> kept_imp;
      kept_imp.reserve(static_cast<std::size_t>(ni - reject_imp));
      for (long long k = reject_imp; k < ni; ++k) {
        kept_imp.push_back(impostor_scores[static_cast<std::size_t>(impostor_order[k])]);
      }
      const double t = threshold_at_fmr(kept_imp, fmr_target);
      long long below = 0;
      for (long long k = reject; k < g; ++k) {
        if (genuine[order[static_cast<std::size_t>(k)]].score < t) ++below;
      }
      fnmr = static_cast<double>(below) / static_cast<double>(remaining);
    }
    curve.points.emplace_back(r, fnmr);
  }

  curve.auc = erc_auc(curve.points, curve.r_max);
  return curve;
}

double erc_auc(std::span<const std::pair<double, double>> points, double r_max) {
  if (points.size() < 2) throw InsufficientPointsError("erc_auc: need at least 2 points");
  if (!(r_max > 0.0)) throw ConfigError("erc_auc: r_max must be positive");
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double dx = points[i].first - points[i - 1].first;
    if (dx < 0.0) throw ConfigError("erc_auc: points must be sorted by reject ratio");
    area += dx * 0.5 * (points[i].second + points[i - 1].second);
  }
  return area / r_max;
}

double erc_auc(const ErcCurve& curve) { return erc_auc(curve.points, curve.r_max); }

std::vector<double> weighted_template_aggregate(const std::vector<std::vector<double>>& embeddings,
                                                std::span<const double> qualities) {
  if (embeddings.empty()) throw DimensionError("weighted_template_aggregate: no embeddings");
  if (embeddings.size() != qualities.size()) {
    throw DimensionError("weighted_template_aggregate: " + std::to_string(embeddings.size()) +
                         " embeddings vs " + std::to_string(qualities.size()) + " qualities");
  }
  const std::size_t d = embeddings.front().size();
  double weight_sum = 0.0;
  for (double q : qualities) {
    if (q < 0.0) throw DegenerateWeightsError("weighted_template_aggregate: negative quality");
    weight_sum += q;
  }
  if (weight_sum == 0.0) {
    throw DegenerateWeightsError("weighted_template_aggregate: all-zero qualities");
  }
  std::vector<double> acc(d, 0.0);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].size() != d) {
      throw DimensionError("weighted_template_aggregate: inconsistent embedding dims");
    }
    for (std::size_t k = 0; k < d; ++k) acc[k] += qualities[i] * embeddings[i][k];
  }
  for (double& v : acc) v /= weight_sum;
  return l2_normalize(acc);
}

namespace {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return values[static_cast<std::size_t>(a)] < values[static_cast<std::size_t>(b)]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[static_cast<std::size_t>(order[j + 1])] ==
                            values[static_cast<std::size_t>(order[i])]) {
      ++j;
    }
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[static_cast<std::size_t>(order[k])] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman: size mismatch");
  if (a.size() < 3) throw InsufficientPointsError("spearman: need at least 3 observations");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    mean_a += ra[i];
    mean_b += rb[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean_a;
    const double db = rb[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) {
    throw ConstantInputError("spearman: correlation undefined for constant input");
  }
  return cov / std::sqrt(var_a * var_b);
}

std::vector<double> normalize_scores(std::span<const double> scores) {
  if (scores.empty()) throw EmptyScoresError("normalize_scores: empty input");
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> out(scores.size());
  if (lo == hi) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / (hi - lo);
  return out;
}

void write_erc_csv(const std::string& path, const ErcCurve& curve) {
  CsvWriter out(path);
  out.row({"reject_ratio", "fnmr"});
  for (const auto& [r, fnmr] : curve.points) {
    out.row({format_double(r), format_double(fnmr)});
  }
}

void write_erc_json(const std::string& path, const ErcCurve& curve) {
  nlohmann::json j;
  j["fmr_target"] = curve.fmr_target;
  j["threshold"] = curve.threshold;
  j["auc"] = curve.auc;
  j["r_max"] = curve.r_max;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("error writing '" + path + "'");
}

std::vector<std::pair<double, double>> read_erc_points_csv(const std::string& path) {
  CsvReader in(path);
  in.expect_header({"reject_ratio", "fnmr"});
  std::vector<std::pair<double, double>> points;
  while (in.next()) {
    if (in.fields().size() != 2) in.fail(0, "expected 2 fields");
    points.emplace_back(in.as_double(0), in.as_double(1));
  }
  return points;
}

}  // namespace crfiqa
