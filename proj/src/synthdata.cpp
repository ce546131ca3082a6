#include "crfiqa/synthdata.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "crfiqa/csv.hpp"
#include "crfiqa/errors.hpp"
#include "crfiqa/geometry.hpp"
#include "crfiqa/rng.hpp"

namespace crfiqa {

namespace {

void validate_spec(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (spec.samples_per_class < 2) throw ConfigError("need at least 2 samples per class");
  if (spec.input_dim < 2) throw ConfigError("input_dim must be >= 2");
  if (spec.noise_levels.empty()) throw ConfigError("noise_levels must be nonempty");
  double prev = 0.0;
  for (double s : spec.noise_levels) {
    if (!(s > prev)) {
      throw ConfigError("noise_levels must be strictly positive and strictly increasing");
    }
    prev = s;
  }
}

std::vector<double> unit_gaussian_direction(Rng& rng, int dim) {
  std::vector<double> v(dim);
  while (true) {
    for (double& x : v) x = rng.gaussian();
    if (l2_norm(v) > 0.0) break;
  }
  l2_normalize_in_place(v);
  return v;
}

}  // namespace

std::vector<SyntheticSample> generate(const SyntheticSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);

  // All prototypes are drawn before any sample so the per-class geometry is
  // independent of samples_per_class.
  std::vector<std::vector<double>> prototypes(spec.num_classes);
  for (int j = 0; j < spec.num_classes; ++j) {
    prototypes[j] = unit_gaussian_direction(rng, spec.input_dim);
  }

  const double sigma_min = spec.noise_levels.front();
  const int levels = static_cast<int>(spec.noise_levels.size());

  std::vector<SyntheticSample> samples;
  samples.reserve(static_cast<std::size_t>(spec.num_classes) * spec.samples_per_class);
  int id = 0;
  for (int j = 0; j < spec.num_classes; ++j) {
    for (int k = 0; k < spec.samples_per_class; ++k) {
      const double sigma = spec.noise_levels[static_cast<std::size_t>(k % levels)];
      SyntheticSample sample;
      sample.id = id++;
      sample.label = j;
      sample.sigma = sigma;
      sample.true_quality = sigma_min / sigma;
      sample.input.resize(spec.input_dim);
      for (int t = 0; t < spec.input_dim; ++t) {
        sample.input[static_cast<std::size_t>(t)] =
            prototypes[j][static_cast<std::size_t>(t)] + sigma * rng.gaussian();
      }
      l2_normalize_in_place(sample.input);
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

PairList make_pairs(const std::vector<SyntheticSample>& samples, int num_genuine,
                    int num_impostor, uint64_t seed) {
  if (num_genuine < 0 || num_impostor < 0) {
    throw PairConstructionError("pair counts must be nonnegative");
  }
  const std::size_t n = samples.size();

  std::vector<std::pair<int, int>> genuine_candidates;
  std::vector<std::pair<int, int>> impostor_candidates;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (samples[i].label == samples[j].label) {
        genuine_candidates.emplace_back(samples[i].id, samples[j].id);
      } else {
        impostor_candidates.emplace_back(samples[i].id, samples[j].id);
      }
    }
  }
  if (static_cast<std::size_t>(num_genuine) > genuine_candidates.size()) {
    throw PairConstructionError("requested " + std::to_string(num_genuine) +
                                " genuine pairs but only " +
                                std::to_string(genuine_candidates.size()) + " exist");
  }
  if (static_cast<std::size_t>(num_impostor) > impostor_candidates.size()) {
    throw PairConstructionError("requested " + std::to_string(num_impostor) +
                                " impostor pairs but only " +
                                std::to_string(impostor_candidates.size()) + " exist");
  }

  Rng rng(seed);
  rng.shuffle(genuine_candidates);
  rng.shuffle(impostor_candidates);

  PairList pairs;
  pairs.reserve(static_cast<std::size_t>(num_genuine) + num_impostor);
  for (int i = 0; i < num_genuine; ++i) {
    pairs.push_back({genuine_candidates[static_cast<std::size_t>(i)].first,
                     genuine_candidates[static_cast<std::size_t>(i)].second, true});
  }
  for (int i = 0; i < num_impostor; ++i) {
    pairs.push_back({impostor_candidates[static_cast<std::size_t>(i)].first,
                     impostor_candidates[static_cast<std::size_t>(i)].second, false});
  }
  return pairs;
}

SplitResult split_per_class(const std::vector<SyntheticSample>& samples, int holdout_per_class) {
  if (holdout_per_class < 0) throw ConfigError("holdout_per_class must be nonnegative");
  std::unordered_map<int, int> per_class_count;
  for (const SyntheticSample& s : samples) ++per_class_count[s.label];
  for (const auto& [label, count] : per_class_count) {
    if (count <= holdout_per_class) {
      throw ConfigError("class " + std::to_string(label) + " has only " + std::to_string(count) +
                        " samples; cannot hold out " + std::to_string(holdout_per_class));
    }
  }

  SplitResult split;
  std::unordered_map<int, int> seen;
  for (const SyntheticSample& s : samples) {
    const int keep_for_train = per_class_count[s.label] - holdout_per_class;
    if (seen[s.label]++ < keep_for_train) {
      split.train.push_back(s);
    } else {
      split.heldout.push_back(s);
    }
  }
  return split;
}

TrainingSet to_training_set(const std::vector<SyntheticSample>& samples) {
  if (samples.empty()) throw DimensionError("to_training_set: no samples");
  const int dim = static_cast<int>(samples.front().input.size());
  TrainingSet set;
  set.inputs = Matrix(static_cast<int>(samples.size()), dim);
  set.labels.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<int>(samples[i].input.size()) != dim) {
      throw DimensionError("to_training_set: inconsistent input dims");
    }
    std::copy(samples[i].input.begin(), samples[i].input.end(),
              set.inputs.row(static_cast<int>(i)).begin());
    set.labels[i] = samples[i].label;
  }
  return set;
}

void write_dataset_csv(const std::string& path, const std::vector<SyntheticSample>& samples) {
  if (samples.empty()) throw DimensionError("write_dataset_csv: no samples");
  const std::size_t dim = samples.front().input.size();
  CsvWriter out(path);
  std::vector<std::string> header = {"id", "label", "sigma", "true_quality"};
  for (std::size_t k = 0; k < dim; ++k) header.push_back("x" + std::to_string(k));
  out.row(header);
  std::vector<std::string> row;
  for (const SyntheticSample& s : samples) {
    row.clear();
    row.push_back(std::to_string(s.id));
    row.push_back(std::to_string(s.label));
    row.push_back(format_double(s.sigma));
    row.push_back(format_double(s.true_quality));
    for (double x : s.input) row.push_back(format_double(x));
    out.row(row);
  }
}

std::vector<SyntheticSample> read_dataset_csv(const std::string& path) {
  CsvReader in(path);
  std::string first_line_probe;

  // Infer dim from the header, then validate it exactly.
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open '" + path + "' for reading");
  if (!std::getline(probe, first_line_probe)) throw ParseError(path, 1, 1, "missing header row");
  const std::size_t commas =
      static_cast<std::size_t>(std::count(first_line_probe.begin(), first_line_probe.end(), ','));
  if (commas < 4) throw ParseError(path, 1, 1, "dataset header needs id,label,sigma,true_quality,x0,...");
  const std::size_t dim = commas - 3;

  std::vector<std::string> header = {"id", "label", "sigma", "true_quality"};
  for (std::size_t k = 0; k < dim; ++k) header.push_back("x" + std::to_string(k));
  in.expect_header(header);

  std::vector<SyntheticSample> samples;
  std::unordered_set<int> ids;
  while (in.next()) {
    if (in.fields().size() != header.size()) {
      in.fail(0, "expected " + std::to_string(header.size()) + " fields, found " +
                     std::to_string(in.fields().size()));
    }
    SyntheticSample s;
    s.id = static_cast<int>(in.as_int(0));
    s.label = static_cast<int>(in.as_int(1));
    s.sigma = in.as_double(2);
    s.true_quality = in.as_double(3);
    s.input.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      s.input[k] = in.as_double(static_cast<int>(4 + k));
    }
    if (!ids.insert(s.id).second) in.fail(0, "duplicate id " + std::to_string(s.id));
    if (s.label < 0) in.fail(1, "negative label");
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw ParseError(path, in.line(), 1, "dataset has no rows");
  return samples;
}

void write_pairs_csv(const std::string& path, const PairList& pairs) {
  CsvWriter out(path);
  out.row({"id_a", "id_b", "genuine"});
  for (const Pair& p : pairs) {
    out.row({std::to_string(p.id_a), std::to_string(p.id_b), p.genuine ? "1" : "0"});
  }
}

PairList read_pairs_csv(const std::string& path) {
  CsvReader in(path);
  in.expect_header({"id_a", "id_b", "genuine"});
  PairList pairs;
  while (in.next()) {
    if (in.fields().size() != 3) in.fail(0, "expected 3 fields");
    Pair p;
    p.id_a = static_cast<int>(in.as_int(0));
    p.id_b = static_cast<int>(in.as_int(1));
    const long long flag = in.as_int(2);
    if (flag != 0 && flag != 1) in.fail(2, "genuine flag must be 0 or 1");
    p.genuine = flag == 1;
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace crfiqa
