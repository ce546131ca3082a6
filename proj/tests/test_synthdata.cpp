#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <doctest.h>

#include "crfiqa/errors.hpp"
#include "crfiqa/geometry.hpp"
#include "crfiqa/synthdata.hpp"

using namespace crfiqa;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.num_classes = 5;
  spec.samples_per_class = 12;
  spec.input_dim = 8;
  spec.noise_levels = {0.05, 0.2, 0.5, 1.0};
  spec.seed = 11;
  return spec;
}

}  // namespace

TEST_SUITE("synthdata") {

TEST_CASE("generation is deterministic and balanced") {
  const auto a = generate(small_spec());
  const auto b = generate(small_spec());
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == 60);
  std::map<int, int> per_class;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].input == b[i].input);
    CHECK(std::abs(l2_norm(a[i].input) - 1.0) <= 1e-9);
    ++per_class[a[i].label];
  }
  for (const auto& [label, count] : per_class) CHECK(count == 12);

  SyntheticSpec other = small_spec();
  other.seed = 12;
  const auto c = generate(other);
  CHECK(a[0].input != c[0].input);
}

TEST_CASE("true quality is 1 at the cleanest level and ranks by sigma") {
  const auto samples = generate(small_spec());
  for (const auto& s : samples) {
    if (s.sigma == 0.05) CHECK(s.true_quality == 1.0);
    CHECK(s.true_quality > 0.0);
    CHECK(s.true_quality <= 1.0);
  }
}

TEST_CASE("near-zero noise keeps samples at the prototypes") {
  SyntheticSpec spec = small_spec();
  spec.noise_levels = {1e-12};
  const auto samples = generate(spec);
  // all samples of a class coincide, so intra-class cosine is 1
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].label != samples[i - 1].label) continue;
    CHECK(cosine_similarity(samples[i].input, samples[i - 1].input) ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("intra-class cosine decreases with sigma") {
  SyntheticSpec spec;
  spec.num_classes = 20;
  spec.samples_per_class = 50;
  spec.input_dim = 32;
  spec.noise_levels = {0.05, 0.2, 0.5, 1.0};
  spec.seed = 3;
  const auto samples = generate(spec);

  // mean pairwise cosine within (class, sigma) buckets, pooled per sigma
  std::map<double, std::pair<double, long long>> pooled;
  std::map<std::pair<int, double>, std::vector<const SyntheticSample*>> buckets;
  for (const auto& s : samples) buckets[{s.label, s.sigma}].push_back(&s);
  for (const auto& [key, members] : buckets) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        auto& [acc, count] = pooled[key.second];
        acc += cosine_similarity(members[i]->input, members[j]->input);
        ++count;
      }
    }
  }
  REQUIRE(pooled.size() == 4);
  double prev = 2.0;
  for (const auto& [sigma, acc_count] : pooled) {
    const double mean = acc_count.first / static_cast<double>(acc_count.second);
    CHECK(mean < prev);
    prev = mean;
  }
}

TEST_CASE("spec validation") {
  SyntheticSpec bad = small_spec();
  bad.noise_levels = {0.2, 0.1};
  CHECK_THROWS_AS(generate(bad), ConfigError);
  bad.noise_levels = {0.0, 0.1};
  CHECK_THROWS_AS(generate(bad), ConfigError);
  bad = small_spec();
  bad.num_classes = 1;
  CHECK_THROWS_AS(generate(bad), ConfigError);
}

TEST_CASE("make_pairs flags and counts are exact") {
  const auto samples = generate(small_spec());
  const PairList pairs = make_pairs(samples, 100, 100, 42);
  REQUIRE(pairs.size() == 200);
  std::map<int, const SyntheticSample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  int genuine = 0;
  for (const Pair& p : pairs) {
    CHECK(p.id_a != p.id_b);
    const bool same = by_id.at(p.id_a)->label == by_id.at(p.id_b)->label;
    CHECK(p.genuine == same);
    if (p.genuine) ++genuine;
  }
  CHECK(genuine == 100);

  // deterministic
  const PairList again = make_pairs(samples, 100, 100, 42);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].id_a == again[i].id_a);
    CHECK(pairs[i].id_b == again[i].id_b);
  }

  // impostor-free request
  const PairList only_genuine = make_pairs(samples, 10, 0, 1);
  CHECK(only_genuine.size() == 10);
  for (const Pair& p : only_genuine) CHECK(p.genuine);

  // infeasible count: 5 classes * C(12,2) = 330 genuine pairs exist
  CHECK_THROWS_AS(make_pairs(samples, 331, 0, 1), PairConstructionError);
}

TEST_CASE("split keeps the last samples of each class") {
  const auto samples = generate(small_spec());
  const SplitResult split = split_per_class(samples, 4);
  CHECK(split.train.size() == 40);
  CHECK(split.heldout.size() == 20);
  std::map<int, int> train_count, held_count;
  for (const auto& s : split.train) ++train_count[s.label];
  for (const auto& s : split.heldout) ++held_count[s.label];
  for (const auto& [label, count] : train_count) CHECK(count == 8);
  for (const auto& [label, count] : held_count) CHECK(count == 4);
  CHECK_THROWS_AS(split_per_class(samples, 12), ConfigError);
}

TEST_CASE("dataset csv round-trips") {
  const auto samples = generate(small_spec());
  const std::string path = "test_synthdata_dataset.csv";
  write_dataset_csv(path, samples);
  const auto loaded = read_dataset_csv(path);
  std::remove(path.c_str());
  REQUIRE(loaded.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].id == samples[i].id);
    CHECK(loaded[i].label == samples[i].label);
    CHECK(loaded[i].sigma == samples[i].sigma);
    CHECK(loaded[i].true_quality == samples[i].true_quality);
    CHECK(loaded[i].input == samples[i].input);
  }
}

TEST_CASE("pairs csv round-trips") {
  const auto samples = generate(small_spec());
  const PairList pairs = make_pairs(samples, 20, 30, 7);
  const std::string path = "test_synthdata_pairs.csv";
  write_pairs_csv(path, pairs);
  const PairList loaded = read_pairs_csv(path);
  std::remove(path.c_str());
  REQUIRE(loaded.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(loaded[i].id_a == pairs[i].id_a);
    CHECK(loaded[i].id_b == pairs[i].id_b);
    CHECK(loaded[i].genuine == pairs[i].genuine);
  }
}

TEST_CASE("to_training_set preserves rows and labels") {
  const auto samples = generate(small_spec());
  const TrainingSet set = to_training_set(samples);
  REQUIRE(set.inputs.rows == static_cast<int>(samples.size()));
  REQUIRE(set.inputs.cols == 8);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(set.labels[i] == samples[i].label);
    const auto row = set.inputs.row(static_cast<int>(i));
    for (int k = 0; k < 8; ++k) CHECK(row[static_cast<std::size_t>(k)] == samples[i].input[static_cast<std::size_t>(k)]);
  }
}

}  // TEST_SUITE
