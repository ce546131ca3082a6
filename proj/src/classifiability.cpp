#include "crfiqa/classifiability.hpp"

#include <string>

#include "crfiqa/errors.hpp"
#include "crfiqa/geometry.hpp"

namespace crfiqa {

ClassCenterMatrix::ClassCenterMatrix(int dim_in, int num_classes_in)
    : dim(dim_in), num_classes(num_classes_in) {
  if (dim < 2) throw DimensionError("class centers need dim >= 2, got " + std::to_string(dim));
  if (num_classes < 2) {
    throw InsufficientClassesError("need at least 2 classes, got " + std::to_string(num_classes));
  }
  data.assign(static_cast<std::size_t>(dim) * num_classes, 0.0);
}

std::span<double> ClassCenterMatrix::column(int j) {
  return {data.data() + static_cast<std::size_t>(j) * dim, static_cast<std::size_t>(dim)};
}

std::span<const double> ClassCenterMatrix::column(int j) const {
  return {data.data() + static_cast<std::size_t>(j) * dim, static_cast<std::size_t>(dim)};
}

void ClassCenterMatrix::renormalize_columns() {
  for (int j = 0; j < num_classes; ++j) l2_normalize_in_place(column(j));
}

namespace {

void check_label(const ClassCenterMatrix& centers, int label) {
  if (label < 0 || label >= centers.num_classes) {
    throw LabelError("label " + std::to_string(label) + " out of range [0, " +
                     std::to_string(centers.num_classes) + ")");
  }
}

}  // namespace

double ccs(std::span<const double> x, const ClassCenterMatrix& centers, int label) {
  check_label(centers, label);
  return cosine_similarity(x, centers.column(label));
}

NearestNegative nnccs(std::span<const double> x, const ClassCenterMatrix& centers, int label) {
  if (centers.num_classes < 2) {
    throw InsufficientClassesError("nnccs needs at least 2 classes");
  }
  check_label(centers, label);
  NearestNegative best;
  for (int j = 0; j < centers.num_classes; ++j) {
    if (j == label) continue;
    const double s = cosine_similarity(x, centers.column(j));
    if (s > best.similarity) best = {s, j};
  }
  return best;
}

double certainty_ratio(double ccs_value, double nnccs_value, double eps) {
  if (!(eps > 0.0)) throw ConfigError("certainty_ratio: eps must be positive");
  return ccs_value / (nnccs_value + 1.0 + eps);
}

std::vector<ClassifiabilityRecord> batch_classifiability(const Matrix& embeddings,
                                                         std::span<const int> labels,
                                                         const ClassCenterMatrix& centers,
                                                         double eps) {
  if (embeddings.rows < 1) throw DimensionError("batch_classifiability: empty batch");
  if (static_cast<std::size_t>(embeddings.rows) != labels.size()) {
    throw DimensionError("batch_classifiability: " + std::to_string(embeddings.rows) +
                         " embeddings vs " + std::to_string(labels.size()) + " labels");
  }
  std::vector<ClassifiabilityRecord> records(embeddings.rows);
  for (int i = 0; i < embeddings.rows; ++i) {
    const std::string at = "sample " + std::to_string(i) + ": ";
    try {
      ClassifiabilityRecord& r = records[i];
      r.label = labels[i];
      r.ccs = ccs(embeddings.row(i), centers, labels[i]);
      r.nnccs = nnccs(embeddings.row(i), centers, labels[i]).similarity;
      r.cr = certainty_ratio(r.ccs, r.nnccs, eps);
    } catch (const LabelError& e) {
      throw LabelError(at + e.what());
    } catch (const NormalizationError& e) {
      throw NormalizationError(at + e.what());
    } catch (const DimensionError& e) {
      throw DimensionError(at + e.what());
    }
  }
  return records;
}

}  // namespace crfiqa
