#pragma once

#include <span>
#include <vector>

#include "crfiqa/matrix.hpp"

namespace crfiqa {

// Unit-norm class centers, one column per class.
struct ClassCenterMatrix {
  int dim = 0;
  int num_classes = 0;
  std::vector<double> data;  // column j occupies [j*dim, (j+1)*dim)

  ClassCenterMatrix() = default;
  ClassCenterMatrix(int dim_in, int num_classes_in);

  std::span<double> column(int j);
  std::span<const double> column(int j) const;

  void renormalize_columns();
};

struct ClassifiabilityRecord {
  double ccs = 0.0;
  double nnccs = 0.0;
  double cr = 0.0;
  int label = -1;
};

struct NearestNegative {
  double similarity = -2.0;
  int index = -1;  // the maximizing class; never equals the query label
};

// Cosine between a sample and its own class center.
double ccs(std::span<const double> x, const ClassCenterMatrix& centers, int label);

// Max cosine between a sample and any other class center, by exhaustive scan.
NearestNegative nnccs(std::span<const double> x, const ClassCenterMatrix& centers, int label);

// ccs / (nnccs + 1 + eps). The shifted denominator is strictly positive for
// any nnccs in [-1, 1], so the ratio is always finite.
double certainty_ratio(double ccs_value, double nnccs_value, double eps);

// Per-row (ccs, nnccs, cr) for a batch of embeddings; output order follows
// input order. Per-sample failures are rethrown with the sample index.
std::vector<ClassifiabilityRecord> batch_classifiability(const Matrix& embeddings,
                                                         std::span<const int> labels,
                                                         const ClassCenterMatrix& centers,
                                                         double eps);

}  // namespace crfiqa
