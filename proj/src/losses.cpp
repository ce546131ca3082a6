#include "crfiqa/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crfiqa/errors.hpp"
#include "crfiqa/geometry.hpp"

namespace crfiqa {

LossValue arcface_loss(const Matrix& cosines, std::span<const int> labels, double s, double m) {
  const int n = cosines.rows;
  const int c = cosines.cols;
  if (n < 1 || c < 2) throw DimensionError("arcface_loss: need N >= 1 and C >= 2");
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw DimensionError("arcface_loss: " + std::to_string(n) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (!(s > 0.0)) throw ConfigError("arcface_loss: scale must be positive");
  if (!(m >= 0.0)) throw ConfigError("arcface_loss: margin must be nonnegative");
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw LabelError("arcface_loss: label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " out of range [0, " + std::to_string(c) + ")");
    }
  }

  const double cos_m = std::cos(m);
  const double sin_m = std::sin(m);

  LossValue out;
  out.grad.assign(static_cast<std::size_t>(n) * c, 0.0);
  std::vector<double> z(c);

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    for (int j = 0; j < c; ++j) z[j] = s * clamp_cosine(cosines.at(i, j));
    const double cy = clamp_cosine(cosines.at(i, y));
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cy * cy));
    z[y] = s * (cy * cos_m - sin_theta * sin_m);

    double zmax = z[0];
    for (int j = 1; j < c; ++j) zmax = std::max(zmax, z[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(z[j] - zmax);
    total += zmax + std::log(sum) - z[y];

    // d(mean loss)/dz_j = (softmax_j - [j == y]) / N, then chain through the
    // logit maps: dz_j/dcos_j = s off the target; on the target
    // d cos(theta+m)/d cos(theta) = cos_m + cos(theta) sin_m / sin(theta),
    // which is unbounded at |cos| = 1, so sin(theta) is floored.
    for (int j = 0; j < c; ++j) {
      const double p = std::exp(z[j] - zmax) / sum;
      const double gz = (p - (j == y ? 1.0 : 0.0)) / n;
      if (j == y) {
        const double slope = cos_m + cy * sin_m / std::max(sin_theta, 1e-12);
        out.grad[static_cast<std::size_t>(i) * c + j] = gz * s * slope;
      } else {
        out.grad[static_cast<std::size_t>(i) * c + j] = gz * s;
      }
    }
  }
  out.value = total / n;
  return out;
}

LossValue smooth_l1(std::span<const double> prediction, std::span<const double> target,
                    double beta) {
  if (!(beta > 0.0)) throw ConfigError("smooth_l1: beta must be positive");
  if (prediction.size() != target.size()) {
    throw DimensionError("smooth_l1: " + std::to_string(prediction.size()) +
                         " predictions vs " + std::to_string(target.size()) + " targets");
  }
  if (prediction.empty()) throw DimensionError("smooth_l1: empty input");

  const std::size_t n = prediction.size();
  LossValue out;
  out.grad.assign(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = target[i] - prediction[i];
    const double ad = std::abs(d);
    if (ad < beta) {
      total += 0.5 * d * d / beta;
      out.grad[i] = -d / beta / static_cast<double>(n);
    } else {
      total += ad - 0.5 * beta;
      out.grad[i] = (d > 0.0 ? -1.0 : 1.0) / static_cast<double>(n);
    }
  }
  out.value = total / static_cast<double>(n);
  return out;
}

CombinedLoss combined_loss(const LossValue& arc, const LossValue& cr_reg, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("combined_loss: lambda must be nonnegative");
  CombinedLoss out;
  out.value = arc.value + lambda * cr_reg.value;
  out.cosine_grad = arc.grad;
  out.prediction_grad.resize(cr_reg.grad.size());
  for (std::size_t i = 0; i < cr_reg.grad.size(); ++i) {
    out.prediction_grad[i] = lambda * cr_reg.grad[i];
  }
  return out;
}

}  // namespace crfiqa
