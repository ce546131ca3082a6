#include "crfiqa/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "crfiqa/errors.hpp"

namespace crfiqa {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: size mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double clamp_cosine(double c) { return std::clamp(c, -1.0, 1.0); }

std::vector<double> l2_normalize(std::span<const double> v) {
  const double n = l2_norm(v);
  if (n == 0.0) throw NormalizationError("cannot normalize a zero vector");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

void l2_normalize_in_place(std::span<double> v) {
  const double n = l2_norm(v);
  if (n == 0.0) throw NormalizationError("cannot normalize a zero vector");
  for (double& x : v) x /= n;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_similarity: size mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw NormalizationError("cosine of a zero vector");
  return clamp_cosine(dot(a, b) / (na * nb));
}

double cos_add_margin(double cos_theta, double margin) {
  const double c = clamp_cosine(cos_theta);
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - c * c));
  return c * std::cos(margin) - sin_theta * std::sin(margin);
}

}  // namespace crfiqa
