#pragma once

#include <span>
#include <vector>

namespace crfiqa {

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Dot products of unit vectors can drift past 1 by a few ulps; everything that
// feeds an angle goes through this clamp first.
double clamp_cosine(double c);

// Throws NormalizationError on a zero vector.
std::vector<double> l2_normalize(std::span<const double> v);
void l2_normalize_in_place(std::span<double> v);

// <a,b> / (|a||b|), clamped into [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// cos(acos(cos_theta) + margin) via the angle-addition identity, with
// sin(theta) recovered as sqrt(1 - cos^2). Applied unconditionally; there is
// no fallback past theta + margin > pi.
double cos_add_margin(double cos_theta, double margin);

}  // namespace crfiqa
