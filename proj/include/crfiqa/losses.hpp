#pragma once

#include <span>
#include <vector>

#include "crfiqa/matrix.hpp"

namespace crfiqa {

struct LossConfig {
  double s = 64.0;       // logit scale
  double m = 0.5;        // additive angular margin, radians
  double lambda = 10.0;  // weight of the regression term
  double beta = 1.0;     // smooth-L1 switch point
  double eps = 1e-9;     // CR denominator shift
};

// Batch-mean loss plus its gradient. The layout of `grad` is documented on
// each producing function.
struct LossValue {
  double value = 0.0;
  std::vector<double> grad;
};

// Margin-penalty softmax on cosine logits. `cosines` is N x C; the returned
// grad is d(value)/d(cosines) in the same row-major layout. The margin is
// applied to the target-class cosine only; the log-sum-exp is evaluated in
// max-shifted form (s = 64 would overflow the raw exponentials).
LossValue arcface_loss(const Matrix& cosines, std::span<const int> labels, double s, double m);

// Mean smooth-L1 between prediction and target; grad is d(value)/d(prediction).
LossValue smooth_l1(std::span<const double> prediction, std::span<const double> target,
                    double beta);

struct CombinedLoss {
  double value = 0.0;
  std::vector<double> cosine_grad;      // margin term, unweighted
  std::vector<double> prediction_grad;  // regression term, lambda-weighted
};

// value = arc + lambda * cr_reg; the two gradient blocks keep their own
// layouts and combine with the same weights.
CombinedLoss combined_loss(const LossValue& arc, const LossValue& cr_reg, double lambda);

}  // namespace crfiqa
