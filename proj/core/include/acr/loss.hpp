#pragma once

#include "acr/tensor.hpp"

namespace acr {

struct LossWeights {
  double directional = 0.3;
  double l1 = 0.3;
  double contrastive = 0.4;
};

// Validates nonnegativity and renormalizes sums within 1e-6 of 1; larger
// deviations are rejected.
LossWeights validate_weights(double directional, double l1, double contrastive);

struct BatchLossReport {
  double directional = 0.0;
  double l1 = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
  int batch_size = 0;
};

// Scalar (tape-free) component forms; rows of a and t are matched pairs.
double directional_loss(const Tensor2D& a, const Tensor2D& t);
double l1_loss(const Tensor2D& a, const Tensor2D& t);
double contrastive_loss(const Tensor2D& a, const Tensor2D& t, double temperature);

struct HybridLossResult {
  TensorPtr total;  // 1x1, on the tape
  BatchLossReport report;
};

// Differentiable hybrid loss over stacked unit-row batches.
HybridLossResult hybrid_loss(Tape* tape, const TensorPtr& a, const TensorPtr& t,
                             const LossWeights& weights, double temperature);

}  // namespace acr
