#include "acr/loss.hpp"

#include <cmath>

#include "acr/errors.hpp"

namespace acr {

namespace {

void check_pairs(const Tensor2D& a, const Tensor2D& t, const char* op) {
  if (a.rows != t.rows || a.cols != t.cols)
    throw ConfigError(std::string(op) + ": shape mismatch");
  if (a.rows < 1) throw UsageError(std::string(op) + ": empty batch");
}

void check_unit_rows(const Tensor2D& m, const char* op) {
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m.at(i, j) * m.at(i, j);
    if (std::abs(std::sqrt(s) - 1.0) > 1e-6)
      throw UsageError(std::string(op) + ": rows must be unit-norm");
  }
}

}  // namespace

LossWeights validate_weights(double directional, double l1, double contrastive) {
  if (directional < 0 || l1 < 0 || contrastive < 0)
    throw ConfigError("loss weights must be nonnegative");
  const double sum = directional + l1 + contrastive;
  if (std::abs(sum - 1.0) > 1e-6)
    throw ConfigError("loss weights must sum to 1");
  return LossWeights{directional / sum, l1 / sum, contrastive / sum};
}

double directional_loss(const Tensor2D& a, const Tensor2D& t) {
  check_pairs(a, t, "directional_loss");
  check_unit_rows(a, "directional_loss");
  check_unit_rows(t, "directional_loss");
  double acc = 0.0;
  for (int i = 0; i < a.rows; ++i) {
    double cos = 0.0;
    for (int j = 0; j < a.cols; ++j) cos += a.at(i, j) * t.at(i, j);
    acc += 1.0 - cos;
  }
  return acc / a.rows;
}

double l1_loss(const Tensor2D& a, const Tensor2D& t) {
  check_pairs(a, t, "l1_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    acc += std::abs(a.data[i] - t.data[i]);
  return acc / static_cast<double>(a.data.size());
}

double contrastive_loss(const Tensor2D& a, const Tensor2D& t, double temperature) {
  check_pairs(a, t, "contrastive_loss");
  check_unit_rows(a, "contrastive_loss");
  check_unit_rows(t, "contrastive_loss");
  if (temperature <= 0.0) throw ConfigError("contrastive_loss: temperature must be > 0");
  const int b = a.rows;
  auto nll = [&](bool row_direction) {
    double total = 0.0;
    for (int i = 0; i < b; ++i) {
      double mx = -1e300;
      std::vector<double> logits(b);
      for (int j = 0; j < b; ++j) {
        double s = 0.0;
        for (int c = 0; c < a.cols; ++c)
          s += row_direction ? a.at(i, c) * t.at(j, c) : t.at(i, c) * a.at(j, c);
        logits[j] = s / temperature;
        mx = std::max(mx, logits[j]);
      }
      double lse = 0.0;
      for (double l : logits) lse += std::exp(l - mx);
      total += mx + std::log(lse) - logits[i];
    }
    return total / b;
  };
  return 0.5 * (nll(true) + nll(false));
}

HybridLossResult hybrid_loss(Tape* tape, const TensorPtr& a, const TensorPtr& t,
                             const LossWeights& weights, double temperature) {
  check_pairs(*a, *t, "hybrid_loss");
  if (temperature <= 0.0) throw ConfigError("hybrid_loss: temperature must be > 0");
  const int b = a->rows;
  const int d = a->cols;

  // Directional: mean_i (1 - a_i . t_i), rows are unit by contract.
  auto dir = affine(tape, sum_all(tape, hadamard(tape, a, t)),
                    -1.0 / b, 1.0);
  // L1 over normalized embeddings.
  auto l1 = affine(tape, sum_all(tape, abs_elem(tape, sub(tape, a, t))),
                   1.0 / (static_cast<double>(b) * d), 0.0);
  // Symmetric in-batch cross-entropy over S = a t^T / tau.
  auto sim = affine(tape, matmul_nt(tape, a, t), 1.0 / temperature, 0.0);
  auto con = affine(tape,
                    add(tape, diag_nll_mean(tape, sim),
                        diag_nll_mean(tape, transpose(tape, sim))),
                    0.5, 0.0);

  auto total = add(tape, add(tape, affine(tape, dir, weights.directional, 0.0),
                             affine(tape, l1, weights.l1, 0.0)),
                   affine(tape, con, weights.contrastive, 0.0));

  HybridLossResult out;
  out.total = total;
  out.report.directional = scalar(dir);
  out.report.l1 = scalar(l1);
  out.report.contrastive = scalar(con);
  out.report.total = scalar(total);
  out.report.batch_size = b;
  return out;
}

}  // namespace acr
