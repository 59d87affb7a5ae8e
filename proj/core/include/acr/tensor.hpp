#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "acr/rng.hpp"

namespace acr {

// Dense row-major matrix with an optional gradient slot. All training-path
// arithmetic is double precision; file formats downcast to f32.
struct Tensor2D {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches this tensor

  Tensor2D() = default;
  Tensor2D(int r, int c, double fill = 0.0);
  static Tensor2D from(std::initializer_list<std::initializer_list<double>> v);

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double& gat(int r, int c) { return grad[static_cast<std::size_t>(r) * cols + c]; }

  std::size_t size() const { return data.size(); }
  void ensure_grad();
  void zero_grad();
  bool all_finite() const;
};

using TensorPtr = std::shared_ptr<Tensor2D>;

TensorPtr tensor(int rows, int cols, double fill = 0.0);
TensorPtr tensor(std::initializer_list<std::initializer_list<double>> v);

enum class Mode { kTrain, kInfer };

// Ordered record of primitive ops over one fixed forward graph. Replaying the
// record in reverse accumulates grad into every recorded input. Rebuilt every
// forward pass.
class Tape {
 public:
  void record(const TensorPtr& out, std::function<void()> backward_fn);
  // loss must be 1x1 and recorded on this tape. Seeds d(loss)/d(loss) = 1 and
  // replays all ops in reverse order.
  void backward(const TensorPtr& loss);
  void reset();
  std::size_t size() const { return ops_.size(); }

 private:
  struct Entry {
    const Tensor2D* out;
    std::function<void()> fn;
  };
  std::vector<Entry> ops_;
};

// Primitive ops. tape == nullptr runs forward-only (inference).
TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
// a * b^T; used for similarity matrices and attention scores.
TensorPtr matmul_nt(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(Tape* tape, const TensorPtr& a);
TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b);
// bias is 1 x cols, broadcast over rows.
TensorPtr add_rowvec(Tape* tape, const TensorPtr& a, const TensorPtr& bias);
TensorPtr hadamard(Tape* tape, const TensorPtr& a, const TensorPtr& b);
// elementwise k*x + c.
TensorPtr affine(Tape* tape, const TensorPtr& a, double k, double c);
TensorPtr gelu(Tape* tape, const TensorPtr& a);
TensorPtr softmax_rows(Tape* tape, const TensorPtr& a);
TensorPtr abs_elem(Tape* tape, const TensorPtr& a);
TensorPtr concat_rows(Tape* tape, const std::vector<TensorPtr>& parts);
TensorPtr concat_cols(Tape* tape, const std::vector<TensorPtr>& parts);
TensorPtr mean_rows(Tape* tape, const TensorPtr& a);  // 1 x cols
TensorPtr sum_all(Tape* tape, const TensorPtr& a);    // 1 x 1
TensorPtr l2_normalize_rows(Tape* tape, const TensorPtr& a);
// Parameter-free row standardization (x - mean) / sqrt(var + eps); backs the
// optional pre-norm flag.
TensorPtr standardize_rows(Tape* tape, const TensorPtr& a);
// -(1/rows) * sum_i log softmax(a)_ii for square a; the in-batch
// cross-entropy over diagonal positives.
TensorPtr diag_nll_mean(Tape* tape, const TensorPtr& a);
// Train mode: zero with probability rate, scale survivors by 1/(1-rate).
// Infer mode: identity. rate must be < 1.
TensorPtr dropout(Tape* tape, const TensorPtr& a, double rate, Mode mode,
                  CounterRng& rng);

double scalar(const TensorPtr& t);  // value of a 1x1 tensor

}  // namespace acr
