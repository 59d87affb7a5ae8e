#include "acr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "acr/errors.hpp"

namespace acr {

Tensor2D::Tensor2D(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
  if (r < 0 || c < 0) throw ConfigError("tensor: negative shape");
}

Tensor2D Tensor2D::from(std::initializer_list<std::initializer_list<double>> v) {
  Tensor2D t(static_cast<int>(v.size()),
             v.size() ? static_cast<int>(v.begin()->size()) : 0);
  int r = 0;
  for (const auto& row : v) {
    if (static_cast<int>(row.size()) != t.cols)
      throw ConfigError("tensor: ragged initializer");
    int c = 0;
    for (double x : row) t.at(r, c++) = x;
    ++r;
  }
  return t;
}

void Tensor2D::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor2D::zero_grad() { grad.clear(); }

bool Tensor2D::all_finite() const {
  return std::all_of(data.begin(), data.end(),
                     [](double x) { return std::isfinite(x); });
}

TensorPtr tensor(int rows, int cols, double fill) {
  return std::make_shared<Tensor2D>(rows, cols, fill);
}

TensorPtr tensor(std::initializer_list<std::initializer_list<double>> v) {
  return std::make_shared<Tensor2D>(Tensor2D::from(v));
}

double scalar(const TensorPtr& t) {
  if (t->rows != 1 || t->cols != 1) throw UsageError("scalar: tensor is not 1x1");
  return t->data[0];
}

void Tape::record(const TensorPtr& out, std::function<void()> backward_fn) {
  ops_.push_back({out.get(), std::move(backward_fn)});
}

void Tape::backward(const TensorPtr& loss) {
  if (loss->rows != 1 || loss->cols != 1)
    throw UsageError("backward: loss must be 1x1");
  bool found = false;
  for (const auto& e : ops_)
    if (e.out == loss.get()) { found = true; break; }
  if (!found) throw UsageError("backward: loss was not produced on this tape");
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->fn();
}

void Tape::reset() { ops_.clear(); }

namespace {

void check_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (a->rows != b->rows || a->cols != b->cols)
    throw ConfigError(std::string(op) + ": shape mismatch");
}

// Gradient present on the output implies the op was on a backward path.
bool has_grad(const TensorPtr& t) { return !t->grad.empty(); }

}  // namespace

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->cols != b->rows) throw ConfigError("matmul: inner dimension mismatch");
  auto out = tensor(a->rows, b->cols);
  const int m = a->rows, k = a->cols, n = b->cols;
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double av = a->at(i, p);
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) out->at(i, j) += av * b->at(p, j);
    }
  if (tape)
    tape->record(out, [a, b, out, m, k, n] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      b->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const double g = out->gat(i, j);
          if (g == 0.0) continue;
          for (int p = 0; p < k; ++p) {
            a->gat(i, p) += g * b->at(p, j);
            b->gat(p, j) += g * a->at(i, p);
          }
        }
    });
  return out;
}

TensorPtr matmul_nt(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->cols != b->cols) throw ConfigError("matmul_nt: inner dimension mismatch");
  auto out = tensor(a->rows, b->rows);
  const int m = a->rows, k = a->cols, n = b->rows;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += a->at(i, p) * b->at(j, p);
      out->at(i, j) = s;
    }
  if (tape)
    tape->record(out, [a, b, out, m, k, n] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      b->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const double g = out->gat(i, j);
          if (g == 0.0) continue;
          for (int p = 0; p < k; ++p) {
            a->gat(i, p) += g * b->at(j, p);
            b->gat(j, p) += g * a->at(i, p);
          }
        }
    });
  return out;
}

TensorPtr transpose(Tape* tape, const TensorPtr& a) {
  auto out = tensor(a->cols, a->rows);
  for (int i = 0; i < a->rows; ++i)
    for (int j = 0; j < a->cols; ++j) out->at(j, i) = a->at(i, j);
  if (tape)
    tape->record(out, [a, out] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      for (int i = 0; i < a->rows; ++i)
        for (int j = 0; j < a->cols; ++j) a->gat(i, j) += out->gat(j, i);
    });
  return out;
}

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "add");
  auto out = tensor(a->rows, a->cols);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = a->data[i] + b->data[i];
  if (tape)
    tape->record(out, [a, b, out] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      b->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) {
        a->grad[i] += out->grad[i];
        b->grad[i] += out->grad[i];
      }
    });
  return out;
}

TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "sub");
  auto out = tensor(a->rows, a->cols);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = a->data[i] - b->data[i];
  if (tape)
    tape->record(out, [a, b, out] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      b->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) {
        a->grad[i] += out->grad[i];
        b->grad[i] -= out->grad[i];
      }
    });
  return out;
}

TensorPtr add_rowvec(Tape* tape, const TensorPtr& a, const TensorPtr& bias) {
  if (bias->rows != 1 || bias->cols != a->cols)
    throw ConfigError("add_rowvec: bias must be 1 x cols");
  auto out = tensor(a->rows, a->cols);
  for (int i = 0; i < a->rows; ++i)
    for (int j = 0; j < a->cols; ++j)
      out->at(i, j) = a->at(i, j) + bias->at(0, j);
  if (tape)
    tape->record(out, [a, bias, out] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      bias->ensure_grad();
      for (int i = 0; i < a->rows; ++i)
        for (int j = 0; j < a->cols; ++j) {
          a->gat(i, j) += out->gat(i, j);
          bias->gat(0, j) += out->gat(i, j);
        }
    });
  return out;
}

TensorPtr hadamard(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "hadamard");
  auto out = tensor(a->rows, a->cols);
  for (std::size_t i = 0; i < a->size(); ++i)
    out->data[i] = a->data[i] * b->data[i];
  if (tape)
    tape->record(out, [a, b, out] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      b->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) {
        a->grad[i] += out->grad[i] * b->data[i];
        b->grad[i] += out->grad[i] * a->data[i];
      }
    });
  return out;
}

TensorPtr affine(Tape* tape, const TensorPtr& a, double k, double c) {
  auto out = tensor(a->rows, a->cols);
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = k * a->data[i] + c;
  if (tape)
    tape->record(out, [a, out, k] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += k * out->grad[i];
    });
  return out;
}

TensorPtr gelu(Tape* tape, const TensorPtr& a) {
  // Exact erf form: x * Phi(x).
  auto out = tensor(a->rows, a->cols);
  for (std::size_t i = 0; i < a->size(); ++i) {
    const double x = a->data[i];
    out->data[i] = x * 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  }
  if (tape)
    tape->record(out, [a, out] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      constexpr double inv_sqrt_2pi = 0.3989422804014327;
      for (std::size_t i = 0; i < out->size(); ++i) {
        const double x = a->data[i];
        const double phi = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
        a->grad[i] += out->grad[i] * (phi + x * pdf);
      }
    });
  return out;
}

TensorPtr softmax_rows(Tape* tape, const TensorPtr& a) {
  auto out = tensor(a->rows, a->cols);
  for (int i = 0; i < a->rows; ++i) {
    double mx = a->at(i, 0);
    for (int j = 1; j < a->cols; ++j) mx = std::max(mx, a->at(i, j));
    double sum = 0.0;
    for (int j = 0; j < a->cols; ++j) {
      out->at(i, j) = std::exp(a->at(i, j) - mx);
      sum += out->at(i, j);
    }
    for (int j = 0; j < a->cols; ++j) out->at(i, j) /= sum;
  }
  if (tape)
    tape->record(out, [a, out] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      for (int i = 0; i < a->rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < a->cols; ++j) dot += out->gat(i, j) * out->at(i, j);
        for (int j = 0; j < a->cols; ++j)
          a->gat(i, j) += out->at(i, j) * (out->gat(i, j) - dot);
      }
    });
  return out;
}

TensorPtr abs_elem(Tape* tape, const TensorPtr& a) {
  auto out = tensor(a->rows, a->cols);
  for (std::size_t i = 0; i < a->size(); ++i) out->data[i] = std::abs(a->data[i]);
  if (tape)
    tape->record(out, [a, out] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) {
        const double s = a->data[i] > 0 ? 1.0 : (a->data[i] < 0 ? -1.0 : 0.0);
        a->grad[i] += s * out->grad[i];
      }
    });
  return out;
}

TensorPtr concat_rows(Tape* tape, const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: empty part list");
  const int cols = parts[0]->cols;
  int rows = 0;
  for (const auto& p : parts) {
    if (p->cols != cols) throw ConfigError("concat_rows: column mismatch");
    rows += p->rows;
  }
  auto out = tensor(rows, cols);
  int r0 = 0;
  for (const auto& p : parts) {
    std::copy(p->data.begin(), p->data.end(),
              out->data.begin() + static_cast<std::size_t>(r0) * cols);
    r0 += p->rows;
  }
  if (tape)
    tape->record(out, [parts, out, cols] {
      if (!has_grad(out)) return;
      int r0 = 0;
      for (const auto& p : parts) {
        p->ensure_grad();
        for (int i = 0; i < p->rows; ++i)
          for (int j = 0; j < cols; ++j) p->gat(i, j) += out->gat(r0 + i, j);
        r0 += p->rows;
      }
    });
  return out;
}

TensorPtr concat_cols(Tape* tape, const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: empty part list");
  const int rows = parts[0]->rows;
  int cols = 0;
  for (const auto& p : parts) {
    if (p->rows != rows) throw ConfigError("concat_cols: row mismatch");
    cols += p->cols;
  }
  auto out = tensor(rows, cols);
  int c0 = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < p->cols; ++j) out->at(i, c0 + j) = p->at(i, j);
    c0 += p->cols;
  }
  if (tape)
    tape->record(out, [parts, out, rows] {
      if (!has_grad(out)) return;
      int c0 = 0;
      for (const auto& p : parts) {
        p->ensure_grad();
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < p->cols; ++j) p->gat(i, j) += out->gat(i, c0 + j);
        c0 += p->cols;
      }
    });
  return out;
}

TensorPtr mean_rows(Tape* tape, const TensorPtr& a) {
  if (a->rows == 0) throw UsageError("mean_rows: empty input");
  auto out = tensor(1, a->cols);
  for (int i = 0; i < a->rows; ++i)
    for (int j = 0; j < a->cols; ++j) out->at(0, j) += a->at(i, j);
  for (int j = 0; j < a->cols; ++j) out->at(0, j) /= a->rows;
  if (tape)
    tape->record(out, [a, out] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      const double inv = 1.0 / a->rows;
      for (int i = 0; i < a->rows; ++i)
        for (int j = 0; j < a->cols; ++j) a->gat(i, j) += inv * out->gat(0, j);
    });
  return out;
}

TensorPtr sum_all(Tape* tape, const TensorPtr& a) {
  auto out = tensor(1, 1);
  for (double x : a->data) out->data[0] += x;
  if (tape)
    tape->record(out, [a, out] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[0];
    });
  return out;
}

TensorPtr l2_normalize_rows(Tape* tape, const TensorPtr& a) {
  auto out = tensor(a->rows, a->cols);
  std::vector<double> norms(a->rows);
  for (int i = 0; i < a->rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < a->cols; ++j) s += a->at(i, j) * a->at(i, j);
    norms[i] = std::max(std::sqrt(s), 1e-12);
    for (int j = 0; j < a->cols; ++j) out->at(i, j) = a->at(i, j) / norms[i];
  }
  if (tape)
    tape->record(out, [a, out, norms] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      for (int i = 0; i < a->rows; ++i) {
        double dot = 0.0;
        for (int j = 0; j < a->cols; ++j) dot += out->gat(i, j) * out->at(i, j);
        for (int j = 0; j < a->cols; ++j)
          a->gat(i, j) += (out->gat(i, j) - dot * out->at(i, j)) / norms[i];
      }
    });
  return out;
}

TensorPtr standardize_rows(Tape* tape, const TensorPtr& a) {
  constexpr double eps = 1e-8;
  auto out = tensor(a->rows, a->cols);
  const int n = a->cols;
  std::vector<double> inv_std(a->rows);
  for (int i = 0; i < a->rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += a->at(i, j);
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = a->at(i, j) - mean;
      var += d * d;
    }
    var /= n;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) out->at(i, j) = (a->at(i, j) - mean) * inv_std[i];
  }
  if (tape)
    tape->record(out, [a, out, inv_std, n] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      for (int i = 0; i < a->rows; ++i) {
        double gsum = 0.0, gy = 0.0;
        for (int j = 0; j < n; ++j) {
          gsum += out->gat(i, j);
          gy += out->gat(i, j) * out->at(i, j);
        }
        for (int j = 0; j < n; ++j)
          a->gat(i, j) += inv_std[i] *
                          (out->gat(i, j) - gsum / n - out->at(i, j) * gy / n);
      }
    });
  return out;
}

TensorPtr diag_nll_mean(Tape* tape, const TensorPtr& a) {
  if (a->rows != a->cols) throw ConfigError("diag_nll_mean: square input required");
  const int n = a->rows;
  auto out = tensor(1, 1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double mx = a->at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, a->at(i, j));
    double lse = 0.0;
    for (int j = 0; j < n; ++j) lse += std::exp(a->at(i, j) - mx);
    lse = mx + std::log(lse);
    total += lse - a->at(i, i);
  }
  out->data[0] = total / n;
  if (tape)
    tape->record(out, [a, out, n] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      const double g = out->grad[0] / n;
      for (int i = 0; i < n; ++i) {
        double mx = a->at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, a->at(i, j));
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += std::exp(a->at(i, j) - mx);
        for (int j = 0; j < n; ++j) {
          const double p = std::exp(a->at(i, j) - mx) / sum;
          a->gat(i, j) += g * (p - (i == j ? 1.0 : 0.0));
        }
      }
    });
  return out;
}

TensorPtr dropout(Tape* tape, const TensorPtr& a, double rate, Mode mode,
                  CounterRng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  if (mode == Mode::kInfer || rate == 0.0) {
    auto out = tensor(a->rows, a->cols);
    out->data = a->data;
    if (tape)
      tape->record(out, [a, out] {
        if (!has_grad(out)) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[i];
      });
    return out;
  }
  auto out = tensor(a->rows, a->cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(a->size());
  for (std::size_t i = 0; i < a->size(); ++i) {
    (*mask)[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out->data[i] = a->data[i] * (*mask)[i];
  }
  if (tape)
    tape->record(out, [a, out, mask] {
      if (!has_grad(out)) return;
      a->ensure_grad();
      for (std::size_t i = 0; i < a->size(); ++i)
        a->grad[i] += out->grad[i] * (*mask)[i];
    });
  return out;
}

}  // namespace acr
