#include "engrave/autodiff.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "engrave/error.h"

namespace engrave::ad {
namespace {

thread_local bool g_recording = true;

std::string shape_str(int r, int c) {
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

[[noreturn]] void shape_error(const char* op, const std::string& expected,
                              const Matrix& got) {
  throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": expected " + expected +
                                             ", got " + shape_str(got.rows, got.cols));
}

void require_same(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error(op, shape_str(a.rows, a.cols), b);
}

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// C += A * B (A r x k, B k x c).
void gemm_acc(const double* a, const double* b, double* c, int r, int k, int cols) {
  for (int i = 0; i < r; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * cols;
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + static_cast<std::size_t>(p) * cols;
      for (int j = 0; j < cols; ++j) ci[j] += av * bp[j];
    }
  }
}

// C += A^T * B (A k x r, B k x c) -> r x c.
void gemm_tn_acc(const double* a, const double* b, double* c, int k, int r, int cols) {
  for (int p = 0; p < k; ++p) {
    const double* ap = a + static_cast<std::size_t>(p) * r;
    const double* bp = b + static_cast<std::size_t>(p) * cols;
    for (int i = 0; i < r; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c + static_cast<std::size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) ci[j] += av * bp[j];
    }
  }
}

// C += A * B^T (A r x k, B c x k) -> r x c.
void gemm_nt_acc(const double* a, const double* b, double* c, int r, int k, int cols) {
  for (int i = 0; i < r; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

template <typename F>
Value unary(const Value& a, F&& f, BackwardFn backward) {
  Matrix out(a.rows(), a.cols());
  const auto& x = a.data().data;
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = f(x[i]);
  return make_op(std::move(out), {a}, std::move(backward));
}

bool wants(const Node& self, int i) { return self.parents[i]->requires_grad; }

}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m;
  m.rows = static_cast<int>(rows.size());
  m.cols = rows.size() ? static_cast<int>(rows.begin()->size()) : 0;
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != m.cols) {
      throw Error(ErrorCode::kShapeMismatch, "ragged matrix literal");
    }
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

Matrix& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Matrix(value.rows, value.cols);
  return grad;
}

Value Value::constant(Matrix m) {
  auto node = std::make_shared<Node>();
  node->value = std::move(m);
  return Value(std::move(node));
}

Value Value::parameter(Matrix m) {
  auto node = std::make_shared<Node>();
  node->value = std::move(m);
  node->requires_grad = true;
  return Value(std::move(node));
}

double Value::item() const {
  if (rows() != 1 || cols() != 1) shape_error("item", "(1x1)", data());
  return data().data[0];
}

void Value::zero_grad() { node_->grad = Matrix(); }

void Value::backward() {
  if (rows() != 1 || cols() != 1) shape_error("backward", "(1x1)", data());
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the tape.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  node_->grad_buffer().data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

Value make_op(Matrix value, std::vector<Value> parents, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_recording) {
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const Value& p) { return p.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.node());
      node->backward = std::move(backward);
    }
  }
  return Value(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }
bool recording_enabled() { return g_recording; }

Value matmul(const Value& a, const Value& b) {
  const Matrix& A = a.data();
  const Matrix& B = b.data();
  if (A.cols != B.rows) shape_error("matmul", "rows == " + std::to_string(A.cols), B);
  Matrix out(A.rows, B.cols);
  gemm_acc(A.data.data(), B.data.data(), out.data.data(), A.rows, A.cols, B.cols);
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const Matrix& G = self.grad;
    if (pa.requires_grad) {
      gemm_nt_acc(G.data.data(), pb.value.data.data(), pa.grad_buffer().data.data(), G.rows,
                  G.cols, pb.value.rows);
    }
    if (pb.requires_grad) {
      gemm_tn_acc(pa.value.data.data(), G.data.data(), pb.grad_buffer().data.data(),
                  pa.value.rows, pa.value.cols, G.cols);
    }
  });
}

Value add(const Value& a, const Value& b) {
  const Matrix& A = a.data();
  const Matrix& B = b.data();
  const bool broadcast = B.rows == 1 && A.rows != 1 && B.cols == A.cols;
  if (!broadcast) require_same("add", A, B);
  Matrix out = A;
  for (int i = 0; i < A.rows; ++i) {
    auto row = out.row(i);
    auto brow = B.row(broadcast ? 0 : i);
    for (int j = 0; j < A.cols; ++j) row[j] += brow[j];
  }
  return make_op(std::move(out), {a, b}, [broadcast](Node& self) {
    const Matrix& G = self.grad;
    if (wants(self, 0)) {
      auto& ga = self.parents[0]->grad_buffer().data;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += G.data[i];
    }
    if (wants(self, 1)) {
      Matrix& gb = self.parents[1]->grad_buffer();
      if (broadcast) {
        for (int i = 0; i < G.rows; ++i) {
          auto row = G.row(i);
          for (int j = 0; j < G.cols; ++j) gb.data[j] += row[j];
        }
      } else {
        for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += G.data[i];
      }
    }
  });
}

Value sub(const Value& a, const Value& b) {
  require_same("sub", a.data(), b.data());
  Matrix out = a.data();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data().data[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    const auto& g = self.grad.data;
    if (wants(self, 0)) {
      auto& ga = self.parents[0]->grad_buffer().data;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (wants(self, 1)) {
      auto& gb = self.parents[1]->grad_buffer().data;
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Value mul(const Value& a, const Value& b) {
  require_same("mul", a.data(), b.data());
  Matrix out = a.data();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data().data[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    const auto& g = self.grad.data;
    const auto& x = self.parents[0]->value.data;
    const auto& y = self.parents[1]->value.data;
    if (wants(self, 0)) {
      auto& ga = self.parents[0]->grad_buffer().data;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (wants(self, 1)) {
      auto& gb = self.parents[1]->grad_buffer().data;
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

Value scale(const Value& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](Node& self) {
    auto& ga = self.parents[0]->grad_buffer().data;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * self.grad.data[i];
  });
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) return Value::constant(Matrix());
  const int rows = parts.front().rows();
  std::vector<int> offsets;
  int cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", std::to_string(rows) + " rows", p.data());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Matrix& m = parts[k].data();
    for (int i = 0; i < rows; ++i) {
      std::copy(m.row(i).begin(), m.row(i).end(), out.row(i).begin() + offsets[k]);
    }
  }
  return make_op(std::move(out), parts, [offsets](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      if (!wants(self, static_cast<int>(k))) continue;
      Matrix& g = self.parents[k]->grad_buffer();
      for (int i = 0; i < g.rows; ++i) {
        auto src = self.grad.row(i);
        auto dst = g.row(i);
        for (int j = 0; j < g.cols; ++j) dst[j] += src[offsets[k] + j];
      }
    }
  });
}

Value slice_cols(const Value& a, int begin, int end) {
  const Matrix& A = a.data();
  if (begin < 0 || end > A.cols || begin > end) {
    shape_error("slice_cols", "columns [0," + std::to_string(A.cols) + "]", A);
  }
  Matrix out(A.rows, end - begin);
  for (int i = 0; i < A.rows; ++i) {
    std::copy(A.row(i).begin() + begin, A.row(i).begin() + end, out.row(i).begin());
  }
  return make_op(std::move(out), {a}, [begin](Node& self) {
    Matrix& g = self.parents[0]->grad_buffer();
    for (int i = 0; i < self.grad.rows; ++i) {
      auto src = self.grad.row(i);
      auto dst = g.row(i);
      for (int j = 0; j < self.grad.cols; ++j) dst[begin + j] += src[j];
    }
  });
}

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) return Value::constant(Matrix());
  const int cols = parts.front().cols();
  int rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", std::to_string(cols) + " cols", p.data());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  auto it = out.data.begin();
  for (const auto& p : parts) it = std::copy(p.data().data.begin(), p.data().data.end(), it);
  return make_op(std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t n = self.parents[k]->value.data.size();
      if (wants(self, static_cast<int>(k))) {
        auto& g = self.parents[k]->grad_buffer().data;
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad.data[offset + i];
      }
      offset += n;
    }
  });
}

Value row_gather(const Value& a, std::span<const int> index) {
  const Matrix& A = a.data();
  Matrix out(static_cast<int>(index.size()), A.cols);
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] < 0 || index[e] >= A.rows) {
      shape_error("row_gather", "index < " + std::to_string(A.rows), A);
    }
    std::copy(A.row(index[e]).begin(), A.row(index[e]).end(), out.row(static_cast<int>(e)).begin());
  }
  std::vector<int> idx(index.begin(), index.end());
  return make_op(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    Matrix& g = self.parents[0]->grad_buffer();
    for (std::size_t e = 0; e < idx.size(); ++e) {
      auto src = self.grad.row(static_cast<int>(e));
      auto dst = g.row(idx[e]);
      for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
    }
  });
}

Value scatter_sum(const Value& a, std::span<const int> index, int out_rows) {
  const Matrix& A = a.data();
  if (static_cast<int>(index.size()) != A.rows) {
    shape_error("scatter_sum", std::to_string(index.size()) + " rows", A);
  }
  Matrix out(out_rows, A.cols);
  for (int e = 0; e < A.rows; ++e) {
    if (index[e] < 0 || index[e] >= out_rows) {
      throw Error(ErrorCode::kShapeMismatch, "scatter_sum: index out of range");
    }
    auto dst = out.row(index[e]);
    auto src = A.row(e);
    for (int j = 0; j < A.cols; ++j) dst[j] += src[j];
  }
  std::vector<int> idx(index.begin(), index.end());
  return make_op(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    Matrix& g = self.parents[0]->grad_buffer();
    for (std::size_t e = 0; e < idx.size(); ++e) {
      auto src = self.grad.row(idx[e]);
      auto dst = g.row(static_cast<int>(e));
      for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
    }
  });
}

Value relu(const Value& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    const auto& x = self.parents[0]->value.data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) g[i] += self.grad.data[i];
    }
  });
}

Value sigmoid(const Value& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](Node& self) {
        auto& g = self.parents[0]->grad_buffer().data;
        const auto& y = self.value.data;
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += self.grad.data[i] * y[i] * (1.0 - y[i]);
        }
      });
}

Value tanh(const Value& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    const auto& y = self.value.data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i] * (1.0 - y[i] * y[i]);
  });
}

Value softmax_rows(const Value& a) {
  const Matrix& A = a.data();
  Matrix out(A.rows, A.cols);
  for (int i = 0; i < A.rows; ++i) {
    auto x = A.row(i);
    auto y = out.row(i);
    const double m = *std::max_element(x.begin(), x.end());
    double total = 0.0;
    for (int j = 0; j < A.cols; ++j) total += (y[j] = std::exp(x[j] - m));
    for (int j = 0; j < A.cols; ++j) y[j] /= total;
  }
  return make_op(std::move(out), {a}, [](Node& self) {
    Matrix& g = self.parents[0]->grad_buffer();
    for (int i = 0; i < g.rows; ++i) {
      auto y = self.value.row(i);
      auto dy = self.grad.row(i);
      double dot = 0.0;
      for (int j = 0; j < g.cols; ++j) dot += dy[j] * y[j];
      auto dx = g.row(i);
      for (int j = 0; j < g.cols; ++j) dx[j] += y[j] * (dy[j] - dot);
    }
  });
}

Value log(const Value& a) {
  return unary(a, [](double x) { return std::log(x); }, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    const auto& x = self.parents[0]->value.data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i] / x[i];
  });
}

Value dropout(const Value& a, double p, Rng& rng, bool train) {
  if (!train || p <= 0.0) return a;
  if (p >= 1.0) throw Error(ErrorCode::kBadConfig, "dropout probability must be < 1");
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(a.data().size());
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  Matrix out = a.data();
  for (std::size_t i = 0; i < mask.size(); ++i) out.data[i] *= mask[i];
  return make_op(std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i] * mask[i];
  });
}

Value layer_norm(const Value& a, const Value& gain, const Value& bias, double eps) {
  const Matrix& A = a.data();
  const int c = A.cols;
  if (gain.rows() != 1 || gain.cols() != c) shape_error("layer_norm gain", shape_str(1, c), gain.data());
  if (bias.rows() != 1 || bias.cols() != c) shape_error("layer_norm bias", shape_str(1, c), bias.data());
  Matrix normalized(A.rows, c);
  std::vector<double> inv_std(A.rows);
  Matrix out(A.rows, c);
  for (int i = 0; i < A.rows; ++i) {
    auto x = A.row(i);
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= c;
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= c;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    auto xh = normalized.row(i);
    auto y = out.row(i);
    for (int j = 0; j < c; ++j) {
      xh[j] = (x[j] - mu) * inv_std[i];
      y[j] = xh[j] * gain.data().data[j] + bias.data().data[j];
    }
  }
  return make_op(
      std::move(out), {a, gain, bias},
      [normalized = std::move(normalized), inv_std = std::move(inv_std)](Node& self) {
        const Matrix& G = self.grad;
        const int rows = G.rows;
        const int cols = G.cols;
        const auto& gamma = self.parents[1]->value.data;
        if (wants(self, 1)) {
          auto& gg = self.parents[1]->grad_buffer().data;
          for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) gg[j] += G(i, j) * normalized(i, j);
          }
        }
        if (wants(self, 2)) {
          auto& gb = self.parents[2]->grad_buffer().data;
          for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) gb[j] += G(i, j);
          }
        }
        if (wants(self, 0)) {
          Matrix& gx = self.parents[0]->grad_buffer();
          std::vector<double> dxh(cols);
          for (int i = 0; i < rows; ++i) {
            double s1 = 0.0, s2 = 0.0;
            for (int j = 0; j < cols; ++j) {
              dxh[j] = G(i, j) * gamma[j];
              s1 += dxh[j];
              s2 += dxh[j] * normalized(i, j);
            }
            for (int j = 0; j < cols; ++j) {
              gx(i, j) += inv_std[i] / cols * (cols * dxh[j] - s1 - normalized(i, j) * s2);
            }
          }
        }
      });
}

Value sum(const Value& a) {
  double total = 0.0;
  for (double v : a.data().data) total += v;
  return make_op(Matrix(1, 1, total), {a}, [](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    for (double& v : g) v += self.grad.data[0];
  });
}

Value mean(const Value& a) {
  const double n = static_cast<double>(a.data().size());
  if (n == 0) return Value::constant(Matrix(1, 1, 0.0));
  return scale(sum(a), 1.0 / n);
}

Value cross_entropy(const Value& logits, std::span<const int> targets) {
  const Matrix& X = logits.data();
  if (static_cast<int>(targets.size()) != X.rows) {
    shape_error("cross_entropy", std::to_string(targets.size()) + " rows", X);
  }
  if (X.rows == 0) return Value::constant(Matrix(1, 1, 0.0));
  Matrix probs(X.rows, X.cols);
  double total = 0.0;
  for (int i = 0; i < X.rows; ++i) {
    if (targets[i] < 0 || targets[i] >= X.cols) {
      throw Error(ErrorCode::kLabelOutOfRange, "cross_entropy target out of range");
    }
    auto x = X.row(i);
    const double m = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (int j = 0; j < X.cols; ++j) z += (probs(i, j) = std::exp(x[j] - m));
    for (int j = 0; j < X.cols; ++j) probs(i, j) /= z;
    total += m + std::log(z) - x[targets[i]];
  }
  const double n = X.rows;
  std::vector<int> t(targets.begin(), targets.end());
  return make_op(Matrix(1, 1, total / n), {logits},
                 [probs = std::move(probs), t = std::move(t), n](Node& self) {
                   Matrix& g = self.parents[0]->grad_buffer();
                   const double up = self.grad.data[0] / n;
                   for (int i = 0; i < g.rows; ++i) {
                     for (int j = 0; j < g.cols; ++j) {
                       g(i, j) += up * (probs(i, j) - (j == t[i] ? 1.0 : 0.0));
                     }
                   }
                 });
}

Value bce_with_logits(const Value& logits, std::span<const double> targets) {
  const Matrix& X = logits.data();
  if (X.cols != 1 || static_cast<int>(targets.size()) != X.rows) {
    shape_error("bce_with_logits", shape_str(static_cast<int>(targets.size()), 1), X);
  }
  if (X.rows == 0) return Value::constant(Matrix(1, 1, 0.0));
  double total = 0.0;
  for (int i = 0; i < X.rows; ++i) {
    const double x = X.data[i];
    total += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  const double n = X.rows;
  std::vector<double> t(targets.begin(), targets.end());
  return make_op(Matrix(1, 1, total / n), {logits}, [t = std::move(t), n](Node& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    const auto& x = self.parents[0]->value.data;
    const double up = self.grad.data[0] / n;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i]))
                                 : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      g[i] += up * (s - t[i]);
    }
  });
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) p.value.node()->grad = Matrix();
}

Matrix glorot(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  const double limit = std::sqrt(6.0 / (rows + cols));
  for (double& v : m.data) v = rng.uniform(-limit, limit);
  return m;
}

}  // namespace engrave::ad
