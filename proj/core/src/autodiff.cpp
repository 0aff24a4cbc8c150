#include "reasoner/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "reasoner/error.hpp"

namespace reasoner {

// ---------------------------------------------------------------------------
// Tape

std::size_t Tape::push(Tensor value, std::vector<std::size_t> args, Backward backward) {
  if (consumed_) throw Error(Errc::tape_consumed, "cannot record on a consumed tape");
  nodes_.push_back(Node{std::move(value), std::move(args), std::move(backward)});
  return nodes_.size() - 1;
}

std::size_t Tape::arg_node(const Var& v) {
  if (!v.tracked()) return kNoNode;
  if (v.tape_ != this) throw Error(Errc::invalid_argument, "values from different tapes cannot be combined");
  return v.node_;
}

Var Tape::input(Tensor value) {
  auto node = push(value, {}, nullptr);
  inputs_.push_back(node);
  return Var(std::move(value), this, node);
}

Var Tape::record(Tensor value, std::initializer_list<const Var*> args, Backward backward) {
  std::vector<std::size_t> ids;
  ids.reserve(args.size());
  for (const Var* a : args) ids.push_back(arg_node(*a));
  auto node = push(value, std::move(ids), std::move(backward));
  return Var(std::move(value), this, node);
}

Var Tape::record(Tensor value, std::span<const Var> args, Backward backward) {
  std::vector<std::size_t> ids;
  ids.reserve(args.size());
  for (const Var& a : args) ids.push_back(arg_node(a));
  auto node = push(value, std::move(ids), std::move(backward));
  return Var(std::move(value), this, node);
}

std::map<std::size_t, Tensor> Tape::gradient(const Var& output) {
  if (consumed_) throw Error(Errc::tape_consumed, "tape already consumed by a backward pass");
  if (output.size() != 1) {
    throw Error(Errc::shape_mismatch, "gradient requires a scalar output, got shape " + to_string(output.shape()));
  }
  if (output.tape_ != this) throw Error(Errc::invalid_argument, "output was not produced under this tape");
  consumed_ = true;

  std::vector<std::vector<double>> adjoint(nodes_.size());
  adjoint[output.node_].assign(1, 1.0);
  std::vector<double*> arg_buffers;
  for (std::size_t i = output.node_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (adjoint[i].empty() || !node.backward) continue;
    arg_buffers.clear();
    for (auto a : node.args) {
      if (a == kNoNode) {
        arg_buffers.push_back(nullptr);
        continue;
      }
      if (adjoint[a].empty()) adjoint[a].assign(nodes_[a].value.size(), 0.0);
      arg_buffers.push_back(adjoint[a].data());
    }
    node.backward(adjoint[i], arg_buffers);
  }

  std::map<std::size_t, Tensor> result;
  for (std::size_t k = 0; k < inputs_.size(); ++k) {
    auto node = inputs_[k];
    const Shape& shape = nodes_[node].value.shape();
    if (adjoint[node].empty()) {
      result.emplace(k, Tensor::zeros(shape));
    } else {
      result.emplace(k, Tensor(shape, std::move(adjoint[node])));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

Tape* tape_of(std::initializer_list<const Var*> args) {
  Tape* tape = nullptr;
  for (const Var* a : args) {
    if (!a->tracked()) continue;
    if (tape && tape != a->tape()) throw Error(Errc::invalid_argument, "values from different tapes cannot be combined");
    tape = a->tape();
  }
  return tape;
}

bool is_single(const Shape& s) { return element_count(s) == 1 && s.size() <= 1; }

template <class F>
std::vector<double> map_values(std::span<const double> a, F f) {
  std::vector<double> out(a.size());
  std::transform(a.begin(), a.end(), out.begin(), f);
  return out;
}

// Unary elementwise primitive whose adjoint depends on input and output.
template <class Forward, class Deriv>
Var unary(const Var& a, Forward f, Deriv dfdx) {
  Tensor out(a.shape(), map_values(a.value().data(), f));
  Tape* tape = tape_of({&a});
  if (!tape) return out;
  return tape->record(out, {&a}, [x = a.value(), y = out, dfdx](std::span<const double> g, std::span<double* const> args) {
    if (!args[0]) return;
    auto xs = x.data();
    auto ys = y.data();
    for (std::size_t i = 0; i < g.size(); ++i) args[0][i] += g[i] * dfdx(xs[i], ys[i]);
  });
}

}  // namespace

Var elementwise(BinaryOp op, const Var& a, const Var& b) {
  const bool broadcast = a.shape() != b.shape();
  if (broadcast && !is_single(b.shape())) {
    throw Error(Errc::shape_mismatch,
                "elementwise operands have shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  auto xs = a.value().data();
  auto ys = b.value().data();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    const double y = ys[broadcast ? 0 : i];
    switch (op) {
      case BinaryOp::add: out[i] = x + y; break;
      case BinaryOp::sub: out[i] = x - y; break;
      case BinaryOp::mul: out[i] = x * y; break;
      case BinaryOp::div: out[i] = x / y; break;
    }
  }
  Tensor value(a.shape(), std::move(out));
  Tape* tape = tape_of({&a, &b});
  if (!tape) return value;
  return tape->record(value, {&a, &b},
                      [op, broadcast, x = a.value(), y = b.value()](std::span<const double> g, std::span<double* const> args) {
                        auto xs = x.data();
                        auto ys = y.data();
                        for (std::size_t i = 0; i < g.size(); ++i) {
                          const std::size_t j = broadcast ? 0 : i;
                          double da = 0.0, db = 0.0;
                          switch (op) {
                            case BinaryOp::add: da = g[i]; db = g[i]; break;
                            case BinaryOp::sub: da = g[i]; db = -g[i]; break;
                            case BinaryOp::mul: da = g[i] * ys[j]; db = g[i] * xs[i]; break;
                            case BinaryOp::div:
                              da = g[i] / ys[j];
                              db = -g[i] * xs[i] / (ys[j] * ys[j]);
                              break;
                          }
                          if (args[0]) args[0][i] += da;
                          if (args[1]) args[1][j] += db;
                        }
                      });
}

Var elementwise(BinaryOp op, const Var& a, double b) {
  return elementwise(op, a, Var(Tensor::scalar(b)));
}

Var add(const Var& a, const Var& b) { return elementwise(BinaryOp::add, a, b); }
Var sub(const Var& a, const Var& b) { return elementwise(BinaryOp::sub, a, b); }
Var mul(const Var& a, const Var& b) { return elementwise(BinaryOp::mul, a, b); }
Var div(const Var& a, const Var& b) { return elementwise(BinaryOp::div, a, b); }
Var add(const Var& a, double b) { return elementwise(BinaryOp::add, a, b); }
Var sub(const Var& a, double b) { return elementwise(BinaryOp::sub, a, b); }
Var mul(const Var& a, double b) { return elementwise(BinaryOp::mul, a, b); }
Var div(const Var& a, double b) { return elementwise(BinaryOp::div, a, b); }

Var matvec(const Var& w, const Var& x) {
  if (w.shape().size() != 2 || x.shape().size() != 1 || w.shape()[1] != x.shape()[0]) {
    throw Error(Errc::shape_mismatch, "matvec of " + to_string(w.shape()) + " with " + to_string(x.shape()));
  }
  const std::size_t rows = w.shape()[0];
  const std::size_t cols = w.shape()[1];
  auto ws = w.value().data();
  auto xs = x.value().data();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = ws.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * xs[c];
    out[r] = acc;
  }
  Tensor value = Tensor::vector(std::move(out));
  Tape* tape = tape_of({&w, &x});
  if (!tape) return value;
  return tape->record(value, {&w, &x},
                      [rows, cols, wt = w.value(), xt = x.value()](std::span<const double> g, std::span<double* const> args) {
                        auto ws = wt.data();
                        auto xs = xt.data();
                        if (args[0]) {
                          for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < cols; ++c) args[0][r * cols + c] += g[r] * xs[c];
                        }
                        if (args[1]) {
                          for (std::size_t r = 0; r < rows; ++r) {
                            const double* row = ws.data() + r * cols;
                            for (std::size_t c = 0; c < cols; ++c) args[1][c] += row[c] * g[r];
                          }
                        }
                      });
}

Var matmul(const Var& a, const Var& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw Error(Errc::shape_mismatch, "matmul of " + to_string(a.shape()) + " with " + to_string(b.shape()));
  }
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  auto as = a.value().data();
  auto bs = b.value().data();
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = as[i * k + p];
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += aip * bs[p * m + j];
    }
  Tensor value(Shape{n, m}, std::move(out));
  Tape* tape = tape_of({&a, &b});
  if (!tape) return value;
  return tape->record(value, {&a, &b},
                      [n, k, m, at = a.value(), bt = b.value()](std::span<const double> g, std::span<double* const> args) {
                        auto as = at.data();
                        auto bs = bt.data();
                        for (std::size_t i = 0; i < n; ++i)
                          for (std::size_t p = 0; p < k; ++p)
                            for (std::size_t j = 0; j < m; ++j) {
                              const double gij = g[i * m + j];
                              if (args[0]) args[0][i * k + p] += gij * bs[p * m + j];
                              if (args[1]) args[1][p * m + j] += as[i * k + p] * gij;
                            }
                      });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a, double floor) {
  if (floor > 0.0) {
    return unary(
        a, [floor](double x) { return std::log(std::max(x, floor)); },
        [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var softmax(const Var& a) {
  if (a.shape().size() != 1) throw Error(Errc::shape_mismatch, "softmax expects rank 1, got " + to_string(a.shape()));
  auto xs = a.value().data();
  double top = -std::numeric_limits<double>::infinity();
  for (double x : xs) {
    if (!std::isfinite(x)) throw Error(Errc::non_finite, "softmax input contains a non-finite entry");
    top = std::max(top, x);
  }
  std::vector<double> out(xs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = std::exp(xs[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  Tensor value(a.shape(), std::move(out));
  Tape* tape = tape_of({&a});
  if (!tape) return value;
  return tape->record(value, {&a}, [s = value](std::span<const double> g, std::span<double* const> args) {
    if (!args[0]) return;
    auto ss = s.data();
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * ss[i];
    for (std::size_t i = 0; i < g.size(); ++i) args[0][i] += ss[i] * (g[i] - dot);
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor value = a.value().reshaped(std::move(shape));
  Tape* tape = tape_of({&a});
  if (!tape) return value;
  return tape->record(value, {&a}, [](std::span<const double> g, std::span<double* const> args) {
    if (!args[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) args[0][i] += g[i];
  });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  Tensor value = Tensor::scalar(total);
  Tape* tape = tape_of({&a});
  if (!tape) return value;
  return tape->record(value, {&a}, [n = a.size()](std::span<const double> g, std::span<double* const> args) {
    if (!args[0]) return;
    for (std::size_t i = 0; i < n; ++i) args[0][i] += g[0];
  });
}

Var slice(const Var& a, std::size_t offset, std::size_t count) {
  if (a.shape().size() != 1 || count == 0 || offset + count > a.size()) {
    throw Error(Errc::shape_mismatch, "slice [" + std::to_string(offset) + ", " + std::to_string(offset + count) +
                                          ") out of range for shape " + to_string(a.shape()));
  }
  auto xs = a.value().data();
  Tensor value = Tensor::vector(std::vector<double>(xs.begin() + static_cast<std::ptrdiff_t>(offset),
                                                    xs.begin() + static_cast<std::ptrdiff_t>(offset + count)));
  Tape* tape = tape_of({&a});
  if (!tape) return value;
  return tape->record(value, {&a}, [offset](std::span<const double> g, std::span<double* const> args) {
    if (!args[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) args[0][offset + i] += g[i];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::invalid_argument, "concat of zero tensors");
  std::vector<double> out;
  Tape* tape = nullptr;
  for (const Var& p : parts) {
    if (p.shape().size() != 1) throw Error(Errc::shape_mismatch, "concat expects rank-1 parts, got " + to_string(p.shape()));
    auto xs = p.value().data();
    out.insert(out.end(), xs.begin(), xs.end());
    if (p.tracked()) {
      if (tape && tape != p.tape()) throw Error(Errc::invalid_argument, "values from different tapes cannot be combined");
      tape = p.tape();
    }
  }
  Tensor value = Tensor::vector(std::move(out));
  if (!tape) return value;
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) sizes.push_back(p.size());
  return tape->record(value, parts, [sizes](std::span<const double> g, std::span<double* const> args) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (args[k]) {
        for (std::size_t i = 0; i < sizes[k]; ++i) args[k][i] += g[offset + i];
      }
      offset += sizes[k];
    }
  });
}

}  // namespace reasoner
