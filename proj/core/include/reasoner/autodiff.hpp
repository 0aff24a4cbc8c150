#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <vector>

#include "reasoner/tensor.hpp"

namespace reasoner {

class Tape;

/// A tensor flowing through an evaluation. Values created by a Tape (and
/// everything computed from them) are tracked; anything else is a constant.
/// The same primitive functions serve both cases, so forward values do not
/// depend on whether a tape is active.
class Var {
 public:
  Var(Tensor value) : value_(std::move(value)) {}  // NOLINT: constants convert implicitly

  const Tensor& value() const noexcept { return value_; }
  const Shape& shape() const noexcept { return value_.shape(); }
  std::size_t size() const noexcept { return value_.size(); }
  bool tracked() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }

 private:
  friend class Tape;
  Var(Tensor value, Tape* tape, std::size_t node)
      : value_(std::move(value)), tape_(tape), node_(node) {}

  Tensor value_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

/// Records primitive applications during one forward evaluation and replays
/// their adjoint rules in reverse. Single-threaded; consumed by one backward
/// pass.
class Tape {
 public:
  /// Adjoint rule: receives the output adjoint and one accumulation buffer per
  /// argument (nullptr for arguments that are constants).
  using Backward = std::function<void(std::span<const double> grad, std::span<double* const> args)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a differentiable input. Ids are assigned 0, 1, 2, ... in call order.
  Var input(Tensor value);

  std::size_t input_count() const noexcept { return inputs_.size(); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

  /// Reverse sweep from a scalar output. Returns the adjoint of every input,
  /// zero-filled for inputs the output does not depend on.
  std::map<std::size_t, Tensor> gradient(const Var& output);

  /// Used by primitives. `args` lists every argument in order; untracked
  /// arguments receive no adjoint.
  Var record(Tensor value, std::initializer_list<const Var*> args, Backward backward);
  Var record(Tensor value, std::span<const Var> args, Backward backward);

 private:
  static constexpr std::size_t kNoNode = static_cast<std::size_t>(-1);

  struct Node {
    Tensor value;
    std::vector<std::size_t> args;
    Backward backward;
  };

  std::size_t push(Tensor value, std::vector<std::size_t> args, Backward backward);
  std::size_t arg_node(const Var& v);

  std::vector<Node> nodes_;
  std::vector<std::size_t> inputs_;
  bool consumed_ = false;
};

enum class BinaryOp { add, sub, mul, div };

/// `b` must have the shape of `a` or be a single element (rank 0 or shape [1]).
Var elementwise(BinaryOp op, const Var& a, const Var& b);
Var elementwise(BinaryOp op, const Var& a, double b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add(const Var& a, double b);
Var sub(const Var& a, double b);
Var mul(const Var& a, double b);
Var div(const Var& a, double b);

Var matvec(const Var& w, const Var& x);
Var matmul(const Var& a, const Var& b);

Var exp(const Var& a);
/// Natural log. With floor > 0 evaluates log(max(a, floor)); the adjoint is
/// zero wherever the floor is active.
Var log(const Var& a, double floor = 0.0);
Var tanh(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
/// Rank-1 softmax with max subtraction. Rejects non-finite input.
Var softmax(const Var& a);

Var reshape(const Var& a, Shape shape);
/// Sum of all elements, rank-0 result.
Var sum(const Var& a);
/// Contiguous rank-1 slice [offset, offset + count).
Var slice(const Var& a, std::size_t offset, std::size_t count);
/// Concatenation of rank-1 values.
Var concat(std::span<const Var> parts);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator*(const Var& a, double b) { return mul(a, b); }
inline Var operator+(const Var& a, double b) { return add(a, b); }

}  // namespace reasoner
