#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "reasoner/autodiff.hpp"
#include "reasoner/tensor.hpp"

namespace reasoner {

using IndexTuple = std::vector<std::size_t>;

/// Sparse 0/1 tensor over class-index tuples: an entry marks a valid
/// combination. Contracting it with one probability vector per axis gives the
/// probability that the relation holds.
class LogicTensor {
 public:
  /// Duplicate entries collapse to one. Supports arity 1 to 3.
  LogicTensor(std::vector<std::size_t> class_counts, std::vector<IndexTuple> entries);

  static LogicTensor from_predicate(std::vector<std::size_t> class_counts,
                                    const std::function<bool(std::span<const std::size_t>)>& valid);

  std::size_t arity() const noexcept { return counts_.size(); }
  const std::vector<std::size_t>& class_counts() const noexcept { return counts_; }
  const std::vector<IndexTuple>& entries() const noexcept { return entries_; }
  bool contains(std::span<const std::size_t> tuple) const;

  /// Differentiable contraction built from tensor-core primitives (dense
  /// constant matrices derived from the entry list).
  Var contract(std::span<const Var> probs) const;

 private:
  void check_inputs(std::span<const Shape> shapes) const;

  std::vector<std::size_t> counts_;
  std::vector<IndexTuple> entries_;
  Tensor dense_;  // arity 1: [n0]; arity 2: [n0, n1]; arity 3: [n2, n0 * n1]
};

/// Sum over entries of the product of the indexed probabilities.
double contract_logic(const LogicTensor& tensor, std::span<const Tensor> probs);

}  // namespace reasoner
