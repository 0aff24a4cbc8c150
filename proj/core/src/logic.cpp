#include "reasoner/logic.hpp"

#include <algorithm>

#include "reasoner/error.hpp"

namespace reasoner {

LogicTensor::LogicTensor(std::vector<std::size_t> class_counts, std::vector<IndexTuple> entries)
    : counts_(std::move(class_counts)) {
  if (counts_.empty() || counts_.size() > 3) {
    throw Error(Errc::invalid_argument, "logic tensors support arity 1 to 3, got " + std::to_string(counts_.size()));
  }
  for (auto c : counts_)
    if (c == 0) throw Error(Errc::invalid_argument, "logic tensor class counts must be positive");
  for (const auto& e : entries) {
    if (e.size() != counts_.size()) {
      throw Error(Errc::invalid_argument, "logic entry has " + std::to_string(e.size()) + " indices, arity is " +
                                              std::to_string(counts_.size()));
    }
    for (std::size_t a = 0; a < e.size(); ++a) {
      if (e[a] >= counts_[a]) {
        throw Error(Errc::index_out_of_bounds, "logic entry index " + std::to_string(e[a]) + " on axis " +
                                                   std::to_string(a) + " exceeds class count " + std::to_string(counts_[a]));
      }
    }
  }
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  entries_ = std::move(entries);

  switch (arity()) {
    case 1: {
      std::vector<double> d(counts_[0], 0.0);
      for (const auto& e : entries_) d[e[0]] = 1.0;
      dense_ = Tensor::vector(std::move(d));
      break;
    }
    case 2: {
      std::vector<double> d(counts_[0] * counts_[1], 0.0);
      for (const auto& e : entries_) d[e[0] * counts_[1] + e[1]] = 1.0;
      dense_ = Tensor::matrix(counts_[0], counts_[1], std::move(d));
      break;
    }
    default: {
      const std::size_t pair = counts_[0] * counts_[1];
      std::vector<double> d(counts_[2] * pair, 0.0);
      for (const auto& e : entries_) d[e[2] * pair + e[0] * counts_[1] + e[1]] = 1.0;
      dense_ = Tensor::matrix(counts_[2], pair, std::move(d));
      break;
    }
  }
}

LogicTensor LogicTensor::from_predicate(std::vector<std::size_t> class_counts,
                                        const std::function<bool(std::span<const std::size_t>)>& valid) {
  std::vector<IndexTuple> entries;
  const std::size_t total = element_count(class_counts);
  IndexTuple idx(class_counts.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    for (std::size_t axis = class_counts.size(); axis-- > 0;) {
      idx[axis] = rest % class_counts[axis];
      rest /= class_counts[axis];
    }
    if (valid(idx)) entries.push_back(idx);
  }
  return LogicTensor(std::move(class_counts), std::move(entries));
}

bool LogicTensor::contains(std::span<const std::size_t> tuple) const {
  IndexTuple key(tuple.begin(), tuple.end());
  return std::binary_search(entries_.begin(), entries_.end(), key);
}

void LogicTensor::check_inputs(std::span<const Shape> shapes) const {
  if (shapes.size() != arity()) {
    throw Error(Errc::invalid_argument, "logic tensor of arity " + std::to_string(arity()) + " contracted with " +
                                            std::to_string(shapes.size()) + " inputs");
  }
  for (std::size_t a = 0; a < shapes.size(); ++a) {
    if (shapes[a] != Shape{counts_[a]}) {
      throw Error(Errc::index_out_of_bounds, "logic input " + std::to_string(a) + " has shape " + to_string(shapes[a]) +
                                                 ", expected [" + std::to_string(counts_[a]) + "]");
    }
  }
}

Var LogicTensor::contract(std::span<const Var> probs) const {
  std::vector<Shape> shapes;
  for (const Var& p : probs) shapes.push_back(p.shape());
  check_inputs(shapes);
  switch (arity()) {
    case 1: return sum(mul(probs[0], Var(dense_)));
    case 2: return sum(mul(probs[0], matvec(Var(dense_), probs[1])));
    default: {
      Var outer = matmul(reshape(probs[0], Shape{counts_[0], 1}), reshape(probs[1], Shape{1, counts_[1]}));
      Var flat = reshape(outer, Shape{counts_[0] * counts_[1]});
      return sum(mul(probs[2], matvec(Var(dense_), flat)));
    }
  }
}

double contract_logic(const LogicTensor& tensor, std::span<const Tensor> probs) {
  if (probs.size() != tensor.arity()) {
    throw Error(Errc::invalid_argument, "logic tensor of arity " + std::to_string(tensor.arity()) +
                                            " contracted with " + std::to_string(probs.size()) + " inputs");
  }
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (probs[a].size() != tensor.class_counts()[a]) {
      throw Error(Errc::index_out_of_bounds, "logic input " + std::to_string(a) + " has " +
                                                 std::to_string(probs[a].size()) + " classes, expected " +
                                                 std::to_string(tensor.class_counts()[a]));
    }
  }
  double total = 0.0;
  for (const auto& e : tensor.entries()) {
    double term = 1.0;
    for (std::size_t a = 0; a < e.size(); ++a) term *= probs[a][e[a]];
    total += term;
  }
  return total;
}

}  // namespace reasoner
