#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace reasoner {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles. Tensors are immutable once built and
/// share their storage on copy, so they can be passed between threads freely.
/// A rank-0 tensor (empty shape) holds a single scalar.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_->size(); }
  std::span<const double> data() const noexcept { return *data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double item() const;

  /// Same storage, new shape; element counts must agree.
  Tensor reshaped(Shape shape) const;

  std::vector<double> to_vector() const { return *data_; }

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace reasoner
