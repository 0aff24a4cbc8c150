#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "reasoner/autodiff.hpp"
#include "reasoner/tensor.hpp"

namespace reasoner {

enum class DegradationKind { grayscale_sum, coarsen, mask, rescale_pool, composite };

std::string_view to_string(DegradationKind kind);

/// A linear map from image space to measurement space, held as a dense matrix
/// over the flattened input. Shapes:
///   grayscale_sum      [C, H, W] -> [H, W]      (channel sum)
///   coarsen(f)         [H, W]    -> [H/f, W/f]  (block average)
///   rescale_pool(f)    [C, H, W] -> [C, H/f, W/f]
///   mask(indices)      any       -> [n - |indices|], masked entries dropped
class DegradationOp {
 public:
  static DegradationOp grayscale_sum(const Shape& input);
  static DegradationOp coarsen(const Shape& input, std::size_t factor);
  static DegradationOp rescale_pool(const Shape& input, std::size_t factor);
  static DegradationOp mask(const Shape& input, std::vector<std::size_t> masked);
  /// Masks columns [begin, end) of every row of a [H, W] image.
  static DegradationOp mask_columns(const Shape& input, std::size_t begin, std::size_t end);

  /// `next` applied after `*this`.
  DegradationOp then(const DegradationOp& next) const;

  DegradationKind kind() const noexcept { return kind_; }
  const Shape& input_shape() const noexcept { return input_; }
  const Shape& output_shape() const noexcept { return output_; }
  const Tensor& matrix() const noexcept { return matrix_; }

  Var apply(const Var& x) const;
  Tensor apply(const Tensor& x) const { return apply(Var(x)).value(); }

 private:
  DegradationOp(DegradationKind kind, Shape input, Shape output, std::vector<double> matrix);

  DegradationKind kind_;
  Shape input_;
  Shape output_;
  Tensor matrix_;  // [out_count, in_count]
};

}  // namespace reasoner
