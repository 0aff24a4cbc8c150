#include "reasoner/degradation.hpp"

#include <algorithm>
#include <set>

#include "reasoner/error.hpp"

namespace reasoner {

std::string_view to_string(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::grayscale_sum: return "grayscale";
    case DegradationKind::coarsen: return "coarsen";
    case DegradationKind::mask: return "mask";
    case DegradationKind::rescale_pool: return "rescale_pool";
    case DegradationKind::composite: return "composite";
  }
  return "?";
}

DegradationOp::DegradationOp(DegradationKind kind, Shape input, Shape output, std::vector<double> matrix)
    : kind_(kind),
      input_(std::move(input)),
      output_(std::move(output)),
      matrix_(Shape{element_count(output_), element_count(input_)}, std::move(matrix)) {}

DegradationOp DegradationOp::grayscale_sum(const Shape& input) {
  if (input.size() != 3) throw Error(Errc::shape_mismatch, "grayscale expects [C, H, W], got " + to_string(input));
  const std::size_t c = input[0], hw = input[1] * input[2];
  std::vector<double> m(hw * c * hw, 0.0);
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t ch = 0; ch < c; ++ch) m[p * (c * hw) + ch * hw + p] = 1.0;
  return {DegradationKind::grayscale_sum, input, Shape{input[1], input[2]}, std::move(m)};
}

namespace {

// Block-average pooling over the trailing two axes, repeated for each leading channel.
std::vector<double> pool_matrix(std::size_t channels, std::size_t h, std::size_t w, std::size_t f) {
  const std::size_t oh = h / f, ow = w / f;
  const std::size_t in_n = channels * h * w, out_n = channels * oh * ow;
  std::vector<double> m(out_n * in_n, 0.0);
  const double weight = 1.0 / static_cast<double>(f * f);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const std::size_t row = c * oh * ow + i * ow + j;
        for (std::size_t a = 0; a < f; ++a)
          for (std::size_t b = 0; b < f; ++b) {
            const std::size_t col = c * h * w + (i * f + a) * w + (j * f + b);
            m[row * in_n + col] = weight;
          }
      }
  return m;
}

void check_factor(const Shape& input, std::size_t factor, std::string_view what) {
  const std::size_t h = input[input.size() - 2], w = input[input.size() - 1];
  if (factor == 0 || h % factor != 0 || w % factor != 0) {
    throw Error(Errc::shape_mismatch, std::string(what) + " factor " + std::to_string(factor) +
                                          " does not divide image shape " + to_string(input));
  }
}

}  // namespace

DegradationOp DegradationOp::coarsen(const Shape& input, std::size_t factor) {
  if (input.size() != 2) throw Error(Errc::shape_mismatch, "coarsen expects [H, W], got " + to_string(input));
  check_factor(input, factor, "coarsen");
  return {DegradationKind::coarsen, input, Shape{input[0] / factor, input[1] / factor},
          pool_matrix(1, input[0], input[1], factor)};
}

DegradationOp DegradationOp::rescale_pool(const Shape& input, std::size_t factor) {
  if (input.size() != 3) throw Error(Errc::shape_mismatch, "rescale_pool expects [C, H, W], got " + to_string(input));
  check_factor(input, factor, "rescale_pool");
  return {DegradationKind::rescale_pool, input, Shape{input[0], input[1] / factor, input[2] / factor},
          pool_matrix(input[0], input[1], input[2], factor)};
}

DegradationOp DegradationOp::mask(const Shape& input, std::vector<std::size_t> masked) {
  const std::size_t n = element_count(input);
  std::set<std::size_t> drop(masked.begin(), masked.end());
  for (auto i : drop) {
    if (i >= n) throw Error(Errc::index_out_of_bounds, "mask index " + std::to_string(i) + " outside " + to_string(input));
  }
  if (drop.size() >= n) throw Error(Errc::shape_mismatch, "mask removes every entry of " + to_string(input));
  const std::size_t kept = n - drop.size();
  std::vector<double> m(kept * n, 0.0);
  std::size_t row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (drop.count(i)) continue;
    m[row * n + i] = 1.0;
    ++row;
  }
  return {DegradationKind::mask, input, Shape{kept}, std::move(m)};
}

DegradationOp DegradationOp::mask_columns(const Shape& input, std::size_t begin, std::size_t end) {
  if (input.size() != 2) throw Error(Errc::shape_mismatch, "column mask expects [H, W], got " + to_string(input));
  if (begin >= end || end > input[1]) {
    throw Error(Errc::index_out_of_bounds, "column range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                               ") outside " + to_string(input));
  }
  std::vector<std::size_t> masked;
  for (std::size_t r = 0; r < input[0]; ++r)
    for (std::size_t c = begin; c < end; ++c) masked.push_back(r * input[1] + c);
  return mask(input, std::move(masked));
}

DegradationOp DegradationOp::then(const DegradationOp& next) const {
  if (element_count(next.input_) != element_count(output_)) {
    throw Error(Errc::shape_mismatch, "cannot compose " + std::string(to_string(kind_)) + " output " + to_string(output_) +
                                          " with " + std::string(to_string(next.kind_)) + " input " + to_string(next.input_));
  }
  const std::size_t rows = element_count(next.output_), mid = element_count(output_), cols = element_count(input_);
  auto a = next.matrix_.data();
  auto b = matrix_.data();
  std::vector<double> m(rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < mid; ++k) {
      const double aik = a[i * mid + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) m[i * cols + j] += aik * b[k * cols + j];
    }
  return {DegradationKind::composite, input_, next.output_, std::move(m)};
}

Var DegradationOp::apply(const Var& x) const {
  if (x.shape() != input_) {
    throw Error(Errc::shape_mismatch, std::string(to_string(kind_)) + " expects input " + to_string(input_) + ", got " +
                                          to_string(x.shape()));
  }
  Var flat = reshape(x, Shape{element_count(input_)});
  return reshape(matvec(Var(matrix_), flat), output_);
}

}  // namespace reasoner
