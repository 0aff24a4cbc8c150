#include "reasoner/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "reasoner/error.hpp"
#include "reasoner/io.hpp"

namespace reasoner {

std::vector<std::uint8_t> encode_pgm(const Tensor& image) {
  if (image.rank() != 2) throw Error(Errc::shape_mismatch, "PGM images must be rank 2, got " + to_string(image.shape()));
  const auto px = image.data();
  for (double v : px) {
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "image contains non-finite pixels");
  }
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  const double range = *hi - *lo;
  const std::string header =
      "P5\n" + std::to_string(image.shape()[1]) + " " + std::to_string(image.shape()[0]) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + px.size());
  for (double v : px) {
    const double scaled = range > 0.0 ? (v - *lo) / range * 255.0 : 0.0;
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(scaled, 0.0, 255.0))));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) { io::write_file_atomic(path, encode_pgm(image)); }

}  // namespace reasoner
