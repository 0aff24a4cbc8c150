#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include <reasoner/posterior.hpp>

namespace testing_support {

inline std::filesystem::path source_path(const std::string& relative) {
  return std::filesystem::path(REASONER_SOURCE_DIR) / relative;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("reasoner-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Central differences of f at x with step h.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(1, |b_i|)
inline double max_relative_error(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return worst;
}

inline std::vector<double> normal_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

/// Independent standard normal prior with Gaussian likelihood y ~ N(A xi, diag(noise)),
/// written directly in loops (no tensor machinery).
class LinearGaussian final : public reasoner::LatentPosterior {
 public:
  LinearGaussian(std::size_t rows, std::size_t cols, std::vector<double> a, std::vector<double> y, std::vector<double> noise)
      : rows_(rows), cols_(cols), a_(std::move(a)), y_(std::move(y)), noise_(std::move(noise)) {}

  std::size_t dim() const override { return cols_; }
  double log_likelihood(std::span<const double> xi, double, std::span<double> grad) const override {
    double value = 0.0;
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      double pred = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) pred += a_[r * cols_ + c] * xi[c];
      const double res = y_[r] - pred;
      value += -0.5 * res * res / noise_[r] - 0.5 * std::log(2.0 * M_PI * noise_[r]);
      if (!grad.empty())
        for (std::size_t c = 0; c < cols_; ++c) grad[c] += res / noise_[r] * a_[r * cols_ + c];
    }
    return value;
  }

  std::size_t rows() const { return rows_; }
  const std::vector<double>& a() const { return a_; }
  const std::vector<double>& y() const { return y_; }
  const std::vector<double>& noise() const { return noise_; }

 private:
  std::size_t rows_, cols_;
  std::vector<double> a_, y_, noise_;
};

}  // namespace testing_support
