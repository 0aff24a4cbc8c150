#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace reasoner {

/// Posterior draws laid out chain-major, draw-major, coordinate-minor. Each
/// chain stores its warmup draws first, then its retained draws.
struct SampleArchive {
  std::size_t n_chains = 0;
  std::size_t n_warmup = 0;  // per chain
  std::size_t n_draws = 0;   // retained, per chain
  std::size_t dim = 0;
  std::uint64_t master_seed = 0;
  std::vector<double> acceptance_per_chain;
  std::string created_by;
  std::vector<double> values;

  static SampleArchive create(std::size_t n_chains, std::size_t n_warmup, std::size_t n_draws, std::size_t dim);

  std::size_t rows_per_chain() const noexcept { return n_warmup + n_draws; }
  std::size_t total_draws() const noexcept { return n_chains * n_draws; }

  std::span<double> warmup(std::size_t chain, std::size_t i);
  std::span<const double> warmup(std::size_t chain, std::size_t i) const;
  std::span<double> draw(std::size_t chain, std::size_t i);
  std::span<const double> draw(std::size_t chain, std::size_t i) const;
  /// Retained draw by flat index over all chains.
  std::span<const double> draw(std::size_t flat) const { return draw(flat / n_draws, flat % n_draws); }
};

// NSA1 files: "NSA1", u32-le header length, JSON header, f64-le payload.
std::vector<std::uint8_t> serialize_archive(const SampleArchive& archive);
SampleArchive parse_archive(std::span<const std::uint8_t> bytes);
void save_archive(const SampleArchive& archive, const std::filesystem::path& path);
SampleArchive load_archive(const std::filesystem::path& path);

}  // namespace reasoner
