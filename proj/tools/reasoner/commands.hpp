#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace reasoner::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInput = 2;

/// Bad input: malformed spec, missing file, inconsistent flags. Exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValidateOptions {
  std::filesystem::path spec;
};

struct SampleOptions {
  std::filesystem::path spec;
  std::string method = "hmc";
  std::optional<std::uint64_t> seed;  // default: spec metadata seed, else 0
  std::size_t seeds = 1;              // VI: consecutive seeds starting at `seed`
  // hmc
  std::size_t chains = 8;
  std::size_t draws = 1000;  // per chain
  std::size_t warmup = 1000;
  std::size_t leapfrog = 10;
  double target_acceptance = 0.6;
  // vi
  std::string schedule = "1:2000";
  std::size_t samples = 1000;
  bool antithetic = false;
  std::size_t pairs = 5;
  double eta = 0.1;
  double tail_average = 0.0;
  // riddle bookkeeping
  std::vector<std::string> decode;
  std::vector<std::size_t> truth;
  std::size_t observe_every = 0;
  std::size_t record_samples = 10;
  // images
  std::vector<std::string> pgm;
  std::size_t pgm_count = 4;

  std::filesystem::path out;
  bool record_timing = false;
};

struct ReconstructOptions {
  SampleOptions sample;
  std::optional<std::filesystem::path> compare;
  std::string image;
};

struct ReportOptions {
  std::optional<std::filesystem::path> archive;
  std::optional<std::filesystem::path> spec;
  std::vector<std::string> metrics;
  // acc
  std::string pipeline;
  std::optional<std::size_t> target;
  std::optional<std::filesystem::path> classifier;
  // acc, fid: image source when networks are applied outside the problem spec
  std::string image;
  std::optional<std::filesystem::path> generator;
  std::size_t latent_offset = 0;
  // fid
  std::optional<std::filesystem::path> embedding;
  std::optional<std::filesystem::path> reference;
  std::optional<int> label;
  std::optional<std::filesystem::path> reference_archive;
  std::size_t fid_stride = 100;
  std::size_t fid_window = 200;
  // riddle
  std::optional<std::filesystem::path> runs;
  std::vector<std::size_t> truth;

  std::optional<std::filesystem::path> out;
};

int cmd_validate(const ValidateOptions& options, std::ostream& out);
int cmd_sample(const SampleOptions& options, std::ostream& out);
int cmd_reconstruct(const ReconstructOptions& options, std::ostream& out);
int cmd_report(const ReportOptions& options, std::ostream& out);

/// Parses argv and dispatches; maps failures to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace reasoner::cli
