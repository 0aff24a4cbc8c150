#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace reasoner::cli {

/// Run manifest: inputs with content hashes, the effective configuration and
/// every produced artifact with its git-style blob hash. Output paths are
/// stored relative to the output directory so manifests are reproducible.
class Manifest {
 public:
  Manifest(std::string command, std::filesystem::path out_dir);

  void add_input(std::string_view role, const std::filesystem::path& path);
  nlohmann::ordered_json& config() { return config_; }

  /// Writes `bytes` atomically under the output directory and records it.
  void write(const std::filesystem::path& relative, std::span<const std::uint8_t> bytes);
  void write(const std::filesystem::path& relative, std::string_view text);

  /// Writes manifest.json. Wall-clock time is recorded only when given.
  void finish(std::optional<double> wall_clock_seconds = std::nullopt);

  const std::filesystem::path& out_dir() const noexcept { return out_dir_; }

 private:
  std::string command_;
  std::filesystem::path out_dir_;
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::array();
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json outputs_ = nlohmann::ordered_json::array();
};

}  // namespace reasoner::cli
