#include "manifest.hpp"

#include <reasoner/io.hpp>
#include <reasoner/version.hpp>

namespace reasoner::cli {

Manifest::Manifest(std::string command, std::filesystem::path out_dir)
    : command_(std::move(command)), out_dir_(std::move(out_dir)) {
  std::filesystem::create_directories(out_dir_);
}

void Manifest::add_input(std::string_view role, const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  inputs_.push_back({{"role", role}, {"path", path.generic_string()}, {"hash", io::git_blob_hash(bytes)}});
}

void Manifest::write(const std::filesystem::path& relative, std::span<const std::uint8_t> bytes) {
  const auto path = out_dir_ / relative;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  io::write_file_atomic(path, bytes);
  outputs_.push_back({{"path", relative.generic_string()}, {"hash", io::git_blob_hash(bytes)}});
}

void Manifest::write(const std::filesystem::path& relative, std::string_view text) {
  write(relative, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void Manifest::finish(std::optional<double> wall_clock_seconds) {
  nlohmann::ordered_json j{{"engine", std::string("reasoner ") + kVersion},
                           {"command", command_},
                           {"inputs", inputs_},
                           {"config", config_},
                           {"outputs", outputs_}};
  if (wall_clock_seconds) j["wall_clock_seconds"] = *wall_clock_seconds;
  io::write_text_atomic(out_dir_ / "manifest.json", j.dump(2) + "\n");
}

}  // namespace reasoner::cli
