#include "reasoner/archive.hpp"

#include <cstring>

#include <nlohmann/json.hpp>

#include "reasoner/error.hpp"
#include "reasoner/io.hpp"

namespace reasoner {

using nlohmann::json;

namespace {
constexpr char kMagic[4] = {'N', 'S', 'A', '1'};
}

SampleArchive SampleArchive::create(std::size_t n_chains, std::size_t n_warmup, std::size_t n_draws, std::size_t dim) {
  SampleArchive a;
  a.n_chains = n_chains;
  a.n_warmup = n_warmup;
  a.n_draws = n_draws;
  a.dim = dim;
  a.values.assign(n_chains * (n_warmup + n_draws) * dim, 0.0);
  return a;
}

std::span<double> SampleArchive::warmup(std::size_t chain, std::size_t i) {
  return {values.data() + (chain * rows_per_chain() + i) * dim, dim};
}
std::span<const double> SampleArchive::warmup(std::size_t chain, std::size_t i) const {
  return {values.data() + (chain * rows_per_chain() + i) * dim, dim};
}
std::span<double> SampleArchive::draw(std::size_t chain, std::size_t i) {
  return {values.data() + (chain * rows_per_chain() + n_warmup + i) * dim, dim};
}
std::span<const double> SampleArchive::draw(std::size_t chain, std::size_t i) const {
  return {values.data() + (chain * rows_per_chain() + n_warmup + i) * dim, dim};
}

std::vector<std::uint8_t> serialize_archive(const SampleArchive& a) {
  if (a.values.size() != a.n_chains * a.rows_per_chain() * a.dim) {
    throw Error(Errc::invalid_argument, "archive payload does not match its declared counts");
  }
  const json header{{"n_chains", a.n_chains},
                    {"n_warmup", a.n_warmup},
                    {"n_draws", a.n_draws},
                    {"dim", a.dim},
                    {"master_seed", a.master_seed},
                    {"acceptance_per_chain", a.acceptance_per_chain},
                    {"created_by", a.created_by}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.reserve(8 + text.size() + 8 * a.values.size());
  io::put_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (double v : a.values) io::put_f64_le(out, v);
  return out;
}

SampleArchive parse_archive(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::bad_magic, "not an NSA1 archive (bad magic)");
  }
  const std::uint32_t len = io::get_u32_le(bytes, 4);
  if (8 + static_cast<std::size_t>(len) > bytes.size()) throw Error(Errc::truncated, "archive header extends past end of file");
  SampleArchive a;
  try {
    const json h = json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
    a.n_chains = h.at("n_chains").get<std::size_t>();
    a.n_warmup = h.at("n_warmup").get<std::size_t>();
    a.n_draws = h.at("n_draws").get<std::size_t>();
    a.dim = h.at("dim").get<std::size_t>();
    a.master_seed = h.at("master_seed").get<std::uint64_t>();
    a.acceptance_per_chain = h.at("acceptance_per_chain").get<std::vector<double>>();
    a.created_by = h.at("created_by").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("malformed archive header: ") + e.what());
  }
  const std::size_t n = a.n_chains * a.rows_per_chain() * a.dim;
  const std::size_t payload = bytes.size() - 8 - len;
  if (payload != 8 * n) {
    throw Error(Errc::truncated, "archive payload has " + std::to_string(payload) + " bytes, header implies " +
                                     std::to_string(8 * n));
  }
  a.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.values[i] = io::get_f64_le(bytes, 8 + len + 8 * i);
  return a;
}

void save_archive(const SampleArchive& archive, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_archive(archive));
}

SampleArchive load_archive(const std::filesystem::path& path) {
  auto bytes = io::read_file(path);
  try {
    return parse_archive(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace reasoner
