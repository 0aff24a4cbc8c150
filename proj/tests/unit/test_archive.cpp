#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <random>

#include <reasoner/archive.hpp>
#include <reasoner/error.hpp>
#include <reasoner/io.hpp>

#include "support.hpp"

using namespace reasoner;

namespace {

SampleArchive sample_archive() {
  SampleArchive a = SampleArchive::create(2, 3, 4, 2);
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] = 0.25 * static_cast<double>(i) - 1.0;
  a.master_seed = 99;
  a.acceptance_per_chain = {0.5, 0.75};
  a.created_by = "test";
  return a;
}

Errc parse_error(std::span<const std::uint8_t> bytes) {
  try {
    parse_archive(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE();
  return Errc::io;
}

}  // namespace

TEST(Archive, RoundTripIsExact) {
  const SampleArchive a = sample_archive();
  testing_support::TempDir dir("archive");
  save_archive(a, dir / "s.nsa");
  const SampleArchive b = load_archive(dir / "s.nsa");
  EXPECT_EQ(b.n_chains, a.n_chains);
  EXPECT_EQ(b.n_warmup, a.n_warmup);
  EXPECT_EQ(b.n_draws, a.n_draws);
  EXPECT_EQ(b.dim, a.dim);
  EXPECT_EQ(b.master_seed, a.master_seed);
  EXPECT_EQ(b.acceptance_per_chain, a.acceptance_per_chain);
  EXPECT_EQ(b.created_by, a.created_by);
  EXPECT_EQ(b.values, a.values);
  EXPECT_EQ(serialize_archive(b), serialize_archive(a));
}

TEST(Archive, HeaderLayout) {
  const auto bytes = serialize_archive(sample_archive());
  ASSERT_GE(bytes.size(), 8u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "NSA1");
  const std::uint32_t len = io::get_u32_le(bytes, 4);
  const auto header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
  std::vector<std::string> keys;
  for (const auto& item : header.items()) keys.push_back(item.key());
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"acceptance_per_chain", "created_by", "dim", "master_seed", "n_chains",
                                            "n_draws", "n_warmup"}));
  EXPECT_EQ(bytes.size(), 8u + len + 8u * 2 * 7 * 2);
  EXPECT_EQ(io::get_f64_le(bytes, 8 + len), -1.0);
}

TEST(Archive, WarmupPrecedesDrawsWithinAChain) {
  const SampleArchive a = sample_archive();
  // chain 1 starts after 7 rows of chain 0; its warmup row 0 comes first.
  EXPECT_EQ(a.warmup(1, 0).data(), a.values.data() + 7 * 2);
  EXPECT_EQ(a.draw(1, 0).data(), a.values.data() + 10 * 2);
  EXPECT_EQ(a.draw(5).data(), a.draw(1, 1).data());
  EXPECT_EQ(a.total_draws(), 8u);
}

TEST(Archive, RejectsBadMagic) {
  auto bytes = serialize_archive(sample_archive());
  bytes[0] = 'X';
  EXPECT_EQ(parse_error(bytes), Errc::bad_magic);
  EXPECT_EQ(parse_error(std::span<const std::uint8_t>(bytes.data(), 2)), Errc::bad_magic);
}

TEST(Archive, RejectsTruncation) {
  const auto bytes = serialize_archive(sample_archive());
  EXPECT_EQ(parse_error(std::span<const std::uint8_t>(bytes.data(), bytes.size() - 8)), Errc::truncated);
  EXPECT_EQ(parse_error(std::span<const std::uint8_t>(bytes.data(), 12)), Errc::truncated);
}

TEST(Archive, LoadErrorsNameTheFile) {
  testing_support::TempDir dir("archive");
  io::write_text_atomic(dir / "bad.nsa", "nope");
  try {
    load_archive(dir / "bad.nsa");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("bad.nsa"), std::string::npos);
  }
}
