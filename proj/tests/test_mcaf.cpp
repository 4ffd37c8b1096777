#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <sstream>

#include "mcflow/mcaf.hpp"

using namespace mcflow;

namespace {

ScalarField ramp(const GridSpec& s, FieldLabel label) {
  ScalarField f(s, label);
  for (std::size_t k = 0; k < s.size(); ++k) f[k] = 0.1 * static_cast<double>(k) - 3.0;
  return f;
}

std::string encode(const ScalarField& f) {
  std::ostringstream os(std::ios::binary);
  mcaf::write(os, f);
  return os.str();
}

}  // namespace

TEST(Mcaf, HeaderLayout) {
  const auto s = GridSpec::half_plane(15, -1.0, 1.0, 1.0);
  const std::string b = encode(ramp(s, FieldLabel::arrival));
  const unsigned char magic[] = {0x4D, 0x43, 0x41, 0x46, 0x31, 0x00};
  for (int i = 0; i < 6; ++i) EXPECT_EQ(static_cast<unsigned char>(b[i]), magic[i]);
  EXPECT_EQ(b[6], 2);
  EXPECT_EQ(b[7], 0x3);
  // counts, little endian u64
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 15);
  for (int i = 9; i < 16; ++i) EXPECT_EQ(b[i], 0);
  EXPECT_EQ(static_cast<unsigned char>(b[16]), static_cast<unsigned>(s.counts[1]));
  // origin x = -1.0 as f64
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(static_cast<unsigned char>(b[24 + i])) << (8 * i);
  EXPECT_EQ(std::bit_cast<double>(bits), -1.0);
  EXPECT_EQ(b.size(), 8u + 16u + 16u + 8u + 8u * s.size());
}

TEST(Mcaf, RoundTripBitExact) {
  for (const auto& s : {GridSpec::cube(2, 12, -1.0, 1.0), GridSpec::cube(3, 8, 0.0, 0.7),
                        GridSpec::half_plane(17, -1.5, 1.5, 1.5)}) {
    auto f = ramp(s, FieldLabel::arrival);
    f[3] = std::numeric_limits<double>::quiet_NaN();
    const std::string b = encode(f);
    std::istringstream is(b, std::ios::binary);
    const auto g = mcaf::read(is);
    EXPECT_EQ(g.spec.dim, s.dim);
    EXPECT_EQ(g.spec.axisymmetric, s.axisymmetric);
    EXPECT_EQ(g.spec.h, s.h);
    EXPECT_EQ(g.label, FieldLabel::arrival);
    ASSERT_EQ(g.values.size(), f.values.size());
    EXPECT_TRUE(std::isnan(g.values[3]));
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      if (k == 3) continue;
      EXPECT_EQ(std::bit_cast<std::uint64_t>(g.values[k]), std::bit_cast<std::uint64_t>(f.values[k]));
    }
    EXPECT_EQ(encode(g), b);
  }
}

TEST(Mcaf, BadMagicIsFormatError) {
  std::string b = encode(ramp(GridSpec::cube(2, 8, 0.0, 1.0), FieldLabel::levelset));
  b[0] = 'X';
  std::istringstream is(b, std::ios::binary);
  try {
    mcaf::read(is);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::format);
  }
}

TEST(Mcaf, UnknownFlagsAndTruncation) {
  const std::string good = encode(ramp(GridSpec::cube(2, 8, 0.0, 1.0), FieldLabel::levelset));
  std::string flags = good;
  flags[7] = 0x4;
  std::istringstream a(flags, std::ios::binary);
  EXPECT_THROW(mcaf::read(a), Error);
  std::istringstream b(good.substr(0, good.size() - 3), std::ios::binary);
  EXPECT_THROW(mcaf::read(b), Error);
  std::string dim = good;
  dim[6] = 4;
  std::istringstream c(dim, std::ios::binary);
  EXPECT_THROW(mcaf::read(c), Error);
}
