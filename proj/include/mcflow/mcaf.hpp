#ifndef MCFLOW_MCAF_HPP_
#define MCFLOW_MCAF_HPP_

// MCAF v1 binary field container, little-endian:
//   magic "MCAF1\0" | u8 dim | u8 flags (bit0 axisymmetric, bit1 arrival)
//   | u64 counts[dim] | f64 origin[dim] | f64 spacing | f64 values[...]
// Values are row-major with the last axis fastest.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "mcflow/errors.hpp"
#include "mcflow/grid.hpp"

namespace mcflow {
namespace mcaf {

inline constexpr std::array<unsigned char, 6> kMagic{0x4D, 0x43, 0x41, 0x46, 0x31, 0x00};
inline constexpr std::uint8_t kFlagAxisymmetric = 0x1;
inline constexpr std::uint8_t kFlagArrival = 0x2;

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) {
  put_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) {
    throw Error(ErrorKind::format, "truncated MCAF stream");
  }
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline std::uint8_t get_u8(std::istream& is) {
  char c = 0;
  if (!is.get(c)) throw Error(ErrorKind::format, "truncated MCAF stream");
  return static_cast<std::uint8_t>(c);
}

}  // namespace detail

inline void write(std::ostream& os, const ScalarField& field) {
  const auto& s = field.spec;
  os.write(reinterpret_cast<const char*>(kMagic.data()), kMagic.size());
  std::uint8_t flags = 0;
  if (s.axisymmetric) flags |= kFlagAxisymmetric;
  if (field.label == FieldLabel::arrival) flags |= kFlagArrival;
  os.put(static_cast<char>(s.dim));
  os.put(static_cast<char>(flags));
  for (int a = 0; a < s.dim; ++a) detail::put_u64(os, static_cast<std::uint64_t>(s.counts[a]));
  for (int a = 0; a < s.dim; ++a) detail::put_f64(os, s.origin[a]);
  detail::put_f64(os, s.h);
  for (double v : field.values) detail::put_f64(os, v);
  if (!os) throw Error(ErrorKind::format, "failed writing MCAF stream");
}

//! Reads a field. Non-finite values are accepted here (arrival fields store
//! unswept nodes as NaN); callers decide what they mean.
inline ScalarField read(std::istream& is) {
  std::array<unsigned char, 6> magic{};
  if (!is.read(reinterpret_cast<char*>(magic.data()), magic.size()) || magic != kMagic) {
    throw Error(ErrorKind::format, "bad MCAF magic");
  }
  GridSpec spec;
  spec.dim = detail::get_u8(is);
  const std::uint8_t flags = detail::get_u8(is);
  if (spec.dim != 2 && spec.dim != 3) {
    throw Error(ErrorKind::format, "unsupported MCAF dimension");
  }
  if (flags & ~(kFlagAxisymmetric | kFlagArrival)) {
    throw Error(ErrorKind::format, "unknown MCAF flag bits");
  }
  spec.axisymmetric = (flags & kFlagAxisymmetric) != 0;
  for (int a = 0; a < spec.dim; ++a) {
    const auto c = detail::get_u64(is);
    if (c > (1u << 20)) throw Error(ErrorKind::format, "implausible MCAF count");
    spec.counts[a] = static_cast<int>(c);
  }
  for (int a = 0; a < spec.dim; ++a) spec.origin[a] = detail::get_f64(is);
  spec.h = detail::get_f64(is);
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::format, std::string("invalid MCAF header: ") + e.what());
  }
  ScalarField field(spec, (flags & kFlagArrival) ? FieldLabel::arrival : FieldLabel::levelset);
  for (auto& v : field.values) v = detail::get_f64(is);
  return field;
}

inline void write_file(const std::string& path, const ScalarField& field) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::format, "cannot open " + path + " for writing");
  write(os, field);
}

inline ScalarField read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::format, "cannot open " + path);
  return read(is);
}

}  // namespace mcaf
}  // namespace mcflow

#endif  // MCFLOW_MCAF_HPP_
