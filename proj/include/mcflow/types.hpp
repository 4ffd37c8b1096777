#ifndef MCFLOW_TYPES_HPP_
#define MCFLOW_TYPES_HPP_

#include <string>

#include "mcflow/errors.hpp"

namespace mcflow {

enum class Verdict { C2, notC2, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::C2: return "C2";
    case Verdict::notC2: return "notC2";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

inline Verdict verdict_from_string(const std::string& s) {
  if (s == "C2") return Verdict::C2;
  if (s == "notC2") return Verdict::notC2;
  if (s == "inconclusive") return Verdict::inconclusive;
  throw Error(ErrorKind::invalid_parameter, "unknown verdict '" + s + "'");
}

}  // namespace mcflow

#endif  // MCFLOW_TYPES_HPP_
