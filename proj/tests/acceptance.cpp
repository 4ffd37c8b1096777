// Acceptance suite: one PASS/FAIL line per criterion; nonzero exit on failure.

#include <cstdlib>
#include <iostream>

#include "mcflow/acceptance.hpp"

int main(int argc, char** argv) {
  mcflow::AcceptanceOptions opts;
  if (argc > 1) opts.seed = std::strtoull(argv[1], nullptr, 10);
  opts.log = &std::cerr;
  const auto results = mcflow::run_acceptance(opts);
  mcflow::print_acceptance(std::cout, results);
  for (const auto& r : results) {
    if (!r.passed) return 1;
  }
  return 0;
}
