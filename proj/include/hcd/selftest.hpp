#pragma once

#include <string>
#include <vector>

#include "hcd/kernelinfo.hpp"

namespace hcd {

struct SelftestReport {
  struct Suite {
    std::string name;
    std::size_t passed = 0;
    std::size_t failed = 0;
    std::vector<std::string> failures;
  };
  std::vector<Suite> suites;

  bool ok() const;
  std::string render() const;  // deterministic text
};

// Runs the gradient-certification, entropy-bound and oracle-equivalence
// suites in process. A non-none mutation is injected for the duration (the
// grad-check suite must then fail, proving the harness catches a wrong
// backward rule).
SelftestReport run_selftest(Mutation mutation = Mutation::none);

}  // namespace hcd
