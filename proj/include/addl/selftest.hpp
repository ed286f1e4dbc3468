#ifndef ADDL_SELFTEST_HPP_
#define ADDL_SELFTEST_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace addl {

struct SelfTestResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Kernel taps against an independent high-precision evaluation of the filter
// formula plus normalization (<= 1e-12 over random draws), and the exact
// orientation-fold identity.
SelfTestResult selftest_gabor_oracle(int draws = 1000, std::uint64_t seed = 7);

// Central finite differences against analytic gradients for every
// differentiable op and the GSAC layer (rel err <= 1e-4 at h = 1e-5).
SelfTestResult selftest_gradients(int instances = 20, std::uint64_t seed = 11);

// Dense grid check of the cubic rounding surrogate: |s(x) - round(x)| <=
// 0.125 everywhere and analytic gradient within 1e-6 of finite differences
// away from half-integers.
SelfTestResult selftest_rounding_surrogate();

std::vector<SelfTestResult> run_selftests(int gradcheck_instances = 20, int gabor_draws = 1000);

}  // namespace addl

#endif  // ADDL_SELFTEST_HPP_
