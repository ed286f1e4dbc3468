#ifndef ADDL_GRADCHECK_HPP_
#define ADDL_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "addl/tensor.hpp"

namespace addl {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  int checked = 0;
  bool passed = false;
  std::string op;
};

// Compares analytic gradients of `op` against central finite differences.
// The op output is reduced to a scalar via a fixed random projection so a
// single backward pass yields all input gradients.  Relative error is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                           const std::vector<Tensor>& inputs, double h = 1e-5,
                           double tol = 1e-4, std::uint64_t seed = 1,
                           const std::string& name = "op");

}  // namespace addl

#endif  // ADDL_GRADCHECK_HPP_
