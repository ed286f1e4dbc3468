#include "addl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "addl/common.hpp"

namespace addl {

namespace {

double project(const Tensor& out, const std::vector<double>& weights) {
  const auto& v = out.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * weights[i];
  return acc;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                           const std::vector<Tensor>& inputs, double h, double tol,
                           std::uint64_t seed, const std::string& name) {
  GradCheckReport rep;
  rep.tolerance = tol;
  rep.op = name;

  std::vector<Tensor> live;
  live.reserve(inputs.size());
  for (const Tensor& t : inputs) live.push_back(Tensor::from_data(t.shape(), t.data(), true));

  Tensor out = op(live);
  Rng rng(seed ^ 0x5bd1e995u);
  std::vector<double> proj(out.size());
  for (double& w : proj) w = rng.uniform(-1.0, 1.0);

  // One backward pass of the projected scalar gives every analytic gradient.
  Tensor scalar = dot_sum(out, Tensor::from_data(out.shape(), proj));
  scalar.backward();

  const double fd_scale = 1.0 / (2.0 * h);
  for (std::size_t ti = 0; ti < live.size(); ++ti) {
    if (!live[ti].has_grad()) continue;
    const std::vector<double> analytic = live[ti].grad();
    std::vector<double> probe = live[ti].data();
    NoGradGuard ng;
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const double keep = probe[i];
      std::vector<Tensor> args;
      args.reserve(live.size());
      for (std::size_t k = 0; k < live.size(); ++k) {
        args.push_back(k == ti ? Tensor() : Tensor::from_data(live[k].shape(), live[k].data()));
      }
      probe[i] = keep + h;
      args[ti] = Tensor::from_data(live[ti].shape(), probe);
      const double fp = project(op(args), proj);
      probe[i] = keep - h;
      args[ti] = Tensor::from_data(live[ti].shape(), probe);
      const double fm = project(op(args), proj);
      probe[i] = keep;

      const double numeric = (fp - fm) * fd_scale;
      const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel > rep.max_rel_error) rep.max_rel_error = rel;
      ++rep.checked;
    }
  }
  rep.passed = rep.max_rel_error <= tol;
  return rep;
}

}  // namespace addl
