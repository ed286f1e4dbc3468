#include "addl/adam.hpp"

#include <cmath>

#include "addl/common.hpp"

namespace addl {

double LrSchedule::rate_at(std::int64_t step) const {
  double r = initial;
  if (decay_interval > 0) {
    const std::int64_t decays = step / decay_interval;
    for (std::int64_t i = 0; i < decays; ++i) r *= decay_factor;
  }
  return r < floor ? floor : r;
}

void AdamState::step(const std::vector<Tensor>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].size(), 0.0);
      v_[i].assign(params[i].size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ValueError("adam: parameter list changed size");

  const double lr = schedule_.rate_at(t_);
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    if (p.size() != m_[i].size()) throw ValueError("adam: parameter shape changed");
    if (!p.has_grad()) continue;  // no gradient reached this parameter
    const std::vector<double>& g = p.grad();
    std::vector<double>& data = p.mutable_data();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      data[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
      if (!std::isfinite(data[k])) throw ValueError("adam: parameter became non-finite");
    }
    p.zero_grad();
  }
}

}  // namespace addl
