#ifndef ADDL_ADAM_HPP_
#define ADDL_ADAM_HPP_

#include <cstdint>
#include <vector>

#include "addl/tensor.hpp"

namespace addl {

struct LrSchedule {
  double initial = 1e-4;
  double decay_factor = 0.5;
  std::int64_t decay_interval = 40000;  // steps between decays
  double floor = 1.25e-5;

  double rate_at(std::int64_t step) const;  // step is 0-based
};

// Standard Adam with a step-decay learning-rate schedule.  Moment buffers are
// created lazily per parameter and keyed by registration order.
class AdamState {
 public:
  AdamState(LrSchedule schedule, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : schedule_(schedule), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update to every parameter from its accumulated gradient and
  // clears the gradients.  Parameters must be passed in the same order every
  // call.
  void step(const std::vector<Tensor>& params);

  std::int64_t steps_taken() const { return t_; }
  double current_rate() const { return schedule_.rate_at(t_); }
  const LrSchedule& schedule() const { return schedule_; }

 private:
  LrSchedule schedule_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace addl

#endif  // ADDL_ADAM_HPP_
