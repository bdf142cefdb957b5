#pragma once

#include <vector>

#include "cwmi/config.hpp"
#include "cwmi/params.hpp"

namespace cwmi {

/// Cosine decay from lr_max at step 0 to zero at total_steps, no warmup.
double cosine_lr(long step, long total_steps, double lr_max);

double global_grad_norm(const std::vector<Tensor>& grads);

/// Scales all gradients so the global norm does not exceed max_norm.
void clip_by_global_norm(std::vector<Tensor>& grads, double max_norm);

/// AdamW with decoupled weight decay: the decay multiplies parameters by
/// (1 - lr * wd) independently of the Adam moment update. Moments are kept
/// per trainable tensor, in ParameterSet order.
class AdamW {
 public:
  AdamW(const ParameterSet& ps, const TrainConfig& cfg);

  /// One update. `grads` must align with the trainable tensors of `ps` in
  /// order (same shapes). Bias correction uses the internal step count.
  void step(ParameterSet& ps, const std::vector<Tensor>& grads, double lr);

  long steps_taken() const { return t_; }

 private:
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  double beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
};

}  // namespace cwmi
