#include "cwmi/optim.hpp"

#include <cmath>

namespace cwmi {

double cosine_lr(long step, long total_steps, double lr_max) {
  if (total_steps <= 0) throw ContractError("cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps) throw ContractError("cosine_lr: step out of range");
  constexpr double kPi = 3.14159265358979323846;
  return lr_max * 0.5 *
         (1.0 + std::cos(kPi * static_cast<double>(step) / static_cast<double>(total_steps)));
}

double global_grad_norm(const std::vector<Tensor>& grads) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (std::int64_t i = 0; i < g.size(); ++i) sq += g.data()[i] * g.data()[i];
  }
  return std::sqrt(sq);
}

void clip_by_global_norm(std::vector<Tensor>& grads, double max_norm) {
  if (max_norm <= 0.0) throw ContractError("clip_by_global_norm: max_norm must be positive");
  const double norm = global_grad_norm(grads);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (Tensor& g : grads) {
    for (std::int64_t i = 0; i < g.size(); ++i) g.data()[i] *= s;
  }
}

AdamW::AdamW(const ParameterSet& ps, const TrainConfig& cfg)
    : beta1_(cfg.adam_beta1),
      beta2_(cfg.adam_beta2),
      eps_(cfg.adam_eps),
      weight_decay_(cfg.weight_decay) {
  for (const NamedTensor& nt : ps.items()) {
    if (!nt.trainable) continue;
    m_.emplace_back(nt.tensor.shape());
    v_.emplace_back(nt.tensor.shape());
  }
}

void AdamW::step(ParameterSet& ps, const std::vector<Tensor>& grads, double lr) {
  std::size_t k = 0;
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (NamedTensor& nt : ps.items()) {
    if (!nt.trainable) continue;
    if (k >= grads.size() || !grads[k].same_shape(nt.tensor)) {
      throw ContractError("optimizer gradient list out of sync at '" + nt.name + "'");
    }
    double* p = nt.tensor.data();
    const double* g = grads[k].data();
    double* m = m_[k].data();
    double* v = v_[k].data();
    const double decay = 1.0 - lr * weight_decay_;
    for (std::int64_t i = 0; i < nt.tensor.size(); ++i) {
      p[i] *= decay;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
    ++k;
  }
  if (k != grads.size()) {
    throw ContractError("optimizer gradient list length mismatch");
  }
}

}  // namespace cwmi
