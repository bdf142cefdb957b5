#include "cwmi/losses.hpp"

namespace cwmi {

double loss_pred_value(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw ContractError("loss_pred: operand lengths differ or are empty");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

double loss_causal_value(std::span<const double> f_hat, std::span<const double> cf_hat,
                         std::span<const double> f_true, std::span<const double> cf_true) {
  const std::size_t n = f_hat.size();
  if (cf_hat.size() != n || f_true.size() != n || cf_true.size() != n || n == 0) {
    throw ContractError("loss_causal: operand lengths differ or are empty");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (cf_hat[i] - f_hat[i]) - (cf_true[i] - f_true[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(n);
}

double loss_total_value(double l_pred, double l_causal, const LossWeights& w) {
  return w.alpha * l_pred + w.beta * l_causal;
}

LossNodes build_losses(Graph& g, int s_hat, int target_all, int target_delta, int batch_pairs,
                       const LossWeights& w, TrainMode mode) {
  const int d = g.value(s_hat).dim(1);
  if (g.value(s_hat).dim(0) != 2 * batch_pairs) {
    throw DimensionError("build_losses: s_hat rows != 2 * batch_pairs");
  }
  LossNodes out;
  out.f_hat = g.slice(s_hat, 0, batch_pairs, 0, d);
  out.cf_hat = g.slice(s_hat, batch_pairs, batch_pairs, 0, d);

  const bool want_pred = mode != TrainMode::NoPred;
  const bool want_causal = mode != TrainMode::NoCausal;

  // prediction loss anchors the factual rows only; counterfactual rows are
  // supervised exclusively through the change-vector term, so dropping that
  // term really does remove all counterfactual grounding
  if (want_pred) {
    out.l_pred = g.mse(out.f_hat, g.slice(target_all, 0, batch_pairs, 0, d));
  }
  if (want_causal) {
    const int delta_pred = g.add(out.cf_hat, g.scale(out.f_hat, -1.0));
    out.l_causal = g.mse(delta_pred, target_delta);
  }
  if (want_pred && want_causal) {
    out.l_total = g.add(g.scale(out.l_pred, w.alpha), g.scale(out.l_causal, w.beta));
  } else if (want_pred) {
    out.l_total = g.scale(out.l_pred, w.alpha);
  } else {
    out.l_total = g.scale(out.l_causal, w.beta);
  }
  return out;
}

}  // namespace cwmi
