#pragma once

#include <span>

#include "cwmi/config.hpp"
#include "cwmi/graph.hpp"

namespace cwmi {

/// Mean squared error over one state vector: (1/d) * sum((pred - target)^2).
/// Throws ContractError on length mismatch.
double loss_pred_value(std::span<const double> pred, std::span<const double> target);

/// Intervention-consistency term: MSE between the predicted state delta
/// (cf_hat - f_hat) and the true delta (cf_true - f_true).
double loss_causal_value(std::span<const double> f_hat, std::span<const double> cf_hat,
                         std::span<const double> f_true, std::span<const double> cf_true);

double loss_total_value(double l_pred, double l_causal, const LossWeights& w);

struct LossNodes {
  int l_pred = -1;    // -1 when the mode never builds the branch
  int l_causal = -1;
  int l_total = -1;
  int f_hat = -1;
  int cf_hat = -1;
};

/// Composes the training objective over a paired batch.
///
/// `s_hat` and `target_all` are (2B, d): factual rows first, counterfactual
/// rows second, aligned by pair. `target_delta` is (B, d) holding
/// cf_true - f_true. The prediction term covers the factual rows only;
/// counterfactual rows are trained solely through the change-vector term.
/// Ablation modes that drop a term do not build its branch at all, so no
/// gradient path exists for it.
LossNodes build_losses(Graph& g, int s_hat, int target_all, int target_delta, int batch_pairs,
                       const LossWeights& w, TrainMode mode);

}  // namespace cwmi
