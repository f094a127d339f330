#pragma once

#include "anytime/loss_weights.hpp"

// Objective family for multi-head training: weighted sum, the log-barrier
// joint objective over (theta, B), its geometric-mean reduction, and the
// Gaussian likelihood form it derives from. All functions are pure.
namespace anytime::objectives {

struct BarrierConfig {
    double lambda = 1.0;
};

/// sum_i B_i l_i
double weighted_sum(const WeightVector& weights, const LossVector& losses);

/// sum_i (B_i l_i - lambda ln B_i). Requires every B_i > 0 and l_i > 0.
double barrier_objective(const WeightVector& weights, const LossVector& losses,
                         const BarrierConfig& cfg = {});

/// B_i = lambda / l_i, the minimizer of barrier_objective for fixed losses.
WeightVector optimal_barrier_weights(const LossVector& losses, const BarrierConfig& cfg = {});

/// sum_i ln l_i
double geometric_mean_objective(const LossVector& losses);

/// 1 / l_i: the weights under which sum_i B_i grad l_i is the gradient of
/// geometric_mean_objective.
WeightVector geometric_mean_gradient_weights(const LossVector& losses);

/// sigma_i^2 = l~_i, the maximizer of gaussian_log_likelihood for fixed residuals.
LossVector gaussian_mle_sigma(const LossVector& mean_squared_residuals);

/// sum_i (-l~_i / sigma_i^2 - ln sigma_i^2), constants dropped.
double gaussian_log_likelihood(const LossVector& mean_squared_residuals, const LossVector& sigmas);

}  // namespace anytime::objectives
