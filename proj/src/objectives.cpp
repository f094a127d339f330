#include "anytime/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace anytime::objectives {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* op) {
    if (a != b)
        throw std::invalid_argument(std::string(op) + ": length mismatch (" + std::to_string(a) +
                                    " vs " + std::to_string(b) + ")");
}

void require_positive(const std::vector<double>& v, const char* op, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!(v[i] > 0.0) || !std::isfinite(v[i]))
            throw std::domain_error(std::string(op) + ": " + what + " at index " + std::to_string(i) +
                                    " must be finite and > 0, got " + std::to_string(v[i]));
}

void require_lambda(const BarrierConfig& cfg) {
    if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda))
        throw std::domain_error("barrier lambda must be > 0");
}

}  // namespace

double weighted_sum(const WeightVector& weights, const LossVector& losses) {
    require_same_length(weights.size(), losses.size(), "weighted_sum");
    double s = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) s += weights[i] * losses[i];
    return s;
}

double barrier_objective(const WeightVector& weights, const LossVector& losses, const BarrierConfig& cfg) {
    require_same_length(weights.size(), losses.size(), "barrier_objective");
    require_lambda(cfg);
    require_positive(weights.weights, "barrier_objective", "weight");
    require_positive(losses, "barrier_objective", "loss");
    double s = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i)
        s += weights[i] * losses[i] - cfg.lambda * std::log(weights[i]);
    return s;
}

WeightVector optimal_barrier_weights(const LossVector& losses, const BarrierConfig& cfg) {
    require_lambda(cfg);
    require_positive(losses, "optimal_barrier_weights", "loss");
    WeightVector out{std::vector<double>(losses.size()), WeightScheme::Custom};
    for (std::size_t i = 0; i < losses.size(); ++i) out.weights[i] = cfg.lambda / losses[i];
    return out;
}

double geometric_mean_objective(const LossVector& losses) {
    require_positive(losses, "geometric_mean_objective", "loss");
    double s = 0.0;
    for (double l : losses) s += std::log(l);
    return s;
}

WeightVector geometric_mean_gradient_weights(const LossVector& losses) {
    require_positive(losses, "geometric_mean_gradient_weights", "loss");
    WeightVector out{std::vector<double>(losses.size()), WeightScheme::Custom};
    for (std::size_t i = 0; i < losses.size(); ++i) out.weights[i] = 1.0 / losses[i];
    return out;
}

LossVector gaussian_mle_sigma(const LossVector& mean_squared_residuals) {
    require_positive(mean_squared_residuals, "gaussian_mle_sigma", "mean squared residual");
    return mean_squared_residuals;
}

double gaussian_log_likelihood(const LossVector& mean_squared_residuals, const LossVector& sigmas) {
    require_same_length(mean_squared_residuals.size(), sigmas.size(), "gaussian_log_likelihood");
    require_positive(sigmas, "gaussian_log_likelihood", "sigma^2");
    double s = 0.0;
    for (std::size_t i = 0; i < sigmas.size(); ++i)
        s += -mean_squared_residuals[i] / sigmas[i] - std::log(sigmas[i]);
    return s;
}

}  // namespace anytime::objectives
