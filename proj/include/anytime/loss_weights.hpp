#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace anytime {

/// Per-head loss values, one entry per auxiliary head.
using LossVector = std::vector<double>;

enum class WeightScheme { Const, Linear, HalfEnd, AdaLoss, Custom };

std::string_view to_string(WeightScheme scheme);
/// Accepts "const", "linear", "half_end"/"half-end", "adaloss" (case-insensitive).
WeightScheme parse_weight_scheme(std::string_view name);

/// Loss weights B_i for the weighted-sum objective sum_i B_i * l_i.
struct WeightVector {
    std::vector<double> weights;
    WeightScheme scheme = WeightScheme::Custom;

    std::size_t size() const noexcept { return weights.size(); }
    double operator[](std::size_t i) const noexcept { return weights[i]; }
};

/// Throws if any entry is negative or non-finite, or all entries are zero.
void validate(const WeightVector& w);

/// Mixing of adaptive weights with constant weights, plus an extra
/// multiplier on the final head.
struct MixingConfig {
    double gamma = 0.05;
    double final_multiplier = 1.0;
};

void validate(const MixingConfig& mix);

/// Losses below this are clamped before they reach a tracker.
inline constexpr double kLossFloor = 1e-12;

/// Exponential moving averages of per-head training losses.
class LossTracker {
public:
    explicit LossTracker(std::size_t heads, double decay = 0.9);

    std::size_t heads() const noexcept { return ema_.size(); }
    double decay() const noexcept { return decay_; }
    bool initialized() const noexcept { return initialized_; }
    std::span<const double> ema() const noexcept { return ema_; }

    /// First call adopts `observed` verbatim; later calls blend with `decay`.
    void update(std::span<const double> observed);

private:
    std::vector<double> ema_;
    double decay_;
    bool initialized_ = false;
};

/// Functional form of LossTracker::update.
LossTracker update_ema(LossTracker tracker, std::span<const double> observed);

/// B_i = alpha (1 - gamma) / ema_i + gamma with alpha = min_i ema_i, then the
/// final entry is scaled by `final_multiplier`.
WeightVector adaloss_weights(const LossTracker& tracker, const MixingConfig& mix);

/// CONST, LINEAR (0.25 -> 1) or HALF_END (total mass L, half on the last head).
WeightVector static_weights(WeightScheme scheme, std::size_t heads);

/// Weight 1 on head `index` (0-based), zero elsewhere.
WeightVector one_hot_weights(std::size_t heads, std::size_t index);

}  // namespace anytime
