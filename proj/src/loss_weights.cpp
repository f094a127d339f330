#include "anytime/loss_weights.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace anytime {

std::string_view to_string(WeightScheme scheme) {
    switch (scheme) {
        case WeightScheme::Const: return "CONST";
        case WeightScheme::Linear: return "LINEAR";
        case WeightScheme::HalfEnd: return "HALF_END";
        case WeightScheme::AdaLoss: return "ADALOSS";
        case WeightScheme::Custom: return "CUSTOM";
    }
    return "UNKNOWN";
}

WeightScheme parse_weight_scheme(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
        return c == '-' ? '_' : static_cast<char>(std::tolower(c));
    });
    if (s == "const") return WeightScheme::Const;
    if (s == "linear") return WeightScheme::Linear;
    if (s == "half_end") return WeightScheme::HalfEnd;
    if (s == "adaloss") return WeightScheme::AdaLoss;
    throw std::invalid_argument("unknown weight scheme '" + std::string(name) + "'");
}

void validate(const WeightVector& w) {
    if (w.weights.empty()) throw std::invalid_argument("weight vector is empty");
    bool any_positive = false;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i]) || w[i] < 0.0)
            throw std::invalid_argument("weight " + std::to_string(i) + " is negative or non-finite");
        any_positive = any_positive || w[i] > 0.0;
    }
    if (!any_positive) throw std::invalid_argument("weight vector has no positive entry");
}

void validate(const MixingConfig& mix) {
    if (!(mix.gamma >= 0.0 && mix.gamma <= 1.0))
        throw std::invalid_argument("gamma must lie in [0, 1], got " + std::to_string(mix.gamma));
    if (!(mix.final_multiplier >= 1.0) || !std::isfinite(mix.final_multiplier))
        throw std::invalid_argument("final_multiplier must be >= 1, got " +
                                    std::to_string(mix.final_multiplier));
}

LossTracker::LossTracker(std::size_t heads, double decay) : ema_(heads, 0.0), decay_(decay) {
    if (heads == 0) throw std::invalid_argument("LossTracker needs at least one head");
    if (!(decay > 0.0 && decay < 1.0))
        throw std::invalid_argument("EMA decay must lie in (0, 1), got " + std::to_string(decay));
}

void LossTracker::update(std::span<const double> observed) {
    if (observed.size() != ema_.size())
        throw std::invalid_argument("LossTracker::update: expected " + std::to_string(ema_.size()) +
                                    " losses, got " + std::to_string(observed.size()));
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (!std::isfinite(observed[i]) || observed[i] <= 0.0)
            throw std::invalid_argument("LossTracker::update: loss at head " + std::to_string(i) +
                                        " must be finite and positive, got " +
                                        std::to_string(observed[i]));
    }
    if (!initialized_) {
        std::copy(observed.begin(), observed.end(), ema_.begin());
        initialized_ = true;
        return;
    }
    for (std::size_t i = 0; i < ema_.size(); ++i)
        ema_[i] = decay_ * ema_[i] + (1.0 - decay_) * observed[i];
}

LossTracker update_ema(LossTracker tracker, std::span<const double> observed) {
    tracker.update(observed);
    return tracker;
}

WeightVector adaloss_weights(const LossTracker& tracker, const MixingConfig& mix) {
    if (!tracker.initialized())
        throw std::logic_error("adaloss_weights: tracker has no observations yet; "
                               "call update() with a batch of losses first");
    validate(mix);
    const auto ema = tracker.ema();
    const double alpha = *std::min_element(ema.begin(), ema.end());
    WeightVector out{std::vector<double>(ema.size()), WeightScheme::AdaLoss};
    for (std::size_t i = 0; i < ema.size(); ++i) {
        // The argmin head gets exactly 1 when gamma == 0.
        const double ratio = ema[i] == alpha ? 1.0 : alpha / ema[i];
        out.weights[i] = (1.0 - mix.gamma) * ratio + mix.gamma;
    }
    out.weights.back() *= mix.final_multiplier;
    return out;
}

WeightVector static_weights(WeightScheme scheme, std::size_t heads) {
    if (heads == 0) throw std::invalid_argument("static_weights: need at least one head");
    WeightVector out{std::vector<double>(heads, 1.0), scheme};
    const auto L = static_cast<double>(heads);
    switch (scheme) {
        case WeightScheme::Const:
            break;
        case WeightScheme::Linear:
            if (heads < 2) throw std::invalid_argument("LINEAR weights need at least two heads");
            for (std::size_t i = 0; i < heads; ++i)
                out.weights[i] = 0.25 + 0.75 * static_cast<double>(i) / (L - 1.0);
            break;
        case WeightScheme::HalfEnd:
            if (heads < 2) throw std::invalid_argument("HALF_END weights need at least two heads");
            std::fill(out.weights.begin(), out.weights.end(), L / (2.0 * (L - 1.0)));
            out.weights.back() = L / 2.0;
            break;
        default:
            throw std::invalid_argument("static_weights: scheme " + std::string(to_string(scheme)) +
                                        " is not static");
    }
    return out;
}

WeightVector one_hot_weights(std::size_t heads, std::size_t index) {
    if (index >= heads) throw std::out_of_range("one_hot_weights: head index out of range");
    WeightVector out{std::vector<double>(heads, 0.0), WeightScheme::Custom};
    out.weights[index] = 1.0;
    return out;
}

}  // namespace anytime
