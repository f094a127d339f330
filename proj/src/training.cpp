#include "anytime/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace anytime {

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (!(cfg.weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
    if (cfg.epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    double prev = 0.0;
    for (double f : cfg.lr_drop_points) {
        if (!(f > prev && f < 1.0))
            throw std::invalid_argument("lr_drop_points must be strictly increasing inside (0, 1)");
        prev = f;
    }
}

double learning_rate_at(const TrainConfig& cfg, std::size_t epoch) {
    double lr = cfg.learning_rate;
    for (double f : cfg.lr_drop_points)
        if (static_cast<double>(epoch) >= f * static_cast<double>(cfg.epochs)) lr /= 10.0;
    return lr;
}

namespace {

struct ActiveSet {
    std::vector<bool> transforms;
    std::vector<bool> heads;
};

ActiveSet support_of(const WeightVector& w) {
    ActiveSet a{std::vector<bool>(w.size(), false), std::vector<bool>(w.size(), false)};
    std::size_t last = 0;
    for (std::size_t k = 0; k < w.size(); ++k)
        if (w[k] != 0.0) {
            a.heads[k] = true;
            last = k + 1;
        }
    for (std::size_t k = 0; k < last; ++k) a.transforms[k] = true;
    return a;
}

void sgd_update(Dense& param, Dense& velocity, const Dense& grad, double lr, double momentum, double decay) {
    auto w = param.weight.values();
    auto vw = velocity.weight.values();
    const auto gw = grad.weight.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
        vw[i] = momentum * vw[i] + gw[i] + decay * w[i];
        w[i] -= lr * vw[i];
    }
    for (std::size_t i = 0; i < param.bias.size(); ++i) {
        velocity.bias[i] = momentum * velocity.bias[i] + grad.bias[i];
        param.bias[i] -= lr * velocity.bias[i];
    }
}

bool all_finite(const LossVector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

TrainResult train(AnytimeNetwork net, const Dataset& data, const SchemeSource& scheme, const TrainConfig& cfg) {
    validate(cfg);
    if (data.size() == 0) throw std::invalid_argument("train: dataset is empty");
    if (data.dim() != net.shape().input_dim) throw std::invalid_argument("train: dataset dim does not match network");
    const std::size_t L = net.depth();

    std::optional<LossTracker> tracker;
    MixingConfig mix;
    WeightVector current;
    if (const auto* fixed = std::get_if<WeightVector>(&scheme)) {
        if (fixed->size() != L) throw std::invalid_argument("train: weight vector length does not match depth");
        validate(*fixed);
        current = *fixed;
    } else {
        const auto& ada = std::get<AdaLossSource>(scheme);
        validate(ada.mix);
        mix = ada.mix;
        tracker.emplace(L, ada.decay);
        current = WeightVector{std::vector<double>(L, 1.0), WeightScheme::AdaLoss};
    }
    const ActiveSet active = support_of(current);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    ParameterSet velocity = ParameterSet::zeros(net.shape());
    const Batch everything = full_batch(data);
    TrainResult result{net, {}, {}, {}, current};

    auto choose = [&](const LossVector& losses) {
        if (!tracker) return current;
        LossVector observed(losses.size());
        for (std::size_t i = 0; i < losses.size(); ++i) observed[i] = std::max(losses[i], kLossFloor);
        tracker->update(observed);
        return adaloss_weights(*tracker, mix);
    };

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = learning_rate_at(cfg, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        LossVector sum(L, 0.0);
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const Batch batch = make_batch(data, std::span(order).subspan(start, stop - start));
            Gradients g;
            try {
                g = backward_weighted(net, batch, choose);
            } catch (const NonFiniteError& e) {
                throw DivergenceError(std::string("training diverged: ") + e.what() + " (epoch " +
                                          std::to_string(epoch) + ", step " + std::to_string(step) + ")",
                                      epoch, step);
            } catch (const std::domain_error& e) {
                throw DivergenceError(std::string("training diverged: ") + e.what() + " (epoch " +
                                          std::to_string(epoch) + ", step " + std::to_string(step) + ")",
                                      epoch, step);
            }
            if (!all_finite(g.losses))
                throw DivergenceError("training diverged: non-finite loss (epoch " + std::to_string(epoch) +
                                          ", step " + std::to_string(step) + ")",
                                      epoch, step);
            current = g.weights;

            auto& params = net.parameters();
            for (std::size_t k = 0; k < L; ++k) {
                if (active.transforms[k])
                    sgd_update(params.transforms[k], velocity.transforms[k], g.grads.transforms[k], lr, cfg.momentum,
                               cfg.weight_decay);
                if (active.heads[k])
                    sgd_update(params.heads[k], velocity.heads[k], g.grads.heads[k], lr, cfg.momentum,
                               cfg.weight_decay);
            }
            for (std::size_t k = 0; k < L; ++k) sum[k] += g.losses[k];
            ++batches;
        }
        for (double& s : sum) s /= static_cast<double>(batches);
        result.epoch_losses.push_back(std::move(sum));
        if (tracker) result.epoch_ema.emplace_back(tracker->ema().begin(), tracker->ema().end());
        try {
            result.epoch_objective.push_back(weighted_objective(net, everything, current));
        } catch (const std::exception& e) {
            throw DivergenceError(std::string("training diverged: ") + e.what() + " (epoch " + std::to_string(epoch) +
                                      ")",
                                  epoch, step);
        }
        if (!std::isfinite(result.epoch_objective.back()))
            throw DivergenceError("training diverged: non-finite objective (epoch " + std::to_string(epoch) + ")",
                                  epoch, step);
    }
    result.net = std::move(net);
    result.final_weights = current;
    return result;
}

OptBaseline train_opt_baseline(AnytimeNetwork init, const Dataset& data, std::size_t depth, const TrainConfig& cfg) {
    if (depth < 1 || depth > init.depth())
        throw std::out_of_range("train_opt_baseline: depth " + std::to_string(depth) + " outside [1, " +
                                std::to_string(init.depth()) + "]");
    auto weights = one_hot_weights(init.depth(), depth - 1);
    OptBaseline out{train(std::move(init), data, weights, cfg), depth, 0.0};
    const Batch everything = full_batch(data);
    out.head_loss = compute_loss(forward_until(out.result.net, everything.inputs, depth), everything,
                                 out.result.net.loss_kind());
    return out;
}

HeadEvaluation evaluate(const AnytimeNetwork& net, const Dataset& data) {
    const Batch everything = full_batch(data);
    const auto preds = forward_all(net, everything.inputs);
    HeadEvaluation ev{compute_losses(preds, everything, net.loss_kind()), {}};
    for (const auto& p : preds) ev.errors.push_back(classification_error(p, everything.labels));
    return ev;
}

}  // namespace anytime
