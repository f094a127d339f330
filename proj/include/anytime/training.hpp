#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "anytime/dataset.hpp"
#include "anytime/loss_weights.hpp"
#include "anytime/network.hpp"

namespace anytime {

struct TrainConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    /// Fractions of `epochs` at which the learning rate is divided by 10.
    std::vector<double> lr_drop_points{0.5, 0.75};
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

/// Learning rate in effect during `epoch` (0-based).
double learning_rate_at(const TrainConfig& cfg, std::size_t epoch);

/// AdaLoss weights recomputed from a fresh tracker at every step.
struct AdaLossSource {
    MixingConfig mix;
    double decay = 0.9;
};

using SchemeSource = std::variant<WeightVector, AdaLossSource>;

/// Training hit a non-finite loss or activation.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t epoch, std::size_t step)
        : std::runtime_error(what), epoch_(epoch), step_(step) {}
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t epoch_;
    std::size_t step_;
};

struct TrainResult {
    AnytimeNetwork net;
    /// Mean per-head training loss over the batches of each epoch.
    std::vector<LossVector> epoch_losses;
    /// Tracker state at the end of each epoch (AdaLoss runs only).
    std::vector<LossVector> epoch_ema;
    /// Weighted objective over the full training set after each epoch, using
    /// the weights of the last step.
    std::vector<double> epoch_objective;
    WeightVector final_weights;
};

/// SGD with momentum and weight decay. Per AdaLoss step: forward, losses,
/// tracker update, weights, backward, parameter update. Parameters outside the
/// support of the weights (transforms past the deepest weighted head, heads
/// with zero weight) are left untouched, weight decay included.
TrainResult train(AnytimeNetwork net, const Dataset& data, const SchemeSource& scheme, const TrainConfig& cfg);

struct OptBaseline {
    TrainResult result;
    std::size_t depth = 0;  // 1-based head index
    double head_loss = 0.0; // training loss of that head on the full set
};

/// Trains with all weight on head `depth` (1-based).
OptBaseline train_opt_baseline(AnytimeNetwork init, const Dataset& data, std::size_t depth, const TrainConfig& cfg);

struct HeadEvaluation {
    LossVector losses;
    std::vector<double> errors;
};

/// Per-head loss and classification error over a whole dataset.
HeadEvaluation evaluate(const AnytimeNetwork& net, const Dataset& data);

}  // namespace anytime
