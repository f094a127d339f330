#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "anytime/loss_weights.hpp"
#include "anytime/matrix.hpp"

namespace anytime {

enum class LossKind { CrossEntropy, Square };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

/// Affine map y = W x + b with W stored as (out x in).
struct Dense {
    Matrix weight;
    std::vector<double> bias;

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }

    bool operator==(const Dense&) const = default;
};

struct NetworkShape {
    std::size_t input_dim = 0;
    std::vector<std::size_t> widths;  // one per feature transform
    std::size_t output_dim = 0;
    /// Adds an identity skip x_i = x_{i-1} + relu(W x_{i-1} + b) to every
    /// transform after the first whose input and output widths agree.
    bool residual = false;

    std::size_t depth() const noexcept { return widths.size(); }
    /// Whether transform k (0-based) carries the identity skip.
    bool has_skip(std::size_t k) const noexcept { return residual && k > 0 && widths[k] == widths[k - 1]; }

    static NetworkShape uniform(std::size_t input_dim, std::size_t depth, std::size_t width,
                                std::size_t output_dim, bool residual = false);
};

/// Parameters of every feature transform f_i and head g_i. Also used for
/// gradients and optimizer state, which share the layout.
struct ParameterSet {
    std::vector<Dense> transforms;
    std::vector<Dense> heads;

    static ParameterSet zeros(const NetworkShape& shape);

    std::size_t parameter_count() const;

    /// Calls f(span) for every weight matrix and bias in a fixed order:
    /// transform 0 weight, transform 0 bias, ..., then heads likewise.
    void for_each_block(const std::function<void(std::span<double>)>& f);
    void for_each_block(const std::function<void(std::span<const double>)>& f) const;

    bool operator==(const ParameterSet&) const = default;
};

/// Thrown when a forward or backward pass produces a non-finite value.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, std::size_t layer) : std::runtime_error(what), layer_(layer) {}
    /// 1-based transform index where the value appeared.
    std::size_t layer() const noexcept { return layer_; }

private:
    std::size_t layer_;
};

/// Feed-forward net with a linear prediction head after every ReLU transform,
/// optionally with identity skips between equal-width transforms.
class AnytimeNetwork {
public:
    /// Uniform init with variance 2 / fan_in, zero biases.
    AnytimeNetwork(NetworkShape shape, LossKind loss_kind, std::uint64_t seed);
    AnytimeNetwork(NetworkShape shape, LossKind loss_kind, ParameterSet params);

    const NetworkShape& shape() const noexcept { return shape_; }
    std::size_t depth() const noexcept { return shape_.depth(); }
    LossKind loss_kind() const noexcept { return loss_kind_; }

    ParameterSet& parameters() noexcept { return params_; }
    const ParameterSet& parameters() const noexcept { return params_; }

private:
    NetworkShape shape_;
    LossKind loss_kind_;
    ParameterSet params_;
};

/// Inputs plus targets: class labels for cross-entropy, real vectors for square loss.
struct Batch {
    Matrix inputs;
    std::vector<int> labels;
    Matrix targets;

    std::size_t size() const noexcept { return inputs.rows(); }
};

void validate(const Batch& batch, const AnytimeNetwork& net);

/// Instrumentation for forward passes.
struct OpCounter {
    std::uint64_t multiply_adds = 0;
    std::vector<std::size_t> transform_evals;
    std::vector<std::size_t> head_evals;
};

/// Predictions of all L heads from one pass.
std::vector<Matrix> forward_all(const AnytimeNetwork& net, const Matrix& inputs, OpCounter* counter = nullptr);

/// Prediction of head `depth` (1-based); evaluates only f_1..f_depth and g_depth.
Matrix forward_until(const AnytimeNetwork& net, const Matrix& inputs, std::size_t depth,
                     OpCounter* counter = nullptr);

/// Mean loss of a single head over the batch.
double compute_loss(const Matrix& prediction, const Batch& batch, LossKind kind);

/// Per-head mean losses.
LossVector compute_losses(const std::vector<Matrix>& predictions, const Batch& batch, LossKind kind);

/// Fraction of rows whose argmax differs from the label.
double classification_error(const Matrix& logits, std::span<const int> labels);

struct Gradients {
    ParameterSet grads;
    LossVector losses;
    WeightVector weights;
    double objective = 0.0;
};

/// Chooses the weights for a step from that step's per-head losses.
using WeightChooser = std::function<WeightVector(const LossVector&)>;

/// Exact gradient of sum_i B_i l_i over every parameter. Heads with zero
/// weight contribute nothing; transforms past the last weighted head get
/// exactly zero gradient.
Gradients backward_weighted(const AnytimeNetwork& net, const Batch& batch, const WeightVector& weights);

/// Single forward pass; `choose` sees the losses before the backward pass runs.
Gradients backward_weighted(const AnytimeNetwork& net, const Batch& batch, const WeightChooser& choose);

/// sum_i B_i l_i on the batch.
double weighted_objective(const AnytimeNetwork& net, const Batch& batch, const WeightVector& weights);

struct FiniteDiffOptions {
    double epsilon = 1e-5;
    /// 0 checks every parameter; otherwise a seeded random subsample of this size.
    std::size_t max_parameters = 0;
    std::uint64_t seed = 0;
};

/// Max relative error between central differences of the weighted objective
/// and `analytic`, with denominator max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const AnytimeNetwork& net, const Batch& batch, const WeightVector& weights,
                         const ParameterSet& analytic, const FiniteDiffOptions& options = {});

/// Same, against backward_weighted.
double finite_diff_check(const AnytimeNetwork& net, const Batch& batch, const WeightVector& weights,
                         const FiniteDiffOptions& options = {});

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const AnytimeNetwork& net, const std::filesystem::path& path);
AnytimeNetwork load_checkpoint(const std::filesystem::path& path);

}  // namespace anytime
