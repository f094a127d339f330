#include "anytime/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include <json.hpp>

#include "anytime/kernels.hpp"

namespace anytime {

namespace {

Dense make_dense(std::size_t in, std::size_t out) { return Dense{Matrix(out, in), std::vector<double>(out, 0.0)}; }

void check_finite(const Matrix& m, const char* what, std::size_t layer) {
    for (double v : m.values())
        if (!std::isfinite(v))
            throw NonFiniteError(std::string("non-finite ") + what + " at layer " + std::to_string(layer), layer);
}

// y = x W^T + b
void affine(const Dense& layer, const Matrix& x, Matrix& y) {
    kernels::matmul_nt(x, layer.weight, y);
    kernels::add_row_bias(y, layer.bias);
}

void add_inplace(Matrix& dst, const Matrix& src) {
    auto d = dst.values();
    const auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void relu_inplace(Matrix& m) {
    for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

void count(OpCounter* counter, const Dense& layer, std::size_t rows, bool head, std::size_t index) {
    if (!counter) return;
    counter->multiply_adds += static_cast<std::uint64_t>(rows) * layer.weight.size();
    auto& evals = head ? counter->head_evals : counter->transform_evals;
    if (evals.size() <= index) evals.resize(index + 1, 0);
    ++evals[index];
}

void require_input_dim(const AnytimeNetwork& net, const Matrix& inputs) {
    if (inputs.cols() != net.shape().input_dim)
        throw std::invalid_argument("input dim " + std::to_string(inputs.cols()) + " does not match network input dim " +
                                    std::to_string(net.shape().input_dim));
    if (inputs.rows() == 0) throw std::invalid_argument("empty input batch");
}

struct ForwardCache {
    std::vector<Matrix> pre;         // z_k
    std::vector<Matrix> act;         // a_0 = input, a_k = relu(z_k)
    std::vector<Matrix> predictions; // head outputs
};

ForwardCache forward_cached(const AnytimeNetwork& net, const Matrix& inputs) {
    require_input_dim(net, inputs);
    const auto& p = net.parameters();
    const std::size_t L = net.depth();
    ForwardCache c;
    c.pre.resize(L);
    c.act.resize(L + 1);
    c.predictions.resize(L);
    c.act[0] = inputs;
    for (std::size_t k = 0; k < L; ++k) {
        affine(p.transforms[k], c.act[k], c.pre[k]);
        check_finite(c.pre[k], "activation", k + 1);
        c.act[k + 1] = c.pre[k];
        relu_inplace(c.act[k + 1]);
        if (net.shape().has_skip(k)) add_inplace(c.act[k + 1], c.act[k]);
        affine(p.heads[k], c.act[k + 1], c.predictions[k]);
        check_finite(c.predictions[k], "prediction", k + 1);
    }
    return c;
}

// d(mean loss)/d(prediction)
Matrix loss_gradient(const Matrix& pred, const Batch& batch, LossKind kind) {
    const std::size_t m = pred.rows(), n = pred.cols();
    const double inv_m = 1.0 / static_cast<double>(m);
    Matrix g(m, n);
    if (kind == LossKind::CrossEntropy) {
        for (std::size_t i = 0; i < m; ++i) {
            const auto row = pred.row(i);
            const double mx = *std::max_element(row.begin(), row.end());
            double z = 0.0;
            for (double v : row) z += std::exp(v - mx);
            for (std::size_t j = 0; j < n; ++j) g(i, j) = std::exp(row[j] - mx) / z * inv_m;
            g(i, static_cast<std::size_t>(batch.labels[i])) -= inv_m;
        }
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g(i, j) = 2.0 * (pred(i, j) - batch.targets(i, j)) * inv_m;
    }
    return g;
}

void scale(Matrix& m, double s) {
    for (double& v : m.values()) v *= s;
}

}  // namespace

std::string_view to_string(LossKind kind) {
    return kind == LossKind::CrossEntropy ? "cross_entropy" : "square";
}

LossKind parse_loss_kind(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "cross_entropy" || s == "ce") return LossKind::CrossEntropy;
    if (s == "square" || s == "mse") return LossKind::Square;
    throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

NetworkShape NetworkShape::uniform(std::size_t input_dim, std::size_t depth, std::size_t width,
                                   std::size_t output_dim, bool residual) {
    return NetworkShape{input_dim, std::vector<std::size_t>(depth, width), output_dim, residual};
}

ParameterSet ParameterSet::zeros(const NetworkShape& shape) {
    if (shape.depth() == 0) throw std::invalid_argument("network needs at least one transform");
    if (shape.input_dim == 0 || shape.output_dim == 0) throw std::invalid_argument("network dims must be positive");
    ParameterSet p;
    std::size_t in = shape.input_dim;
    for (std::size_t w : shape.widths) {
        if (w == 0) throw std::invalid_argument("transform width must be positive");
        p.transforms.push_back(make_dense(in, w));
        p.heads.push_back(make_dense(w, shape.output_dim));
        in = w;
    }
    return p;
}

std::size_t ParameterSet::parameter_count() const {
    std::size_t n = 0;
    for_each_block([&n](std::span<const double> s) { n += s.size(); });
    return n;
}

void ParameterSet::for_each_block(const std::function<void(std::span<double>)>& f) {
    for (auto* group : {&transforms, &heads})
        for (auto& d : *group) {
            f(d.weight.values());
            f(d.bias);
        }
}

void ParameterSet::for_each_block(const std::function<void(std::span<const double>)>& f) const {
    for (const auto* group : {&transforms, &heads})
        for (const auto& d : *group) {
            f(d.weight.values());
            f(d.bias);
        }
}

AnytimeNetwork::AnytimeNetwork(NetworkShape shape, LossKind loss_kind, std::uint64_t seed)
    : shape_(std::move(shape)), loss_kind_(loss_kind), params_(ParameterSet::zeros(shape_)) {
    std::mt19937_64 rng(seed);
    auto init = [&rng](Dense& d, double variance_scale) {
        const double a = std::sqrt(6.0 * variance_scale / static_cast<double>(d.in_dim()));
        std::uniform_real_distribution<double> u(-a, a);
        for (double& v : d.weight.values()) v = u(rng);
    };
    // Residual branches start at variance 2 / (fan_in * L) so the skip stream
    // stays O(1) across depth.
    const double branch_scale = 1.0 / static_cast<double>(shape_.depth());
    for (std::size_t k = 0; k < shape_.depth(); ++k) {
        init(params_.transforms[k], shape_.has_skip(k) ? branch_scale : 1.0);
        init(params_.heads[k], 1.0);
    }
}

AnytimeNetwork::AnytimeNetwork(NetworkShape shape, LossKind loss_kind, ParameterSet params)
    : shape_(std::move(shape)), loss_kind_(loss_kind), params_(std::move(params)) {
    const auto expected = ParameterSet::zeros(shape_);
    auto same_dims = [](const Dense& a, const Dense& b) {
        return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
               a.bias.size() == b.bias.size();
    };
    bool ok = params_.transforms.size() == expected.transforms.size() &&
              params_.heads.size() == expected.heads.size();
    for (std::size_t k = 0; ok && k < expected.transforms.size(); ++k)
        ok = same_dims(params_.transforms[k], expected.transforms[k]) && same_dims(params_.heads[k], expected.heads[k]);
    if (!ok) throw std::invalid_argument("parameter set does not match network shape");
}

void validate(const Batch& batch, const AnytimeNetwork& net) {
    require_input_dim(net, batch.inputs);
    const auto out = net.shape().output_dim;
    if (net.loss_kind() == LossKind::CrossEntropy) {
        if (batch.labels.size() != batch.size())
            throw std::invalid_argument("batch has " + std::to_string(batch.labels.size()) + " labels for " +
                                        std::to_string(batch.size()) + " inputs");
        for (int y : batch.labels)
            if (y < 0 || static_cast<std::size_t>(y) >= out)
                throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " + std::to_string(out) + ")");
    } else if (batch.targets.rows() != batch.size() || batch.targets.cols() != out) {
        throw std::invalid_argument("square-loss targets must be batch_size x output_dim");
    }
}

std::vector<Matrix> forward_all(const AnytimeNetwork& net, const Matrix& inputs, OpCounter* counter) {
    auto cache = forward_cached(net, inputs);
    if (counter)
        for (std::size_t k = 0; k < net.depth(); ++k) {
            count(counter, net.parameters().transforms[k], inputs.rows(), false, k);
            count(counter, net.parameters().heads[k], inputs.rows(), true, k);
        }
    return std::move(cache.predictions);
}

Matrix forward_until(const AnytimeNetwork& net, const Matrix& inputs, std::size_t depth, OpCounter* counter) {
    if (depth < 1 || depth > net.depth())
        throw std::out_of_range("forward_until: depth " + std::to_string(depth) + " outside [1, " +
                                std::to_string(net.depth()) + "]");
    require_input_dim(net, inputs);
    const auto& p = net.parameters();
    Matrix x = inputs, z;
    for (std::size_t k = 0; k < depth; ++k) {
        affine(p.transforms[k], x, z);
        check_finite(z, "activation", k + 1);
        relu_inplace(z);
        if (net.shape().has_skip(k)) add_inplace(z, x);
        std::swap(x, z);
        count(counter, p.transforms[k], inputs.rows(), false, k);
    }
    Matrix out;
    affine(p.heads[depth - 1], x, out);
    check_finite(out, "prediction", depth);
    count(counter, p.heads[depth - 1], inputs.rows(), true, depth - 1);
    return out;
}

double compute_loss(const Matrix& pred, const Batch& batch, LossKind kind) {
    if (pred.rows() != batch.size() || pred.rows() == 0)
        throw std::invalid_argument("prediction rows do not match batch size");
    for (double v : pred.values())
        if (!std::isfinite(v)) throw std::domain_error("compute_loss: non-finite prediction");
    double total = 0.0;
    if (kind == LossKind::CrossEntropy) {
        if (batch.labels.size() != pred.rows()) throw std::invalid_argument("label count does not match predictions");
        for (std::size_t i = 0; i < pred.rows(); ++i) {
            const auto row = pred.row(i);
            const double mx = *std::max_element(row.begin(), row.end());
            double z = 0.0;
            for (double v : row) z += std::exp(v - mx);
            const auto y = static_cast<std::size_t>(batch.labels[i]);
            if (y >= row.size()) throw std::invalid_argument("label out of range");
            total += mx + std::log(z) - row[y];
        }
    } else {
        if (batch.targets.rows() != pred.rows() || batch.targets.cols() != pred.cols())
            throw std::invalid_argument("target shape does not match predictions");
        for (std::size_t i = 0; i < pred.rows(); ++i)
            for (std::size_t j = 0; j < pred.cols(); ++j) {
                const double r = batch.targets(i, j) - pred(i, j);
                total += r * r;
            }
    }
    return total / static_cast<double>(pred.rows());
}

LossVector compute_losses(const std::vector<Matrix>& predictions, const Batch& batch, LossKind kind) {
    LossVector out;
    out.reserve(predictions.size());
    for (const auto& p : predictions) out.push_back(compute_loss(p, batch, kind));
    return out;
}

double classification_error(const Matrix& logits, std::span<const int> labels) {
    if (labels.size() != logits.rows() || labels.empty())
        throw std::invalid_argument("classification_error: label count mismatch");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        const auto arg = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        wrong += arg != labels[i];
    }
    return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

Gradients backward_weighted(const AnytimeNetwork& net, const Batch& batch, const WeightVector& weights) {
    return backward_weighted(net, batch, [&weights](const LossVector&) { return weights; });
}

Gradients backward_weighted(const AnytimeNetwork& net, const Batch& batch, const WeightChooser& choose) {
    const std::size_t L = net.depth();
    validate(batch, net);

    const auto cache = forward_cached(net, batch.inputs);
    const auto& p = net.parameters();
    Gradients out{ParameterSet::zeros(net.shape()), compute_losses(cache.predictions, batch, net.loss_kind()), {}, 0.0};
    out.weights = choose(out.losses);
    const auto& weights = out.weights;
    if (weights.size() != L)
        throw std::invalid_argument("backward_weighted: " + std::to_string(weights.size()) + " weights for " +
                                    std::to_string(L) + " heads");
    for (double w : weights.weights)
        if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("backward_weighted: invalid weight");
    for (std::size_t k = 0; k < L; ++k) out.objective += weights[k] * out.losses[k];

    std::size_t last = L;  // one past the deepest head with nonzero weight
    while (last > 0 && weights[last - 1] == 0.0) --last;

    const std::size_t m = batch.size();
    Matrix grad_act, tmp;
    for (std::size_t k = last; k-- > 0;) {
        if (grad_act.empty()) grad_act = Matrix(m, net.shape().widths[k]);
        if (weights[k] != 0.0) {
            Matrix dpred = loss_gradient(cache.predictions[k], batch, net.loss_kind());
            scale(dpred, weights[k]);
            auto& gh = out.grads.heads[k];
            kernels::matmul_tn(dpred, cache.act[k + 1], gh.weight);
            kernels::column_sums(dpred, gh.bias);
            kernels::matmul_nn(dpred, p.heads[k].weight, tmp);
            for (std::size_t i = 0; i < grad_act.size(); ++i) grad_act.values()[i] += tmp.values()[i];
        }
        check_finite(grad_act, "gradient", k + 1);
        // through the ReLU
        Matrix grad_pre = grad_act;
        const auto pre = cache.pre[k].values();
        auto g = grad_pre.values();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!(pre[i] > 0.0)) g[i] = 0.0;

        auto& gt = out.grads.transforms[k];
        kernels::matmul_tn(grad_pre, cache.act[k], gt.weight);
        kernels::column_sums(grad_pre, gt.bias);
        if (k > 0) {
            kernels::matmul_nn(grad_pre, p.transforms[k].weight, tmp);
            if (net.shape().has_skip(k)) add_inplace(tmp, grad_act);
            std::swap(grad_act, tmp);
        }
    }
    return out;
}

double weighted_objective(const AnytimeNetwork& net, const Batch& batch, const WeightVector& weights) {
    if (weights.size() != net.depth()) throw std::invalid_argument("weighted_objective: weight count mismatch");
    const auto losses = compute_losses(forward_all(net, batch.inputs), batch, net.loss_kind());
    double s = 0.0;
    for (std::size_t k = 0; k < losses.size(); ++k)
        if (weights[k] != 0.0) s += weights[k] * losses[k];
    return s;
}

double finite_diff_check(const AnytimeNetwork& net, const Batch& batch, const WeightVector& weights,
                         const ParameterSet& analytic, const FiniteDiffOptions& options) {
    if (!(options.epsilon > 0.0)) throw std::invalid_argument("finite_diff_check: epsilon must be > 0");
    AnytimeNetwork probe = net;

    std::vector<double*> params;
    probe.parameters().for_each_block([&params](std::span<double> s) {
        for (double& v : s) params.push_back(&v);
    });
    std::vector<double> grads;
    analytic.for_each_block([&grads](std::span<const double> s) { grads.insert(grads.end(), s.begin(), s.end()); });
    if (grads.size() != params.size()) throw std::invalid_argument("finite_diff_check: gradient layout mismatch");

    std::vector<std::size_t> order(params.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (options.max_parameters > 0 && options.max_parameters < order.size()) {
        std::mt19937_64 rng(options.seed);
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(options.max_parameters);
    }

    double worst = 0.0;
    for (std::size_t idx : order) {
        double& v = *params[idx];
        const double saved = v;
        v = saved + options.epsilon;
        const double up = weighted_objective(probe, batch, weights);
        v = saved - options.epsilon;
        const double down = weighted_objective(probe, batch, weights);
        v = saved;
        const double numeric = (up - down) / (2.0 * options.epsilon);
        const double a = grads[idx];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
}

double finite_diff_check(const AnytimeNetwork& net, const Batch& batch, const WeightVector& weights,
                         const FiniteDiffOptions& options) {
    const auto g = backward_weighted(net, batch, weights);
    return finite_diff_check(net, batch, weights, g.grads, options);
}

void save_checkpoint(const AnytimeNetwork& net, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["input_dim"] = net.shape().input_dim;
    j["widths"] = net.shape().widths;
    j["output_dim"] = net.shape().output_dim;
    j["residual"] = net.shape().residual;
    j["loss_kind"] = std::string(to_string(net.loss_kind()));
    auto dump = [](const std::vector<Dense>& layers) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& d : layers) {
            nlohmann::ordered_json e;
            e["rows"] = d.weight.rows();
            e["cols"] = d.weight.cols();
            e["weight"] = std::vector<double>(d.weight.values().begin(), d.weight.values().end());
            e["bias"] = d.bias;
            arr.push_back(std::move(e));
        }
        return arr;
    };
    j["transforms"] = dump(net.parameters().transforms);
    j["heads"] = dump(net.parameters().heads);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
    os << j.dump(1) << '\n';
    if (!os) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

AnytimeNetwork load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
    }
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
        throw std::runtime_error("unsupported checkpoint format version " + std::to_string(version));
    NetworkShape shape{j.at("input_dim").get<std::size_t>(), j.at("widths").get<std::vector<std::size_t>>(),
                       j.at("output_dim").get<std::size_t>(), j.value("residual", false)};
    auto params = ParameterSet::zeros(shape);
    auto load = [](const nlohmann::json& arr, std::vector<Dense>& layers) {
        if (arr.size() != layers.size()) throw std::runtime_error("checkpoint layer count mismatch");
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto w = arr[k].at("weight").get<std::vector<double>>();
            const auto b = arr[k].at("bias").get<std::vector<double>>();
            if (w.size() != layers[k].weight.size() || b.size() != layers[k].bias.size())
                throw std::runtime_error("checkpoint parameter size mismatch at layer " + std::to_string(k + 1));
            std::copy(w.begin(), w.end(), layers[k].weight.values().begin());
            layers[k].bias = b;
        }
    };
    load(j.at("transforms"), params.transforms);
    load(j.at("heads"), params.heads);
    return AnytimeNetwork(std::move(shape), parse_loss_kind(j.at("loss_kind").get<std::string>()), std::move(params));
}

}  // namespace anytime
