#include "anytime/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>
#include <string>

namespace anytime::experiment {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---- json helpers ------------------------------------------------------

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

std::string path_of(const std::string& where, std::string_view key) {
    return where.empty() ? std::string(key) : where + "." + std::string(key);
}

double get_number(const json& j, std::string_view key, const std::string& where) {
    const auto& v = j.at(std::string(key));
    if (!v.is_number()) throw ConfigError(path_of(where, key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path_of(where, key) + " must be finite");
    return d;
}

std::uint64_t get_unsigned(const json& j, std::string_view key, const std::string& where) {
    const auto& v = j.at(std::string(key));
    if (!v.is_number_unsigned()) throw ConfigError(path_of(where, key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
}

bool get_bool(const json& j, std::string_view key, const std::string& where) {
    const auto& v = j.at(std::string(key));
    if (!v.is_boolean()) throw ConfigError(path_of(where, key) + " must be true or false");
    return v.get<bool>();
}

std::string get_string(const json& j, std::string_view key, const std::string& where) {
    const auto& v = j.at(std::string(key));
    if (!v.is_string()) throw ConfigError(path_of(where, key) + " must be a string");
    return v.get<std::string>();
}

template <typename F>
auto translate(const std::string& where, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

std::string scheme_name(WeightScheme s) { return std::string(to_string(s)); }

// ---- datasets ----------------------------------------------------------

Dataset take_rows(const Dataset& d, std::size_t begin, std::size_t end) {
    Dataset out{Matrix(end - begin, d.dim()), std::vector<int>(end - begin), d.classes};
    for (std::size_t i = begin; i < end; ++i) {
        const auto src = d.inputs.row(i);
        std::copy(src.begin(), src.end(), out.inputs.row(i - begin).begin());
        out.labels[i - begin] = d.labels[i];
    }
    return out;
}

constexpr std::uint64_t kValidationSeedOffset = 0x5bd1e995;

DatasetSpec parse_dataset(const json& j, const std::string& where) {
    if (j.is_string()) {
        const auto kind = translate(where, [&] { return parse_synthetic_kind(j.get<std::string>()); });
        DatasetSpec d = kind == SyntheticKind::Blobs ? blobs_dataset() : spirals_dataset();
        std::get<SyntheticSpec>(d.source).kind = kind;
        d.name = std::string(to_string(kind));
        return d;
    }
    require_object(j, where);
    if (!j.contains("kind")) throw ConfigError(where + " needs a 'kind'");
    const std::string kind = get_string(j, "kind", where);
    DatasetSpec d;
    if (kind == "idx") {
        check_keys(j, {"name", "kind", "train_images", "train_labels", "validation_images", "validation_labels",
                       "validation_fraction"},
                   where);
        IdxSource src;
        if (!j.contains("train_images") || !j.contains("train_labels"))
            throw ConfigError(where + " needs train_images and train_labels");
        src.train_images = get_string(j, "train_images", where);
        src.train_labels = get_string(j, "train_labels", where);
        if (j.contains("validation_images") != j.contains("validation_labels"))
            throw ConfigError(where + ": give both validation_images and validation_labels or neither");
        if (j.contains("validation_images")) {
            src.validation_images = get_string(j, "validation_images", where);
            src.validation_labels = get_string(j, "validation_labels", where);
        }
        if (j.contains("validation_fraction")) src.validation_fraction = get_number(j, "validation_fraction", where);
        if (!(src.validation_fraction > 0.0 && src.validation_fraction < 1.0))
            throw ConfigError(where + ".validation_fraction must lie in (0, 1)");
        d.name = j.contains("name") ? get_string(j, "name", where) : "idx";
        d.source = std::move(src);
        return d;
    }
    check_keys(j, {"name", "kind", "n", "classes", "noise", "turns", "seed", "validation_size"}, where);
    const auto sk = translate(where, [&] { return parse_synthetic_kind(kind); });
    d = sk == SyntheticKind::Blobs ? blobs_dataset() : spirals_dataset();
    auto& s = std::get<SyntheticSpec>(d.source);
    s.kind = sk;
    d.name = std::string(to_string(sk));
    if (j.contains("name")) d.name = get_string(j, "name", where);
    if (j.contains("n")) s.n = get_unsigned(j, "n", where);
    if (j.contains("classes")) s.classes = get_unsigned(j, "classes", where);
    if (j.contains("noise")) s.noise = get_number(j, "noise", where);
    if (j.contains("turns")) s.turns = get_number(j, "turns", where);
    if (j.contains("seed")) s.seed = get_unsigned(j, "seed", where);
    if (j.contains("validation_size")) d.validation_size = get_unsigned(j, "validation_size", where);
    translate(where, [&] { validate(s); });
    if (d.validation_size == 0) throw ConfigError(where + ".validation_size must be positive");
    return d;
}

ordered_json dataset_json(const DatasetSpec& d) {
    ordered_json j;
    j["name"] = d.name;
    if (const auto* s = std::get_if<SyntheticSpec>(&d.source)) {
        j["kind"] = std::string(to_string(s->kind));
        j["n"] = s->n;
        j["classes"] = s->classes;
        j["noise"] = s->noise;
        j["turns"] = s->turns;
        j["seed"] = s->seed;
        j["validation_size"] = d.validation_size;
    } else {
        const auto& idx = std::get<IdxSource>(d.source);
        j["kind"] = "idx";
        j["train_images"] = idx.train_images.string();
        j["train_labels"] = idx.train_labels.string();
        if (!idx.validation_images.empty()) {
            j["validation_images"] = idx.validation_images.string();
            j["validation_labels"] = idx.validation_labels.string();
        } else {
            j["validation_fraction"] = idx.validation_fraction;
        }
    }
    return j;
}

// ---- statistics --------------------------------------------------------

RelativeStat summarize(std::vector<std::uint64_t> seeds, std::vector<double> values) {
    RelativeStat s;
    s.seeds = std::move(seeds);
    s.per_seed = std::move(values);
    const auto n = static_cast<double>(s.per_seed.size());
    if (s.per_seed.empty()) {
        s.mean = std::nan("");
        s.stddev = std::nan("");
        return s;
    }
    s.mean = std::accumulate(s.per_seed.begin(), s.per_seed.end(), 0.0) / n;
    if (s.per_seed.size() > 1) {
        double ss = 0.0;
        for (double v : s.per_seed) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

// Runs fn(i) for i in [0, n) in parallel; rethrows the first failure after all finish.
template <typename F>
void parallel_jobs(std::size_t n, F&& fn) {
    std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void fill_evaluation(RunRecord& r, const AnytimeNetwork& net, const Split& split) {
    const auto tr = evaluate(net, split.train);
    const auto va = evaluate(net, split.validation);
    r.train_losses = tr.losses;
    r.validation_losses = va.losses;
    r.validation_errors = va.errors;
}

std::string exclusion_note(const RunRecord& r) {
    return r.scheme + " seed " + std::to_string(r.seed) + " excluded: " + r.error;
}

ordered_json stat_json(double fraction, std::size_t head, const RelativeStat& s) {
    ordered_json j;
    j["fraction"] = fraction;
    j["head"] = head;
    j["mean"] = s.mean;
    j["std"] = s.stddev;
    j["seeds"] = s.seeds;
    j["per_seed"] = s.per_seed;
    return j;
}

ordered_json run_json(const RunRecord& r) {
    ordered_json j;
    j["scheme"] = r.scheme;
    j["seed"] = r.seed;
    j["diverged"] = r.diverged;
    if (r.diverged) {
        j["error"] = r.error;
        return j;
    }
    j["train_loss"] = r.train_losses;
    j["validation_loss"] = r.validation_losses;
    j["validation_error"] = r.validation_errors;
    if (!r.final_weights.empty()) j["final_weights"] = r.final_weights;
    return j;
}

ordered_json document_head(std::string_view command, ordered_json config) {
    ordered_json j;
    j["schema_version"] = report::kSchemaVersion;
    j["command"] = std::string(command);
    j["config"] = std::move(config);
    return j;
}

std::string fmt(double v) { return report::format_number(v); }

constexpr double kMaxGatedCost = 1e6;

std::string_view to_string(eann::EnsembleKind kind) {
    return kind == eann::EnsembleKind::Anytime ? "anytime" : "plain";
}

ordered_json inflation_json(const eann::InflationReport& r) {
    ordered_json j;
    j["sup_c"] = r.sup_c;
    j["mean_c"] = r.mean_c;
    j["samples"] = r.samples;
    return j;
}

}  // namespace

// ---- datasets ----------------------------------------------------------

DatasetSpec spirals_dataset() {
    return DatasetSpec{"spirals",
                       SyntheticSpec{.kind = SyntheticKind::Spirals, .n = 2000, .classes = 3, .noise = 0.1,
                                     .turns = 2.0, .seed = 1},
                       1000};
}

DatasetSpec blobs_dataset() {
    return DatasetSpec{"blobs",
                       SyntheticSpec{.kind = SyntheticKind::Blobs, .n = 2000, .classes = 3, .noise = 1.0,
                                     .turns = 2.0, .seed = 1},
                       1000};
}

Split load_split(const DatasetSpec& spec) {
    Split s;
    s.name = spec.name;
    if (const auto* syn = std::get_if<SyntheticSpec>(&spec.source)) {
        s.train = make_synthetic_dataset(*syn);
        SyntheticSpec v = *syn;
        v.n = spec.validation_size;
        v.seed = syn->seed + kValidationSeedOffset;
        s.validation = make_synthetic_dataset(v);
        return s;
    }
    const auto& idx = std::get<IdxSource>(spec.source);
    Dataset all = load_idx(idx.train_images, idx.train_labels);
    if (!idx.validation_images.empty()) {
        s.train = std::move(all);
        s.validation = load_idx(idx.validation_images, idx.validation_labels);
        s.validation.classes = s.train.classes = std::max(s.train.classes, s.validation.classes);
        return s;
    }
    const auto held = static_cast<std::size_t>(std::floor(idx.validation_fraction * static_cast<double>(all.size())));
    if (held == 0 || held >= all.size())
        throw std::runtime_error("IDX dataset '" + spec.name + "' too small to hold out a validation split");
    s.train = take_rows(all, 0, all.size() - held);
    s.validation = take_rows(all, all.size() - held, all.size());
    return s;
}

// ---- config ------------------------------------------------------------

TrainConfig ExperimentConfig::default_train_config() {
    TrainConfig t;
    t.learning_rate = 0.01;
    t.momentum = 0.9;
    t.weight_decay = 1e-4;
    t.epochs = 60;
    t.batch_size = 32;
    return t;
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.datasets.empty()) throw ConfigError("config needs at least one dataset");
    if (cfg.schemes.empty()) throw ConfigError("config needs at least one weight scheme");
    if (cfg.seeds.empty()) throw ConfigError("config needs at least one seed");
    if (cfg.depth == 0) throw ConfigError("network.depth must be positive");
    if (cfg.opt_epoch_factor == 0) throw ConfigError("opt_epoch_factor must be positive");
    if (cfg.width == 0) throw ConfigError("network.width must be positive");
    std::set<std::uint64_t> seen(cfg.seeds.begin(), cfg.seeds.end());
    if (seen.size() != cfg.seeds.size()) throw ConfigError("seeds must be distinct");
    std::set<WeightScheme> schemes(cfg.schemes.begin(), cfg.schemes.end());
    if (schemes.size() != cfg.schemes.size()) throw ConfigError("schemes must be distinct");
    for (auto s : cfg.schemes) {
        if (s == WeightScheme::Custom) throw ConfigError("schemes: 'custom' cannot be trained from a config");
        if (cfg.depth == 1 && (s == WeightScheme::Linear || s == WeightScheme::HalfEnd))
            throw ConfigError("schemes: " + scheme_name(s) + " needs depth >= 2");
    }
    std::set<std::string> names;
    for (const auto& d : cfg.datasets)
        if (!names.insert(d.name).second) throw ConfigError("duplicate dataset name '" + d.name + "'");
    translate("train", [&] { validate(cfg.train); });
    translate("adaloss", [&] { validate(cfg.adaloss.mix); });
    if (!(cfg.adaloss.decay > 0.0 && cfg.adaloss.decay < 1.0))
        throw ConfigError("adaloss.decay must lie in (0, 1)");
}

ExperimentConfig parse_experiment_config(const json& j, ExperimentConfig cfg) {
    require_object(j, "config");
    check_keys(j, {"datasets", "network", "schemes", "adaloss", "train", "seeds", "opt_epoch_factor", "checkpoint"},
               "config");
    if (j.contains("datasets")) {
        const auto& ds = j.at("datasets");
        if (!ds.is_array()) throw ConfigError("datasets must be an array");
        cfg.datasets.clear();
        for (std::size_t i = 0; i < ds.size(); ++i)
            cfg.datasets.push_back(parse_dataset(ds[i], "datasets[" + std::to_string(i) + "]"));
    }
    if (j.contains("network")) {
        const auto& n = j.at("network");
        require_object(n, "network");
        check_keys(n, {"depth", "width", "residual", "loss"}, "network");
        if (n.contains("depth")) cfg.depth = get_unsigned(n, "depth", "network");
        if (n.contains("width")) cfg.width = get_unsigned(n, "width", "network");
        if (n.contains("residual")) cfg.residual = get_bool(n, "residual", "network");
        if (n.contains("loss"))
            cfg.loss = translate("network.loss", [&] { return parse_loss_kind(get_string(n, "loss", "network")); });
    }
    if (j.contains("schemes")) {
        const auto& s = j.at("schemes");
        if (!s.is_array()) throw ConfigError("schemes must be an array");
        cfg.schemes.clear();
        for (const auto& e : s) {
            if (!e.is_string()) throw ConfigError("schemes entries must be strings");
            const auto name = e.get<std::string>();
            if (name == "opt" || name == "OPT")
                throw ConfigError("schemes: OPT baselines are always trained; list only weight schemes");
            cfg.schemes.push_back(translate("schemes", [&] { return parse_weight_scheme(name); }));
        }
    }
    if (j.contains("adaloss")) {
        const auto& a = j.at("adaloss");
        require_object(a, "adaloss");
        check_keys(a, {"gamma", "final_multiplier", "decay"}, "adaloss");
        if (a.contains("gamma")) cfg.adaloss.mix.gamma = get_number(a, "gamma", "adaloss");
        if (a.contains("final_multiplier"))
            cfg.adaloss.mix.final_multiplier = get_number(a, "final_multiplier", "adaloss");
        if (a.contains("decay")) cfg.adaloss.decay = get_number(a, "decay", "adaloss");
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        require_object(t, "train");
        check_keys(t, {"learning_rate", "momentum", "weight_decay", "epochs", "batch_size", "lr_drop_points"},
                   "train");
        if (t.contains("learning_rate")) cfg.train.learning_rate = get_number(t, "learning_rate", "train");
        if (t.contains("momentum")) cfg.train.momentum = get_number(t, "momentum", "train");
        if (t.contains("weight_decay")) cfg.train.weight_decay = get_number(t, "weight_decay", "train");
        if (t.contains("epochs")) cfg.train.epochs = get_unsigned(t, "epochs", "train");
        if (t.contains("batch_size")) cfg.train.batch_size = get_unsigned(t, "batch_size", "train");
        if (t.contains("lr_drop_points")) {
            const auto& p = t.at("lr_drop_points");
            if (!p.is_array()) throw ConfigError("train.lr_drop_points must be an array");
            cfg.train.lr_drop_points.clear();
            for (const auto& v : p) {
                if (!v.is_number()) throw ConfigError("train.lr_drop_points entries must be numbers");
                cfg.train.lr_drop_points.push_back(v.get<double>());
            }
        }
    }
    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        if (!s.is_array()) throw ConfigError("seeds must be an array");
        cfg.seeds.clear();
        for (const auto& v : s) {
            if (!v.is_number_unsigned()) throw ConfigError("seeds entries must be non-negative integers");
            cfg.seeds.push_back(v.get<std::uint64_t>());
        }
    }
    if (j.contains("opt_epoch_factor")) cfg.opt_epoch_factor = get_unsigned(j, "opt_epoch_factor", "config");
    if (j.contains("checkpoint")) cfg.checkpoint = get_string(j, "checkpoint", "config");
    validate(cfg);
    return cfg;
}

ordered_json to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["datasets"] = ordered_json::array();
    for (const auto& d : cfg.datasets) j["datasets"].push_back(dataset_json(d));
    j["network"] = {{"depth", cfg.depth},
                    {"width", cfg.width},
                    {"residual", cfg.residual},
                    {"loss", std::string(to_string(cfg.loss))}};
    j["schemes"] = ordered_json::array();
    for (auto s : cfg.schemes) j["schemes"].push_back(scheme_name(s));
    j["adaloss"] = {{"gamma", cfg.adaloss.mix.gamma},
                    {"final_multiplier", cfg.adaloss.mix.final_multiplier},
                    {"decay", cfg.adaloss.decay}};
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"momentum", cfg.train.momentum},
                  {"weight_decay", cfg.train.weight_decay},
                  {"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"lr_drop_points", cfg.train.lr_drop_points}};
    j["seeds"] = cfg.seeds;
    j["opt_epoch_factor"] = cfg.opt_epoch_factor;
    if (cfg.checkpoint) j["checkpoint"] = cfg.checkpoint->string();
    return j;
}

// ---- scheme comparison -------------------------------------------------

std::size_t fraction_head(double fraction, std::size_t depth) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must lie in (0, 1]");
    // small slack so that e.g. 0.75 * 8 does not round up past 6
    const double x = fraction * static_cast<double>(depth);
    auto h = static_cast<std::size_t>(std::ceil(x - 1e-9));
    return std::clamp<std::size_t>(h, 1, depth);
}

NetworkShape network_shape(const ExperimentConfig& cfg, const Split& split) {
    return NetworkShape::uniform(split.train.dim(), cfg.depth, cfg.width, split.train.classes, cfg.residual);
}

SchemeSource scheme_source(const ExperimentConfig& cfg, WeightScheme scheme) {
    if (scheme == WeightScheme::AdaLoss) return cfg.adaloss;
    return static_weights(scheme, cfg.depth);
}

ComparisonReport run_scheme_comparison(const ExperimentConfig& cfg) {
    validate(cfg);
    const Split split = load_split(cfg.datasets.front());
    const NetworkShape shape = network_shape(cfg, split);

    ComparisonReport rep;
    rep.dataset = split.name;
    for (double f : kFractions) rep.fraction_heads.push_back(fraction_head(f, cfg.depth));
    std::vector<std::size_t> opt_heads(rep.fraction_heads);
    opt_heads.erase(std::unique(opt_heads.begin(), opt_heads.end()), opt_heads.end());

    const std::size_t S = cfg.seeds.size();
    rep.runs.resize(cfg.schemes.size() * S);
    rep.baselines.resize(opt_heads.size() * S);
    const std::size_t jobs = rep.runs.size() + rep.baselines.size();

    parallel_jobs(jobs, [&](std::size_t job) {
        const bool is_opt = job >= rep.runs.size();
        const std::size_t idx = is_opt ? job - rep.runs.size() : job;
        const std::uint64_t seed = cfg.seeds[idx % S];
        RunRecord& r = is_opt ? rep.baselines[idx] : rep.runs[idx];
        r.seed = seed;
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        AnytimeNetwork init(shape, cfg.loss, seed);
        try {
            if (is_opt) {
                const std::size_t head = opt_heads[idx / S];
                r.scheme = "opt@" + std::to_string(head);
                tc.epochs *= cfg.opt_epoch_factor;
                auto base = train_opt_baseline(std::move(init), split.train, head, tc);
                fill_evaluation(r, base.result.net, split);
            } else {
                const WeightScheme scheme = cfg.schemes[idx / S];
                r.scheme = scheme_name(scheme);
                auto res = train(std::move(init), split.train, scheme_source(cfg, scheme), tc);
                fill_evaluation(r, res.net, split);
                r.final_weights = res.final_weights.weights;
            }
        } catch (const DivergenceError& e) {
            r.diverged = true;
            r.error = e.what();
        }
    });

    for (const auto& r : rep.baselines)
        if (r.diverged) rep.exclusions.push_back(exclusion_note(r));
    for (const auto& r : rep.runs)
        if (r.diverged) rep.exclusions.push_back(exclusion_note(r));

    auto baseline = [&](std::size_t head, std::size_t seed_index) -> const RunRecord& {
        const auto pos = static_cast<std::size_t>(std::find(opt_heads.begin(), opt_heads.end(), head) -
                                                  opt_heads.begin());
        return rep.baselines[pos * S + seed_index];
    };
    const double error_floor = 0.5 / static_cast<double>(split.validation.size());

    FractionRow opt_row{"opt", {}, {}};
    for (std::size_t f = 0; f < std::size(kFractions); ++f) {
        std::vector<std::uint64_t> seeds;
        for (std::size_t s = 0; s < S; ++s)
            if (!baseline(rep.fraction_heads[f], s).diverged) seeds.push_back(cfg.seeds[s]);
        // the baseline against itself, identically zero
        opt_row.train_loss.push_back(summarize(seeds, std::vector<double>(seeds.size(), 0.0)));
        opt_row.validation_error.push_back(summarize(seeds, std::vector<double>(seeds.size(), 0.0)));
    }
    rep.rows.push_back(std::move(opt_row));

    for (std::size_t k = 0; k < cfg.schemes.size(); ++k) {
        FractionRow row{scheme_name(cfg.schemes[k]), {}, {}};
        for (std::size_t f = 0; f < std::size(kFractions); ++f) {
            const std::size_t h = rep.fraction_heads[f] - 1;
            std::vector<std::uint64_t> seeds;
            std::vector<double> loss_rel, err_rel;
            for (std::size_t s = 0; s < S; ++s) {
                const RunRecord& run = rep.runs[k * S + s];
                const RunRecord& opt = baseline(rep.fraction_heads[f], s);
                if (run.diverged || opt.diverged) continue;
                seeds.push_back(cfg.seeds[s]);
                const double lo = opt.train_losses[h];
                loss_rel.push_back(100.0 * (run.train_losses[h] - lo) / lo);
                const double eo = opt.validation_errors[h];
                err_rel.push_back(100.0 * (run.validation_errors[h] - eo) / std::max(eo, error_floor));
            }
            row.train_loss.push_back(summarize(seeds, std::move(loss_rel)));
            row.validation_error.push_back(summarize(std::move(seeds), std::move(err_rel)));
        }
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

const FractionRow& row_for(const ComparisonReport& report, std::string_view scheme) {
    for (const auto& r : report.rows)
        if (r.scheme == scheme) return r;
    throw std::out_of_range("no row for scheme '" + std::string(scheme) + "'");
}

// ---- weight evolution --------------------------------------------------

double final_third_share(std::span<const double> weights) {
    if (weights.empty()) throw std::invalid_argument("final_third_share: no weights");
    const std::size_t tail = (weights.size() + 2) / 3;
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double late = std::accumulate(weights.end() - static_cast<std::ptrdiff_t>(tail), weights.end(), 0.0);
    if (!(total > 0.0)) throw std::invalid_argument("final_third_share: weights sum to zero");
    return late / total;
}

EvolutionReport run_weight_evolution(const ExperimentConfig& cfg) {
    validate(cfg);
    std::vector<Split> splits;
    for (const auto& d : cfg.datasets) splits.push_back(load_split(d));

    EvolutionReport rep;
    rep.final_third_heads = (cfg.depth + 2) / 3;
    const std::size_t S = cfg.seeds.size();
    rep.entries.resize(splits.size() * S);
    parallel_jobs(rep.entries.size(), [&](std::size_t job) {
        const Split& split = splits[job / S];
        EvolutionEntry& e = rep.entries[job];
        e.dataset = split.name;
        e.seed = cfg.seeds[job % S];
        TrainConfig tc = cfg.train;
        tc.seed = e.seed;
        try {
            auto res = train(AnytimeNetwork(network_shape(cfg, split), cfg.loss, e.seed), split.train, cfg.adaloss, tc);
            e.weights = res.final_weights.weights;
            e.final_third_share = final_third_share(e.weights);
        } catch (const DivergenceError& err) {
            e.diverged = true;
            e.error = err.what();
        }
    });
    for (const auto& e : rep.entries)
        if (e.diverged)
            rep.exclusions.push_back(e.dataset + " seed " + std::to_string(e.seed) + " excluded: " + e.error);
    return rep;
}

double mean_final_third_share(const EvolutionReport& report, std::string_view dataset) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& e : report.entries)
        if (e.dataset == dataset && !e.diverged) {
            sum += e.final_third_share;
            ++n;
        }
    return n == 0 ? std::nan("") : sum / static_cast<double>(n);
}

// ---- single training run -----------------------------------------------

TrainingRun run_training(const ExperimentConfig& cfg) {
    validate(cfg);
    const Split split = load_split(cfg.datasets.front());
    const WeightScheme scheme = cfg.schemes.front();
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seeds.front();
    AnytimeNetwork init(network_shape(cfg, split), cfg.loss, tc.seed);
    TrainingRun run{split.name, scheme_name(scheme), tc.seed,
                    train(std::move(init), split.train, scheme_source(cfg, scheme), tc), {}, {}};
    run.train_eval = evaluate(run.result.net, split.train);
    run.validation_eval = evaluate(run.result.net, split.validation);
    if (cfg.checkpoint) save_checkpoint(run.result.net, *cfg.checkpoint);
    return run;
}

// ---- EANN verification -------------------------------------------------

void validate(const EannVerifyConfig& cfg) {
    if (cfg.bases.empty()) throw ConfigError("eann: at least one base is required");
    for (double b : cfg.bases)
        if (!(b > 1.0) || !std::isfinite(b)) throw ConfigError("eann: every base must be finite and > 1");
    if (cfg.member_count < 2) throw ConfigError("eann: members must be >= 2");
    if (cfg.workers == 0) throw ConfigError("eann: workers must be >= 1");
    if (cfg.samples == 0) throw ConfigError("eann: samples must be >= 1");
    if (!(cfg.sup_tolerance >= 0.0)) throw ConfigError("eann: sup_tolerance must be >= 0");
}

EannVerifyConfig parse_eann_verify_config(const json& j, EannVerifyConfig cfg) {
    require_object(j, "config");
    check_keys(j, {"bases", "members", "workers", "samples", "sampler", "seed", "sup_tolerance"}, "config");
    if (j.contains("bases")) {
        const auto& b = j.at("bases");
        if (!b.is_array()) throw ConfigError("bases must be an array");
        cfg.bases.clear();
        for (const auto& v : b) {
            if (!v.is_number()) throw ConfigError("bases entries must be numbers");
            cfg.bases.push_back(v.get<double>());
        }
    }
    if (j.contains("members")) cfg.member_count = get_unsigned(j, "members", "");
    if (j.contains("workers")) cfg.workers = get_unsigned(j, "workers", "");
    if (j.contains("samples")) cfg.samples = get_unsigned(j, "samples", "");
    if (j.contains("sampler"))
        cfg.sampler = translate("sampler", [&] { return eann::parse_budget_sampler(get_string(j, "sampler", "")); });
    if (j.contains("seed")) cfg.seed = get_unsigned(j, "seed", "");
    if (j.contains("sup_tolerance")) cfg.sup_tolerance = get_number(j, "sup_tolerance", "");
    validate(cfg);
    return cfg;
}

ordered_json to_json(const EannVerifyConfig& cfg) {
    ordered_json j;
    j["bases"] = cfg.bases;
    j["members"] = cfg.member_count;
    j["workers"] = cfg.workers;
    j["samples"] = cfg.samples;
    j["sampler"] = std::string(eann::to_string(cfg.sampler));
    j["seed"] = cfg.seed;
    j["sup_tolerance"] = cfg.sup_tolerance;
    return j;
}

bool VerificationReport::all_passed() const {
    for (const auto& b : bases)
        for (const auto& c : b.checks)
            if (!c.passed) return false;
    return true;
}

VerificationReport run_eann_verification(const EannVerifyConfig& cfg) {
    validate(cfg);
    VerificationReport rep;
    for (double base : cfg.bases) {
        const eann::EannSpec spec{base, cfg.member_count, cfg.workers};
        BaseVerification v;
        v.base = base;
        v.effective_base = spec.effective_base();
        eann::SimulationOptions opt{cfg.samples, cfg.sampler, eann::EnsembleKind::Anytime, cfg.seed, 0};
        v.anytime = eann::simulate_inflation(spec, opt);
        opt.kind = eann::EnsembleKind::Plain;
        v.plain = eann::simulate_inflation(spec, opt);

        const double b = v.effective_base;
        const double sup = eann::sup_inflation(b);
        const double mean_bound = eann::expected_inflation_bound(b);
        const auto linear = eann::linear_ensemble_inflation(b);
        constexpr double rounding = 1e-12;
        // the plain mean converges to the linear limit for large b, so the estimate straddles it
        constexpr double sampling_slack = 1e-4;
        v.checks = {
            {"sup_within_tolerance", v.anytime.sup_c, sup,
             std::abs(v.anytime.sup_c - sup) <= cfg.sup_tolerance * sup},
            {"sup_not_above_bound", v.anytime.sup_c, sup, v.anytime.sup_c <= sup * (1.0 + rounding)},
            {"mean_not_above_bound", v.anytime.mean_c, mean_bound, v.anytime.mean_c <= mean_bound},
            {"sup_below_linear_sup", sup, linear.sup, sup < linear.sup},
            {"mean_bound_below_linear_mean", mean_bound, linear.mean_limit, mean_bound < linear.mean_limit},
            {"plain_sup_not_above_linear_sup", v.plain.sup_c, linear.sup,
             v.plain.sup_c <= linear.sup * (1.0 + rounding)},
            {"plain_mean_not_above_linear_mean", v.plain.mean_c, linear.mean_limit,
             v.plain.mean_c <= linear.mean_limit * (1.0 + sampling_slack)},
        };
        rep.bases.push_back(std::move(v));
    }
    return rep;
}

// ---- EANN simulation ---------------------------------------------------

void validate(const EannSimulateConfig& cfg) {
    translate("eann", [&] { eann::validate(cfg.spec); });
    if (cfg.spec.member_count < 2) throw ConfigError("eann: members must be >= 2");
    if (cfg.options.samples == 0) throw ConfigError("eann: samples must be >= 1");
    if (!(cfg.quality_tau > 0.0) || !std::isfinite(cfg.quality_tau))
        throw ConfigError("eann: quality_tau must be finite and > 0");
}

EannSimulateConfig parse_eann_simulate_config(const json& j, EannSimulateConfig cfg) {
    require_object(j, "config");
    check_keys(j, {"base", "members", "workers", "samples", "sampler", "kind", "seed", "record_limit", "quality_tau"},
               "config");
    if (j.contains("base")) cfg.spec.base = get_number(j, "base", "");
    if (j.contains("members")) cfg.spec.member_count = get_unsigned(j, "members", "");
    if (j.contains("workers")) cfg.spec.workers = get_unsigned(j, "workers", "");
    if (j.contains("samples")) cfg.options.samples = get_unsigned(j, "samples", "");
    if (j.contains("sampler"))
        cfg.options.sampler =
            translate("sampler", [&] { return eann::parse_budget_sampler(get_string(j, "sampler", "")); });
    if (j.contains("kind")) {
        const auto k = get_string(j, "kind", "");
        if (k == "anytime") cfg.options.kind = eann::EnsembleKind::Anytime;
        else if (k == "plain") cfg.options.kind = eann::EnsembleKind::Plain;
        else throw ConfigError("kind must be 'anytime' or 'plain'");
    }
    if (j.contains("seed")) cfg.options.seed = get_unsigned(j, "seed", "");
    if (j.contains("record_limit")) cfg.options.record_limit = get_unsigned(j, "record_limit", "");
    if (j.contains("quality_tau")) cfg.quality_tau = get_number(j, "quality_tau", "");
    validate(cfg);
    return cfg;
}

ordered_json to_json(const EannSimulateConfig& cfg) {
    ordered_json j;
    j["base"] = cfg.spec.base;
    j["members"] = cfg.spec.member_count;
    j["workers"] = cfg.spec.workers;
    j["samples"] = cfg.options.samples;
    j["sampler"] = std::string(eann::to_string(cfg.options.sampler));
    j["kind"] = std::string(to_string(cfg.options.kind));
    j["seed"] = cfg.options.seed;
    j["record_limit"] = cfg.options.record_limit;
    j["quality_tau"] = cfg.quality_tau;
    return j;
}

// ---- documents ---------------------------------------------------------

Document make_document(const ExperimentConfig& cfg, const ComparisonReport& rep) {
    Document d{document_head("compare-schemes", to_json(cfg)), {}};
    auto& j = d.json;
    j["dataset"] = rep.dataset;
    j["aggregation"] = "mean and sample standard deviation over seeds of a single architecture";
    j["fractions"] = std::vector<double>(std::begin(kFractions), std::end(kFractions));
    j["fraction_heads"] = rep.fraction_heads;
    j["opt_baseline"] = "single-head nets trained for opt_epoch_factor x train.epochs epochs; a fixed budget, "
                        "not a convergence test";
    j["relative_increase_percent"] = ordered_json::array();
    d.table.header = {"scheme", "fraction", "head", "metric", "mean", "std", "seeds"};
    for (const auto& row : rep.rows) {
        ordered_json r;
        r["scheme"] = row.scheme;
        r["train_loss"] = ordered_json::array();
        r["validation_error"] = ordered_json::array();
        for (std::size_t f = 0; f < row.train_loss.size(); ++f) {
            r["train_loss"].push_back(stat_json(kFractions[f], rep.fraction_heads[f], row.train_loss[f]));
            r["validation_error"].push_back(
                stat_json(kFractions[f], rep.fraction_heads[f], row.validation_error[f]));
        }
        j["relative_increase_percent"].push_back(std::move(r));
        for (const auto* metric : {"train_loss", "validation_error"}) {
            const auto& stats = std::string_view(metric) == "train_loss" ? row.train_loss : row.validation_error;
            for (std::size_t f = 0; f < stats.size(); ++f)
                d.table.rows.push_back({row.scheme, fmt(kFractions[f]), std::to_string(rep.fraction_heads[f]), metric,
                                        fmt(stats[f].mean), fmt(stats[f].stddev),
                                        std::to_string(stats[f].per_seed.size())});
        }
    }
    j["runs"] = ordered_json::array();
    for (const auto& r : rep.runs) j["runs"].push_back(run_json(r));
    j["baselines"] = ordered_json::array();
    for (const auto& r : rep.baselines) j["baselines"].push_back(run_json(r));
    j["exclusions"] = rep.exclusions;
    return d;
}

Document make_document(const ExperimentConfig& cfg, const EvolutionReport& rep) {
    Document d{document_head("weight-evolution", to_json(cfg)), {}};
    auto& j = d.json;
    j["final_third_heads"] = rep.final_third_heads;
    j["datasets"] = ordered_json::array();
    d.table.header = {"dataset", "seed", "final_third_share", "weight_sum"};
    for (std::size_t k = 1; k <= cfg.depth; ++k) d.table.header.push_back("w" + std::to_string(k));
    for (const auto& ds : cfg.datasets) {
        ordered_json dj;
        dj["name"] = ds.name;
        dj["mean_final_third_share"] = mean_final_third_share(rep, ds.name);
        dj["runs"] = ordered_json::array();
        for (const auto& e : rep.entries) {
            if (e.dataset != ds.name) continue;
            ordered_json r;
            r["seed"] = e.seed;
            r["diverged"] = e.diverged;
            if (e.diverged) {
                r["error"] = e.error;
            } else {
                const double sum = std::accumulate(e.weights.begin(), e.weights.end(), 0.0);
                r["weights"] = e.weights;
                r["weight_sum"] = sum;
                r["final_third_share"] = e.final_third_share;
                std::vector<std::string> row{e.dataset, std::to_string(e.seed), fmt(e.final_third_share), fmt(sum)};
                for (double w : e.weights) row.push_back(fmt(w));
                d.table.rows.push_back(std::move(row));
            }
            dj["runs"].push_back(std::move(r));
        }
        j["datasets"].push_back(std::move(dj));
    }
    j["exclusions"] = rep.exclusions;
    return d;
}

Document make_document(const ExperimentConfig& cfg, const TrainingRun& run) {
    Document d{document_head("train", to_json(cfg)), {}};
    auto& j = d.json;
    j["dataset"] = run.dataset;
    j["scheme"] = run.scheme;
    j["seed"] = run.seed;
    const std::size_t L = cfg.depth;
    d.table.header = {"epoch", "learning_rate", "objective"};
    for (std::size_t k = 1; k <= L; ++k) d.table.header.push_back("loss" + std::to_string(k));
    ordered_json epochs = ordered_json::array();
    for (std::size_t e = 0; e < run.result.epoch_losses.size(); ++e) {
        const double lr = learning_rate_at(cfg.train, e);
        ordered_json ej;
        ej["epoch"] = e + 1;
        ej["learning_rate"] = lr;
        ej["objective"] = run.result.epoch_objective[e];
        ej["losses"] = run.result.epoch_losses[e];
        if (e < run.result.epoch_ema.size()) ej["ema"] = run.result.epoch_ema[e];
        epochs.push_back(std::move(ej));
        std::vector<std::string> row{std::to_string(e + 1), fmt(lr), fmt(run.result.epoch_objective[e])};
        for (double v : run.result.epoch_losses[e]) row.push_back(fmt(v));
        d.table.rows.push_back(std::move(row));
    }
    j["epochs"] = std::move(epochs);
    j["final"] = {{"train_loss", run.train_eval.losses},
                  {"train_error", run.train_eval.errors},
                  {"validation_loss", run.validation_eval.losses},
                  {"validation_error", run.validation_eval.errors},
                  {"weights", run.result.final_weights.weights}};
    if (cfg.checkpoint) j["checkpoint"] = cfg.checkpoint->string();
    return d;
}

Document make_document(const EannVerifyConfig& cfg, const VerificationReport& rep) {
    Document d{document_head("eann-verify", to_json(cfg)), {}};
    auto& j = d.json;
    j["bases"] = ordered_json::array();
    d.table.header = {"base", "check", "observed", "bound", "passed"};
    for (const auto& b : rep.bases) {
        ordered_json bj;
        bj["base"] = b.base;
        bj["effective_base"] = b.effective_base;
        bj["anytime"] = inflation_json(b.anytime);
        bj["plain"] = inflation_json(b.plain);
        const auto linear = eann::linear_ensemble_inflation(b.effective_base);
        bj["formulas"] = {{"sup", eann::sup_inflation(b.effective_base)},
                          {"mean_bound", eann::expected_inflation_bound(b.effective_base)},
                          {"linear_sup", linear.sup},
                          {"linear_mean_limit", linear.mean_limit}};
        bj["checks"] = ordered_json::array();
        for (const auto& c : b.checks) {
            bj["checks"].push_back(
                {{"name", c.name}, {"observed", c.observed}, {"bound", c.bound}, {"passed", c.passed}});
            d.table.rows.push_back({fmt(b.base), c.name, fmt(c.observed), fmt(c.bound), c.passed ? "true" : "false"});
        }
        j["bases"].push_back(std::move(bj));
    }
    j["all_passed"] = rep.all_passed();
    return d;
}

Document make_document(const EannSimulateConfig& cfg, const eann::InflationReport& rep) {
    Document d{document_head("eann-simulate", to_json(cfg)), {}};
    auto& j = d.json;
    const double b = cfg.spec.effective_base();
    j["effective_base"] = b;
    j["result"] = inflation_json(rep);
    const auto linear = eann::linear_ensemble_inflation(b);
    j["formulas"] = {{"sup", eann::sup_inflation(b)},
                     {"mean_bound", eann::expected_inflation_bound(b)},
                     {"linear_sup", linear.sup},
                     {"linear_mean_limit", linear.mean_limit}};

    // one candidate per unit of depth, so only for ensembles of modest total cost
    if (cfg.spec.total_cost() <= kMaxGatedCost) {
        const auto outputs = eann::member_outputs(cfg.spec, eann::QualityCurve{cfg.quality_tau});
        const auto schedule = eann::gated_anytime_outputs<eann::OutputTag>(outputs);
        ordered_json gated = ordered_json::array();
        for (const auto& o : schedule.published())
            gated.push_back(
                {{"cost", o.cost}, {"member", o.payload.member}, {"depth", o.payload.depth}, {"score", o.score}});
        j["gated_outputs"] = {{"candidates", outputs.size()}, {"published", std::move(gated)}};
    } else {
        j["gated_outputs"] = {{"skipped", "total cost above " + fmt(kMaxGatedCost)}};
    }

    j["records"] = ordered_json::array();
    d.table.header = {"budget", "member", "z", "x_prime", "c"};
    for (const auto& r : rep.per_budget) {
        j["records"].push_back(
            {{"budget", r.budget}, {"member", r.member}, {"z", r.z}, {"x_prime", r.x_prime}, {"c", r.c}});
        d.table.rows.push_back({fmt(r.budget), std::to_string(r.member), fmt(r.z), fmt(r.x_prime), fmt(r.c)});
    }
    return d;
}

}  // namespace anytime::experiment
