#include "anytime/eann.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <random>
#include <string>

namespace anytime::eann {

namespace {

void require_base(double base) {
    if (!(base > 1.0) || !std::isfinite(base))
        throw std::domain_error("exponential base must be finite and > 1, got " + std::to_string(base));
}

struct Stratum {
    double lo = 0.0;
    double hi = 0.0;
    double weight = 0.0;  // fraction of the sampled range
    std::size_t samples = 0;
};

struct StratumResult {
    double sum = 0.0;
    double max = 0.0;
    std::size_t count = 0;
    std::vector<InflationRecord> records;
};

constexpr std::size_t kIidShards = 64;
constexpr std::size_t kMinPerStratum = 16;

std::vector<Stratum> make_strata(const EannSpec& spec, const SimulationOptions& opt) {
    const double lo = 1.0, hi = spec.total_cost();
    std::vector<Stratum> strata;
    if (opt.sampler == BudgetSampler::IidUniform) {
        for (std::size_t s = 0; s < kIidShards; ++s) {
            const std::size_t k = opt.samples / kIidShards + (s < opt.samples % kIidShards ? 1 : 0);
            strata.push_back({lo, hi, 0.0, k});
        }
        return strata;
    }
    const double b = spec.effective_base();
    const double range = hi - lo;
    for (std::size_t n = 1; n < spec.member_count; ++n) {
        const double start = spec.completed_cost(n);
        const double split = start + std::pow(b, static_cast<double>(n - 1));
        const double end = spec.completed_cost(n + 1);
        for (auto [a, c] : {std::pair{start, split}, std::pair{split, end}}) {
            const double w = (c - a) / range;
            const auto k = std::max(kMinPerStratum, static_cast<std::size_t>(std::llround(w * opt.samples)));
            strata.push_back({a, c, w, k});
        }
    }
    return strata;
}

std::mt19937_64 stratum_rng(std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    return std::mt19937_64(seq);
}

InflationRecord evaluate_budget(const EannSpec& spec, double budget, EnsembleKind kind) {
    const auto point = locate(spec, budget);
    InflationRecord r{budget, point.member_index + 1, point.within_member_depth, 0.0, 0.0};
    if (kind == EnsembleKind::Anytime) {
        r.x_prime = competitive_depth(spec, point);
    } else {
        // a completed member's final output; member 1 is complete at B = 1
        r.x_prime = point.member_index == 0 ? 1.0
                                            : spec.member_depth(point.member_index - 1);
        if (point.member_index > 0 && point.within_member_depth >= spec.member_depth(point.member_index))
            r.x_prime = spec.member_depth(point.member_index);
    }
    r.c = budget / r.x_prime;
    return r;
}

StratumResult run_stratum(const EannSpec& spec, const SimulationOptions& opt, const Stratum& s, std::size_t index) {
    auto rng = stratum_rng(opt.seed, index);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    StratumResult out;
    const double width = s.hi - s.lo;
    for (std::size_t j = 0; j < s.samples; ++j) {
        double budget = opt.sampler == BudgetSampler::Stratified
                            ? s.lo + (static_cast<double>(j) + u(rng)) * width / static_cast<double>(s.samples)
                            : s.lo + u(rng) * width;
        budget = std::clamp(budget, s.lo, s.hi);
        const auto r = evaluate_budget(spec, budget, opt.kind);
        out.sum += r.c;
        out.max = std::max(out.max, r.c);
        ++out.count;
        if (out.records.size() < opt.record_limit) out.records.push_back(r);
    }
    return out;
}

InflationReport merge(const std::vector<Stratum>& strata, const std::vector<StratumResult>& results,
                      const SimulationOptions& opt) {
    InflationReport rep;
    double weighted = 0.0, plain_sum = 0.0;
    for (std::size_t i = 0; i < strata.size(); ++i) {
        const auto& r = results[i];
        rep.sup_c = std::max(rep.sup_c, r.max);
        rep.samples += r.count;
        plain_sum += r.sum;
        if (r.count > 0) weighted += strata[i].weight * (r.sum / static_cast<double>(r.count));
        for (const auto& rec : r.records) {
            if (rep.per_budget.size() >= opt.record_limit) break;
            rep.per_budget.push_back(rec);
        }
    }
    rep.mean_c = opt.sampler == BudgetSampler::Stratified ? weighted
                                                          : plain_sum / static_cast<double>(std::max<std::size_t>(rep.samples, 1));
    return rep;
}

void check_options(const EannSpec& spec, const SimulationOptions& opt) {
    validate(spec);
    if (opt.samples == 0) throw std::invalid_argument("simulate_inflation: samples must be >= 1");
    if (spec.member_count < 2) throw std::invalid_argument("simulate_inflation: need at least two members");
}

}  // namespace

double EannSpec::completed_cost(std::size_t n) const {
    const double b = effective_base();
    double total = 0.0, depth = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += depth;
        depth *= b;
    }
    return total;
}

void validate(const EannSpec& spec) {
    require_base(spec.base);
    if (spec.member_count == 0) throw std::invalid_argument("EANN needs at least one member");
    if (spec.workers == 0) throw std::invalid_argument("EANN needs at least one worker");
    require_base(spec.effective_base());
}

BudgetPoint locate(const EannSpec& spec, double budget) {
    require_base(spec.effective_base());
    if (!(budget >= 0.0) || !std::isfinite(budget))
        throw std::invalid_argument("budget must be finite and >= 0, got " + std::to_string(budget));
    const double b = spec.effective_base();
    std::size_t n = 0;
    double completed = 0.0, depth = 1.0;
    while (budget > completed + depth) {
        completed += depth;
        depth *= b;
        ++n;
    }
    return BudgetPoint{budget, n, budget - completed};
}

double competitive_depth(const EannSpec& spec, const BudgetPoint& point) {
    if (point.member_index == 0) return point.within_member_depth;
    const double previous = spec.member_depth(point.member_index - 1);
    return point.within_member_depth <= previous ? previous : point.within_member_depth;
}

std::optional<double> competitive_depth(const EannSpec& spec, double budget) {
    if (budget < 1.0) return std::nullopt;
    return competitive_depth(spec, locate(spec, budget));
}

double inflation(const EannSpec& spec, const BudgetPoint& point) {
    const double spent = point.within_member_depth + spec.completed_cost(point.member_index);
    return spent / competitive_depth(spec, point);
}

std::optional<double> inflation(const EannSpec& spec, double budget) {
    if (budget < 1.0) return std::nullopt;
    const auto point = locate(spec, budget);
    return budget / competitive_depth(spec, point);
}

std::optional<double> discrete_inflation(const EannSpec& spec, double budget) {
    if (budget < 1.0) return std::nullopt;
    auto point = locate(spec, budget);
    point.within_member_depth = std::floor(point.within_member_depth);
    const double x = competitive_depth(spec, point);
    if (!(x >= 1.0)) return std::nullopt;
    return budget / x;
}

double inflation_closed_form(double b, std::size_t n, double z) {
    require_base(b);
    if (n == 0) return 1.0;
    const double prev = std::pow(b, static_cast<double>(n - 1));
    if (z <= prev) return z / prev + 1.0 + 1.0 / (b - 1.0) - 1.0 / (prev * (b - 1.0));
    return 1.0 + (std::pow(b, static_cast<double>(n)) - 1.0) / (z * (b - 1.0));
}

double sup_inflation(double b) {
    require_base(b);
    return 2.0 + 1.0 / (b - 1.0);
}

double expected_inflation_bound(double b) {
    require_base(b);
    return 1.0 - 1.0 / (2.0 * b) + (1.0 + std::log(b)) / (b - 1.0);
}

LinearEnsembleBounds linear_ensemble_inflation(double b) {
    require_base(b);
    return {b * b / (b - 1.0), 1.5 + (b - 1.0) / 2.0 + 1.0 / (b - 1.0)};
}

std::optional<double> plain_inflation(const EannSpec& spec, double budget) {
    if (budget < 1.0) return std::nullopt;
    return evaluate_budget(spec, budget, EnsembleKind::Plain).c;
}

std::uint64_t eann_prediction_count(double budget) {
    if (!(budget >= 0.0)) throw std::invalid_argument("budget must be >= 0");
    return static_cast<std::uint64_t>(std::floor(budget));
}

std::uint64_t plain_prediction_count(const EannSpec& spec, double budget) {
    if (!(budget >= 0.0)) throw std::invalid_argument("budget must be >= 0");
    require_base(spec.effective_base());
    const double b = spec.effective_base();
    std::uint64_t count = 0;
    double completed = 0.0, depth = 1.0;
    while (completed + depth <= budget) {
        completed += depth;
        depth *= b;
        ++count;
    }
    return count;
}

std::string_view to_string(BudgetSampler sampler) {
    return sampler == BudgetSampler::Stratified ? "stratified" : "iid";
}

BudgetSampler parse_budget_sampler(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "stratified") return BudgetSampler::Stratified;
    if (s == "iid" || s == "uniform") return BudgetSampler::IidUniform;
    throw std::invalid_argument("unknown budget sampler '" + std::string(name) + "'");
}

InflationReport simulate_inflation(const EannSpec& spec, const SimulationOptions& options) {
    check_options(spec, options);
    const auto strata = make_strata(spec, options);
    std::vector<StratumResult> results(strata.size());
    const auto count = static_cast<std::ptrdiff_t>(strata.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        results[idx] = run_stratum(spec, options, strata[idx], idx);
    }
    return merge(strata, results, options);
}

namespace reference {

InflationReport simulate_inflation(const EannSpec& spec, const SimulationOptions& options) {
    check_options(spec, options);
    const auto strata = make_strata(spec, options);
    std::vector<StratumResult> results;
    for (std::size_t i = 0; i < strata.size(); ++i) results.push_back(run_stratum(spec, options, strata[i], i));
    return merge(strata, results, options);
}

}  // namespace reference

InflationReport grid_inflation(const EannSpec& spec, std::size_t points, EnsembleKind kind) {
    validate(spec);
    if (points < 2) throw std::invalid_argument("grid_inflation: need at least two points");
    const double lo = 1.0, hi = spec.total_cost();
    InflationReport rep;
    rep.per_budget.resize(points);
    const auto count = static_cast<std::ptrdiff_t>(points);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(points - 1);
        rep.per_budget[static_cast<std::size_t>(i)] = evaluate_budget(spec, lo + t * (hi - lo), kind);
    }
    double sum = 0.0;
    for (const auto& r : rep.per_budget) {
        sum += r.c;
        rep.sup_c = std::max(rep.sup_c, r.c);
    }
    rep.samples = points;
    rep.mean_c = sum / static_cast<double>(points);
    return rep;
}

std::vector<MemberOutput<OutputTag>> member_outputs(const EannSpec& spec, const QualityCurve& curve) {
    validate(spec);
    std::vector<MemberOutput<OutputTag>> out;
    for (std::size_t k = 0; k < spec.member_count; ++k) {
        const double start = spec.completed_cost(k);
        const double depth = spec.member_depth(k);
        std::vector<double> depths;
        for (double d = 1.0; d < depth; d += 1.0) depths.push_back(d);
        depths.push_back(depth);
        for (double d : depths) out.push_back({start + d, curve(d), OutputTag{k + 1, d}});
    }
    return out;
}

}  // namespace anytime::eann
