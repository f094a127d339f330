// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "anytime/eann.hpp"
#include "anytime/experiment.hpp"
#include "anytime/loss_weights.hpp"
#include "anytime/network.hpp"
#include "anytime/objectives.hpp"

using namespace anytime;
namespace ex = anytime::experiment;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---- 1, 2: cost inflation bounds ----------------------------------------

const std::vector<double> kBases{1.5, 2.0, 3.0, 4.0};

Outcome sup_bound() {
    bool ok = true;
    std::string d;
    for (double b : kBases) {
        const auto rep = eann::simulate_inflation(eann::EannSpec{b, 12, 1}, {1'000'000});
        const double target = eann::sup_inflation(b);
        const double rel = std::abs(rep.sup_c - target) / target;
        ok = ok && rel <= 0.01;
        d += fmt("b=%g sup=%.6f target=%.6f rel=%.2e; ", b, rep.sup_c, target, rel);
    }
    ok = ok && eann::sup_inflation(2.0) == 3.0;
    return {ok, d};
}

Outcome mean_bound() {
    bool ok = true;
    std::string d;
    for (double b : kBases) {
        const double bound = eann::expected_inflation_bound(b);
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            eann::SimulationOptions opt{1'000'000};
            opt.seed = seed;
            const auto rep = eann::simulate_inflation(eann::EannSpec{b, 12, 1}, opt);
            worst = std::max(worst, rep.mean_c);
            ok = ok && rep.mean_c <= bound;
        }
        d += fmt("b=%g max mean=%.6f bound=%.6f; ", b, worst, bound);
    }
    const double at2 = eann::expected_inflation_bound(2.0);
    ok = ok && std::abs(at2 - 2.4431) < 5e-5;
    d += fmt("bound(2)=%.5f", at2);
    return {ok, d};
}

// ---- 3: closed forms ------------------------------------------------------

Outcome closed_forms() {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ub(1.01, 10.0), uz(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double b = ub(rng);
        const std::size_t n = 1 + rng() % 11;
        const eann::EannSpec spec{b, 12, 1};
        const double z = std::max(1e-12, uz(rng)) * spec.member_depth(n);
        const double direct = eann::inflation(spec, eann::BudgetPoint{spec.completed_cost(n) + z, n, z});
        worst = std::max(worst, std::abs(direct - eann::inflation_closed_form(b, n, z)));
    }
    return {worst <= 1e-12, fmt("max abs diff %.3e over 1e4 points", worst)};
}

// ---- 4: linear-ensemble minima ---------------------------------------------

Outcome linear_minima() {
    double sup_arg = 0, sup_min = INFINITY, mean_arg = 0, mean_min = INFINITY;
    const std::size_t n = 500000;
    for (std::size_t i = 0; i <= n; ++i) {
        const double b = 1.01 + 5.0 * static_cast<double>(i) / static_cast<double>(n);
        const auto lin = eann::linear_ensemble_inflation(b);
        if (lin.sup < sup_min) {
            sup_min = lin.sup;
            sup_arg = b;
        }
        if (lin.mean_limit < mean_min) {
            mean_min = lin.mean_limit;
            mean_arg = b;
        }
    }
    const double b_star = 1.0 + std::sqrt(2.0);
    const bool ok = std::abs(sup_arg - 2.0) < 1e-3 && std::abs(sup_min - 4.0) < 1e-3 &&
                    std::abs(mean_arg - b_star) < 1e-3 && std::abs(mean_min - (1.5 + std::sqrt(2.0))) < 1e-3;
    return {ok, fmt("sup min %.6f at b=%.5f; mean-limit min %.6f at b=%.5f", sup_min, sup_arg, mean_min, mean_arg)};
}

// ---- 5: gradients -----------------------------------------------------------

Outcome gradients() {
    std::mt19937_64 rng(5);
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uw(0.0, 2.0);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t in = pick(2, 5), depth = pick(1, 5), width = pick(3, 8), out = pick(2, 4), m = pick(3, 10);
        const auto kind = rng() % 2 ? LossKind::CrossEntropy : LossKind::Square;
        AnytimeNetwork net(NetworkShape::uniform(in, depth, width, out, rng() % 2 == 0), kind, rng());
        // zero biases put dead rows exactly on the relu kink
        std::uniform_real_distribution<double> jitter(-0.1, 0.1);
        for (auto& tr : net.parameters().transforms)
            for (double& v : tr.bias) v = jitter(rng);
        Batch batch;
        batch.inputs = Matrix(m, in);
        for (double& v : batch.inputs.values()) v = gauss(rng);
        batch.targets = Matrix(m, out);
        for (std::size_t i = 0; i < m; ++i) {
            batch.labels.push_back(static_cast<int>(rng() % out));
            for (std::size_t j = 0; j < out; ++j) batch.targets(i, j) = gauss(rng);
        }
        std::vector<double> w(depth);
        for (double& v : w) v = rng() % 4 == 0 ? 0.0 : uw(rng);
        w[pick(0, depth - 1)] = 1.0;
        worst = std::max(worst, finite_diff_check(net, batch, WeightVector{w, WeightScheme::Custom}));
    }
    return {worst < 1e-4, fmt("max relative error %.3e over 50 triples", worst)};
}

// ---- 6: objective identities -------------------------------------------------

Outcome objective_identities() {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> logl(-5.0, 3.0), lam(0.1, 5.0);
    double worst_a = 0.0, worst_c = 0.0;
    bool exact_b = true;
    for (int t = 0; t < 1000; ++t) {
        LossVector l(1 + rng() % 10);
        for (double& v : l) v = std::exp(logl(rng));
        const objectives::BarrierConfig cfg{lam(rng)};
        double expected = static_cast<double>(l.size()) * cfg.lambda * (1.0 - std::log(cfg.lambda));
        for (double v : l) expected += cfg.lambda * std::log(v);
        const double got = objectives::barrier_objective(objectives::optimal_barrier_weights(l, cfg), l, cfg);
        worst_a = std::max(worst_a, std::abs(got - expected));

        exact_b = exact_b && objectives::geometric_mean_gradient_weights(l).weights ==
                                 objectives::optimal_barrier_weights(l).weights;

        // golden-section search over sigma^2 for head 0
        const double target = l[0];
        auto f = [&](double s) { return objectives::gaussian_log_likelihood({target}, {s}); };
        const double r = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = target * 1e-2, b = target * 1e2;
        double c = b - r * (b - a), d = a + r * (b - a), fc = f(c), fd = f(d);
        for (int it = 0; it < 200; ++it) {
            if (fc > fd) {
                b = d, d = c, fd = fc, c = b - r * (b - a), fc = f(c);
            } else {
                a = c, c = d, fc = fd, d = a + r * (b - a), fd = f(d);
            }
        }
        worst_c = std::max(worst_c, std::abs(0.5 * (a + b) - target));
    }
    const bool ok = worst_a <= 1e-10 && exact_b && worst_c <= 1e-6;
    return {ok, fmt("(a) max abs err %.3e; (b) exact=%s; (c) max |sigma2 - l| %.3e", worst_a, exact_b ? "yes" : "no",
                    worst_c)};
}

// ---- 7: AdaLoss invariances ------------------------------------------------

Outcome adaloss_invariance() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> loge(-6.0, 4.0), logc(-10.0, 10.0);
    double worst = 0.0;
    bool const_exact = true;
    for (int t = 0; t < 10000; ++t) {
        std::vector<double> ema(1 + rng() % 12);
        for (double& v : ema) v = std::exp(loge(rng));
        const double c = std::exp(logc(rng));
        std::vector<double> scaled(ema);
        for (double& v : scaled) v *= c;
        LossTracker a(ema.size()), b(ema.size());
        a.update(ema);
        b.update(scaled);
        const auto wa = adaloss_weights(a, MixingConfig{0.0, 1.0});
        const auto wb = adaloss_weights(b, MixingConfig{0.0, 1.0});
        for (std::size_t i = 0; i < ema.size(); ++i) worst = std::max(worst, std::abs(wa[i] - wb[i]));
        const auto w1 = adaloss_weights(a, MixingConfig{1.0, 1.0});
        const_exact = const_exact && w1.weights == static_weights(WeightScheme::Const, ema.size()).weights;
    }
    return {worst <= 1e-12 && const_exact,
            fmt("max |w(c*l) - w(l)| %.3e; gamma=1 equals CONST: %s", worst, const_exact ? "yes" : "no")};
}

// ---- 8: directional training claims ----------------------------------------

struct Rerun {
    int early_wins = 0, late_wins = 0, share_wins = 0, compared = 0, share_compared = 0;
    double const_early = 0, ada_early = 0, const_late = 0, ada_late = 0, share_spirals = 0, share_blobs = 0;
};

std::map<std::uint64_t, double> by_seed(const ex::RelativeStat& s) {
    std::map<std::uint64_t, double> m;
    for (std::size_t i = 0; i < s.seeds.size(); ++i) m[s.seeds[i]] = s.per_seed[i];
    return m;
}

Rerun rerun(std::uint64_t seed_base) {
    ex::ExperimentConfig cfg;
    cfg.schemes = {WeightScheme::Const, WeightScheme::AdaLoss};
    cfg.seeds.clear();
    for (std::uint64_t s = 0; s < 5; ++s) cfg.seeds.push_back(seed_base + s);

    Rerun r;
    const auto rep = ex::run_scheme_comparison(cfg);
    const auto& cst = ex::row_for(rep, "CONST");
    const auto& ada = ex::row_for(rep, "ADALOSS");
    // fraction 1/4 is index 0, fraction 1 is index 3
    const auto ce = by_seed(cst.train_loss[0]), ae = by_seed(ada.train_loss[0]);
    const auto cl = by_seed(cst.train_loss[3]), al = by_seed(ada.train_loss[3]);
    for (auto seed : cfg.seeds) {
        if (!ce.count(seed) || !ae.count(seed) || !cl.count(seed) || !al.count(seed)) continue;
        ++r.compared;
        r.early_wins += ae.at(seed) > ce.at(seed);
        r.late_wins += al.at(seed) < cl.at(seed);
    }
    r.const_early = cst.train_loss[0].mean;
    r.ada_early = ada.train_loss[0].mean;
    r.const_late = cst.train_loss[3].mean;
    r.ada_late = ada.train_loss[3].mean;

    ex::ExperimentConfig evo = cfg;
    evo.datasets = {ex::blobs_dataset(), ex::spirals_dataset()};
    const auto ev = ex::run_weight_evolution(evo);
    std::map<std::uint64_t, double> blobs, spirals;
    for (const auto& e : ev.entries)
        if (!e.diverged) (e.dataset == "blobs" ? blobs : spirals)[e.seed] = e.final_third_share;
    for (auto seed : cfg.seeds) {
        if (!blobs.count(seed) || !spirals.count(seed)) continue;
        ++r.share_compared;
        r.share_wins += spirals.at(seed) > blobs.at(seed);
    }
    r.share_blobs = ex::mean_final_third_share(ev, "blobs");
    r.share_spirals = ex::mean_final_third_share(ev, "spirals");
    return r;
}

Outcome training_claims() {
    bool ok = true;
    std::string d;
    for (std::uint64_t base : {1u, 6u, 11u}) {
        const auto r = rerun(base);
        const bool pass = r.compared == 5 && r.share_compared == 5 && r.early_wins >= 4 && r.late_wins >= 4 &&
                          r.share_wins >= 4;
        ok = ok && pass;
        d += fmt("\n    seeds %llu-%llu: early AdaLoss>CONST %d/5 (means %.1f vs %.1f), late AdaLoss<CONST %d/5 "
                 "(means %.1f vs %.1f), final-third share SPIRALS>BLOBS %d/5 (means %.3f vs %.3f) %s",
                 static_cast<unsigned long long>(base), static_cast<unsigned long long>(base + 4), r.early_wins,
                 r.ada_early, r.const_early, r.late_wins, r.ada_late, r.const_late, r.share_wins, r.share_spirals,
                 r.share_blobs, pass ? "ok" : "FAIL");
    }
    return {ok, d};
}

// ---- 9: gating ---------------------------------------------------------------

Outcome gating() {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool increasing = true, invariant = true;
    for (int t = 0; t < 10000; ++t) {
        const std::size_t n = 1 + rng() % 40;
        std::vector<eann::MemberOutput<int>> outs(n), moved(n);
        const bool coarse = t % 2 == 0;  // coarse scores make ties common
        for (std::size_t i = 0; i < n; ++i) {
            const double s = coarse ? std::round(u(rng) * 10.0) / 10.0 : u(rng);
            outs[i] = {static_cast<double>(i + 1) + u(rng) * 0.5, s, static_cast<int>(i)};
            moved[i] = outs[i];
            moved[i].score = t % 3 == 0 ? std::log(s + 1e-3) : 5.0 * s * s * s + 2.0;
        }
        const auto g = eann::gated_anytime_outputs<int>(outs);
        const auto& p = g.published();
        for (std::size_t i = 1; i < p.size(); ++i) increasing = increasing && p[i].score > p[i - 1].score;
        invariant = invariant && eann::gated_anytime_outputs<int>(moved).published_indices() == g.published_indices();
    }
    return {increasing && invariant, fmt("strictly increasing: %s; transform invariant: %s over 1e4 sequences",
                                         increasing ? "yes" : "no", invariant ? "yes" : "no")};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double time_limit_s;  // 0: none
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "EANN sup cost inflation within 1% of 2 + 1/(b-1)", 30.0, sup_bound},
        {2, "EANN mean cost inflation below its bound, 20 repeats", 0.0, mean_bound},
        {3, "cost inflation closed forms match the definition", 5.0, closed_forms},
        {4, "linear-ensemble minima recovered by grid search", 0.0, linear_minima},
        {5, "analytic gradients match finite differences", 60.0, gradients},
        {6, "objective identities", 0.0, objective_identities},
        {7, "AdaLoss scale invariance and gamma=1 CONST", 0.0, adaloss_invariance},
        {8, "SPIRALS early/late trade-off and final-third weight share", 600.0, training_claims},
        {9, "validation gating invariants", 0.0, gating},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string timing = fmt("%.2fs", secs);
        if (c.time_limit_s > 0.0) {
            timing += fmt(" (limit %.0fs)", c.time_limit_s);
            if (secs >= c.time_limit_s) {
                o.passed = false;
                o.detail += " over time limit";
            }
        }
        failed += !o.passed;
        std::printf("%s criterion %d: %s [%s] %s\n", o.passed ? "PASS" : "FAIL", c.id, c.name, timing.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
