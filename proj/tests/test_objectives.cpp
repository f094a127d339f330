#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "anytime/objectives.hpp"

using namespace anytime;
using namespace anytime::objectives;

namespace {

WeightVector wv(std::vector<double> w) { return WeightVector{std::move(w), WeightScheme::Custom}; }

// Golden-section maximisation of a unimodal f on [lo, hi].
template <typename F>
double golden_max(F f, double lo, double hi, double tol = 1e-12) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

std::vector<double> random_losses(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> logu(-6.0, 4.0);
    std::vector<double> l(n);
    for (double& v : l) v = std::exp(logu(rng));
    return l;
}

}  // namespace

TEST_CASE("weighted sum") {
    CHECK(weighted_sum(wv({1, 1}), {0.5, 0.5}) == 1.0);
    CHECK(weighted_sum(wv({0.25, 0.5, 1.0}), {2, 1, 0.5}) == doctest::Approx(1.5));
    CHECK(weighted_sum(wv({0, 1}), {7, 0.3}) == doctest::Approx(0.3));
    CHECK_THROWS_AS(weighted_sum(wv({1}), {1, 2}), std::invalid_argument);
}

TEST_CASE("barrier objective") {
    CHECK(barrier_objective(wv({1}), {1}) == 1.0);
    CHECK(barrier_objective(wv({0.5, 2}), {2, 0.5}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(barrier_objective(wv({std::numbers::e}), {0.0}), std::domain_error);
    CHECK_THROWS_AS(barrier_objective(wv({0.0}), {1.0}), std::domain_error);
    CHECK_THROWS_AS(barrier_objective(wv({1.0}), {1.0}, BarrierConfig{0.0}), std::domain_error);
    CHECK_THROWS_WITH(barrier_objective(wv({1.0, -1.0}), {1.0, 1.0}), doctest::Contains("index 1"));
}

TEST_CASE("optimal barrier weights") {
    CHECK(optimal_barrier_weights({2, 0.5}).weights == std::vector<double>{0.5, 2.0});
    CHECK(optimal_barrier_weights({2, 2}, BarrierConfig{2.0}).weights == std::vector<double>{1, 1});
    const auto w = optimal_barrier_weights({1, 10, 100});
    CHECK(w[0] == 1.0);
    CHECK(w[1] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(w[2] == doctest::Approx(0.01).epsilon(1e-15));
    CHECK_THROWS_AS(optimal_barrier_weights({1, 0}), std::domain_error);
}

TEST_CASE("optimal weights minimise the barrier objective") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> lam(0.05, 5.0);
    std::uniform_real_distribution<double> logb(-5.0, 5.0);
    for (int trial = 0; trial < 500; ++trial) {
        const auto l = random_losses(rng, 1 + trial % 9);
        const BarrierConfig cfg{lam(rng)};
        const double best = barrier_objective(optimal_barrier_weights(l, cfg), l, cfg);
        for (int k = 0; k < 20; ++k) {
            std::vector<double> b(l.size());
            for (double& v : b) v = std::exp(logb(rng));
            CHECK(best <= barrier_objective(wv(b), l, cfg) + 1e-12 * std::abs(best));
        }
        // the closed form of the minimum
        double expected = 0.0;
        for (double v : l) expected += cfg.lambda * std::log(v);
        expected += static_cast<double>(l.size()) * cfg.lambda * (1.0 - std::log(cfg.lambda));
        CHECK(std::abs(best - expected) <= 1e-10 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("geometric mean objective") {
    CHECK(geometric_mean_objective({1, 1, 1}) == 0.0);
    CHECK(geometric_mean_objective({std::numbers::e, std::exp(2.0)}) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(std::abs(geometric_mean_objective({4, 0.25})) < 1e-15);
    CHECK_THROWS_AS(geometric_mean_objective({1, -1}), std::domain_error);

    CHECK(geometric_mean_gradient_weights({1, 1}).weights == std::vector<double>{1, 1});
    CHECK(geometric_mean_gradient_weights({2, 0.5}).weights == std::vector<double>{0.5, 2});
    CHECK(geometric_mean_gradient_weights({10}).weights[0] == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("geometric mean scale cancellation") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 500; ++trial) {
        const auto l = random_losses(rng, 1 + trial % 7);
        const double c = std::exp(std::uniform_real_distribution<double>(-5.0, 5.0)(rng));
        std::vector<double> cl(l);
        for (double& v : cl) v *= c;
        const double L = static_cast<double>(l.size());
        CHECK(geometric_mean_objective(cl) - geometric_mean_objective(l) ==
              doctest::Approx(L * std::log(c)).epsilon(1e-10));
        const auto w = geometric_mean_gradient_weights(l);
        const auto wc = geometric_mean_gradient_weights(cl);
        for (std::size_t i = 0; i < l.size(); ++i) CHECK(wc[i] == doctest::Approx(w[i] / c).epsilon(1e-13));

        // d/dl_i sum ln l = 1/l_i, by central differences
        for (std::size_t i = 0; i < l.size(); ++i) {
            const double h = 1e-6 * l[i];
            auto up = l, dn = l;
            up[i] += h;
            dn[i] -= h;
            const double numeric = (geometric_mean_objective(up) - geometric_mean_objective(dn)) / (2 * h);
            CHECK(numeric == doctest::Approx(w[i]).epsilon(1e-6));
        }
        // gradient weights coincide with the barrier optimum at lambda 1
        CHECK(w.weights == optimal_barrier_weights(l).weights);
    }
}

TEST_CASE("gaussian likelihood") {
    CHECK(gaussian_mle_sigma({0.25}) == std::vector<double>{0.25});
    CHECK(gaussian_mle_sigma({1, 4}) == std::vector<double>{1, 4});
    CHECK(gaussian_log_likelihood({1}, {1}) == -1.0);
    CHECK(gaussian_log_likelihood({1}, {2}) == doctest::Approx(-0.5 - std::log(2.0)));
    CHECK(gaussian_log_likelihood({1}, {1}) > gaussian_log_likelihood({1}, {2}));
    CHECK(gaussian_log_likelihood({0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(-2.0 - 2.0 * std::log(0.5)));
    CHECK_THROWS_AS(gaussian_log_likelihood({1}, {0}), std::domain_error);
    CHECK_THROWS_AS(gaussian_mle_sigma({0}), std::domain_error);

    // coarse grid around 0.7
    double best = 0.0, best_val = -INFINITY;
    for (int k = 1; k <= 20000; ++k) {
        const double s = k * 1e-4;
        const double v = gaussian_log_likelihood({0.7}, {s});
        if (v > best_val) {
            best_val = v;
            best = s;
        }
    }
    CHECK(best == doctest::Approx(0.7).epsilon(1e-3));
}

TEST_CASE("gaussian argmax by golden section, per head") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const auto l = random_losses(rng, 1 + trial % 5);
        const auto mle = gaussian_mle_sigma(l);
        for (std::size_t i = 0; i < l.size(); ++i) {
            auto f = [&](double s) {
                std::vector<double> sig(mle.begin(), mle.end());
                sig[i] = s;
                return gaussian_log_likelihood(l, sig);
            };
            // maximise over log sigma^2 so the search is well conditioned at every scale
            const double t = golden_max([&](double u) { return f(std::exp(u)); }, std::log(l[i]) - 5.0,
                                        std::log(l[i]) + 5.0, 1e-14);
            CHECK(std::abs(std::exp(t) - mle[i]) <= 1e-6 * std::max(1.0, mle[i]));
        }
    }
}
