#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "anytime/experiment.hpp"

using namespace anytime;
using namespace anytime::experiment;
using nlohmann::json;

namespace {

json tiny_json() {
    return json::parse(R"({
        "datasets": [{"kind": "spirals", "n": 60, "validation_size": 30}],
        "network": {"depth": 4, "width": 6},
        "schemes": ["const", "adaloss"],
        "train": {"epochs": 2, "batch_size": 16, "learning_rate": 0.05},
        "seeds": [1, 2],
        "opt_epoch_factor": 1
    })");
}

}  // namespace

TEST_CASE("config parsing fills defaults and overrides") {
    const auto cfg = parse_experiment_config(tiny_json());
    CHECK(cfg.depth == 4);
    CHECK(cfg.width == 6);
    CHECK(cfg.residual);
    CHECK(cfg.schemes == std::vector<WeightScheme>{WeightScheme::Const, WeightScheme::AdaLoss});
    CHECK(cfg.train.epochs == 2);
    CHECK(cfg.train.momentum == 0.9);
    REQUIRE(cfg.datasets.size() == 1);
    CHECK(cfg.datasets[0].name == "spirals");
    CHECK(std::get<SyntheticSpec>(cfg.datasets[0].source).n == 60);

    const auto defaults = parse_experiment_config(json::object());
    CHECK(defaults.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    CHECK(defaults.depth == 8);
    CHECK(defaults.opt_epoch_factor == 3);

    // resolved config survives a round trip
    const auto again = parse_experiment_config(json::parse(to_json(cfg).dump()));
    CHECK(to_json(again) == to_json(cfg));

    const auto shorthand = parse_experiment_config(json::parse(R"({"datasets": ["blobs", "concentric"]})"));
    CHECK(shorthand.datasets[0].name == "blobs");
    CHECK(shorthand.datasets[1].name == "concentric");
}

TEST_CASE("config errors") {
    const auto fails = [](const char* text, const char* fragment) {
        CAPTURE(text);
        CHECK_THROWS_WITH_AS(parse_experiment_config(json::parse(text)), doctest::Contains(fragment), ConfigError);
    };
    fails(R"({"bogus": 1})", "bogus");
    fails(R"({"schemes": []})", "at least one weight scheme");
    fails(R"({"schemes": ["opt"]})", "OPT");
    fails(R"({"schemes": ["const", "const"]})", "distinct");
    fails(R"({"schemes": ["fancy"]})", "schemes");
    fails(R"({"seeds": []})", "at least one seed");
    fails(R"({"seeds": [-1]})", "seeds");
    fails(R"({"network": {"depth": "eight"}})", "network.depth");
    fails(R"({"network": {"depth": 1}, "schemes": ["linear"]})", "depth >= 2");
    fails(R"({"network": {"loss": "hinge"}})", "network.loss");
    fails(R"({"train": {"epochs": 2.5}})", "train.epochs");
    fails(R"({"adaloss": {"decay": 1.0}})", "decay");
    fails(R"({"datasets": [{"kind": "spirals", "n": 3}]})", "datasets[0]");
    fails(R"({"datasets": [{"kind": "idx"}]})", "train_images");
    fails(R"({"datasets": ["blobs", "blobs"]})", "duplicate");
    fails(R"({"opt_epoch_factor": 0})", "opt_epoch_factor");
    fails(R"([1, 2])", "object");
}

TEST_CASE("fraction heads") {
    CHECK(fraction_head(0.25, 8) == 2);
    CHECK(fraction_head(0.5, 8) == 4);
    CHECK(fraction_head(0.75, 8) == 6);
    CHECK(fraction_head(1.0, 8) == 8);
    CHECK(fraction_head(0.25, 1) == 1);
    CHECK(fraction_head(0.25, 5) == 2);
    CHECK(fraction_head(0.75, 4) == 3);
    CHECK_THROWS_AS(fraction_head(0.0, 8), std::invalid_argument);
    for (std::size_t L = 1; L <= 64; ++L)
        for (double f : kFractions) {
            const auto h = fraction_head(f, L);
            CHECK(h >= 1);
            CHECK(h <= L);
            CHECK(static_cast<double>(h) >= f * static_cast<double>(L) - 1e-9);
            CHECK(static_cast<double>(h) < f * static_cast<double>(L) + 1.0);
        }
}

TEST_CASE("final third share") {
    const std::vector<double> ones(6, 1.0);
    CHECK(final_third_share(ones) == doctest::Approx(1.0 / 3.0));
    const std::vector<double> w{1, 1, 1, 1, 1, 1, 1, 1};  // last 3 of 8
    CHECK(final_third_share(w) == doctest::Approx(3.0 / 8.0));
    const std::vector<double> tail{0, 0, 2};
    CHECK(final_third_share(tail) == 1.0);
    CHECK_THROWS_AS(final_third_share(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("scheme comparison on a tiny problem") {
    const auto cfg = parse_experiment_config(tiny_json());
    const auto rep = run_scheme_comparison(cfg);
    CHECK(rep.dataset == "spirals");
    CHECK(rep.fraction_heads == std::vector<std::size_t>{1, 2, 3, 4});
    CHECK(rep.runs.size() == 4);
    CHECK(rep.baselines.size() == 8);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].scheme == "opt");
    for (const auto& s : rep.rows[0].train_loss) {
        CHECK(s.mean == 0.0);
        CHECK(s.per_seed == std::vector<double>{0.0, 0.0});
    }
    for (const auto& s : rep.rows[0].validation_error) CHECK(s.mean == 0.0);

    // relative increases recomputed from the raw runs
    const auto& ada = row_for(rep, "ADALOSS");
    for (std::size_t f = 0; f < 4; ++f) {
        const std::size_t h = rep.fraction_heads[f];
        for (std::size_t s = 0; s < 2; ++s) {
            const auto& run = rep.runs[2 + s];
            const auto& opt = rep.baselines[(h - 1) * 2 + s];
            CHECK(opt.scheme == "opt@" + std::to_string(h));
            CHECK(run.seed == opt.seed);
            const double expected = 100.0 * (run.train_losses[h - 1] - opt.train_losses[h - 1]) / opt.train_losses[h - 1];
            CHECK(ada.train_loss[f].per_seed[s] == doctest::Approx(expected).epsilon(1e-12));
        }
        const auto& v = ada.train_loss[f].per_seed;
        const double mean = (v[0] + v[1]) / 2.0;
        CHECK(ada.train_loss[f].mean == doctest::Approx(mean));
        CHECK(ada.train_loss[f].stddev == doctest::Approx(std::abs(v[0] - v[1]) / std::sqrt(2.0)));
    }
    CHECK_THROWS_AS(row_for(rep, "LINEAR"), std::out_of_range);

    const auto doc = make_document(cfg, rep);
    CHECK(doc.json["schema_version"] == report::kSchemaVersion);
    CHECK(doc.json["command"] == "compare-schemes");
    CHECK(doc.json["config"]["network"]["depth"] == 4);
    CHECK(doc.json.contains("opt_baseline"));
    CHECK(doc.table.rows.size() == 3 * 2 * 4);

    // determinism
    const auto again = make_document(cfg, run_scheme_comparison(cfg));
    CHECK(again.json.dump() == doc.json.dump());
    CHECK(again.table == doc.table);
}

TEST_CASE("weight evolution") {
    auto j = tiny_json();
    j["datasets"] = json::parse(R"([{"kind": "blobs", "n": 60, "validation_size": 20},
                                    {"kind": "spirals", "n": 60, "validation_size": 20}])");
    auto cfg = parse_experiment_config(j);
    const auto rep = run_weight_evolution(cfg);
    CHECK(rep.final_third_heads == 2);
    REQUIRE(rep.entries.size() == 4);
    CHECK(rep.entries[0].dataset == "blobs");
    CHECK(rep.entries[3].dataset == "spirals");
    for (const auto& e : rep.entries) {
        REQUIRE(e.weights.size() == 4);
        for (double w : e.weights) CHECK(w > 0.0);
        CHECK(*std::max_element(e.weights.begin(), e.weights.end()) <= 1.0 + 1e-12);
        CHECK(e.final_third_share == doctest::Approx(final_third_share(e.weights)));
    }
    const double m = mean_final_third_share(rep, "blobs");
    CHECK(m == doctest::Approx((rep.entries[0].final_third_share + rep.entries[1].final_third_share) / 2));
    CHECK(std::isnan(mean_final_third_share(rep, "mnist")));

    const auto doc = make_document(cfg, rep);
    REQUIRE(doc.table.rows.size() == 4);
    CHECK(doc.table.header.size() == 4 + 4);
    const auto& first = doc.json["datasets"][0]["runs"][0];
    const auto ws = first["weights"].get<std::vector<double>>();
    CHECK(first["weight_sum"].get<double>() == doctest::Approx(std::accumulate(ws.begin(), ws.end(), 0.0)));

    // gamma 1 turns AdaLoss into CONST
    cfg.adaloss.mix.gamma = 1.0;
    cfg.datasets.resize(1);
    for (const auto& e : run_weight_evolution(cfg).entries)
        for (double w : e.weights) CHECK(w == 1.0);
}

TEST_CASE("single training run") {
    auto j = tiny_json();
    j["schemes"] = json::array({"half_end"});
    j["seeds"] = json::array({7u});
    const auto path = std::filesystem::temp_directory_path() / "anytime_experiment_ckpt.json";
    j["checkpoint"] = path.string();
    const auto cfg = parse_experiment_config(j);
    const auto run = run_training(cfg);
    CHECK(run.scheme == "HALF_END");
    CHECK(run.seed == 7);
    CHECK(run.result.epoch_losses.size() == 2);
    CHECK(load_checkpoint(path).parameters() == run.result.net.parameters());
    std::filesystem::remove(path);
    const auto doc = make_document(cfg, run);
    CHECK(doc.json["command"] == "train");
    CHECK(doc.table.rows.size() == 2);
    CHECK(doc.table.header.back() == "loss4");
}

TEST_CASE("eann verification") {
    EannVerifyConfig cfg;
    cfg.bases = {2.0, 10.0};
    cfg.samples = 100000;
    const auto rep = run_eann_verification(cfg);
    REQUIRE(rep.bases.size() == 2);
    CHECK(rep.all_passed());
    for (const auto& b : rep.bases) {
        CHECK(b.checks.size() == 7);
        for (const auto& c : b.checks) {
            CAPTURE(c.name);
            CAPTURE(c.observed);
            CAPTURE(c.bound);
            CHECK(c.passed);
        }
    }

    cfg.sup_tolerance = 0.0;
    cfg.samples = 50;
    CHECK_FALSE(run_eann_verification(cfg).all_passed());

    const auto doc = make_document(cfg, rep);
    CHECK(doc.json["command"] == "eann-verify");
    CHECK(doc.json["config"]["bases"].size() == 2);
    CHECK(doc.table.rows.size() == 14);

    CHECK_THROWS_AS(parse_eann_verify_config(json::parse(R"({"bases": [1.0]})")), ConfigError);
    CHECK_THROWS_AS(parse_eann_verify_config(json::parse(R"({"bases": []})")), ConfigError);
    CHECK_THROWS_AS(parse_eann_verify_config(json::parse(R"({"sampler": "sobol"})")), ConfigError);
    CHECK(parse_eann_verify_config(json::parse(R"({"workers": 2, "sampler": "iid"})")).workers == 2);
}

TEST_CASE("eann simulation document") {
    const auto cfg = parse_eann_simulate_config(json::parse(R"({"base": 2, "members": 6, "samples": 2000,
                                                              "record_limit": 10, "kind": "plain"})"));
    CHECK(cfg.options.kind == eann::EnsembleKind::Plain);
    const auto rep = eann::simulate_inflation(cfg.spec, cfg.options);
    const auto doc = make_document(cfg, rep);
    CHECK(doc.json["config"]["kind"] == "plain");
    CHECK(doc.json["records"].size() == 10);
    CHECK(doc.table.rows.size() == 10);
    CHECK(doc.json["gated_outputs"]["candidates"] == 63);
    CHECK(doc.json["gated_outputs"]["published"].size() == 32);

    const auto big = parse_eann_simulate_config(json::parse(R"({"base": 10, "members": 12, "samples": 100})"));
    const auto big_doc = make_document(big, eann::simulate_inflation(big.spec, big.options));
    CHECK(big_doc.json["gated_outputs"].contains("skipped"));

    CHECK_THROWS_AS(parse_eann_simulate_config(json::parse(R"({"kind": "other"})")), ConfigError);
    CHECK_THROWS_AS(parse_eann_simulate_config(json::parse(R"({"members": 1})")), ConfigError);
    CHECK_THROWS_AS(parse_eann_simulate_config(json::parse(R"({"quality_tau": 0})")), ConfigError);
}
