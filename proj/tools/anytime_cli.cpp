// Command-line front end: training, weight-scheme studies and EANN bound checks.
//
// Exit codes: 0 success, 1 configuration or input error, 2 bound-check failure.

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "anytime/experiment.hpp"
#include "anytime/report_io.hpp"

namespace ex = anytime::experiment;
namespace report = anytime::report;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitBound = 2;

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "json";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Base seed (experiments use seed, seed+1, ...)");
    cmd->add_option("--out", o.out, "Report path (default: stdout)");
    cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
}

nlohmann::json read_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw ex::ConfigError("cannot open config " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ex::ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
}

void apply_seed(ex::ExperimentConfig& cfg, const CommonOptions& o) {
    if (!o.seed) return;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) cfg.seeds[i] = *o.seed + i;
}

void emit(const ex::Document& doc, const CommonOptions& o) {
    const auto format = report::parse_report_format(o.format);
    if (!o.out.empty()) {
        report::emit_report(doc.json, doc.table, format, o.out);
        return;
    }
    if (format == report::ReportFormat::Json)
        std::cout << doc.json.dump(2) << '\n';
    else
        std::cout << report::to_csv(doc.table);
}

int run_train(const CommonOptions& o) {
    ex::ExperimentConfig base;
    base.schemes = {anytime::WeightScheme::AdaLoss};
    base.seeds = {1};
    auto cfg = ex::parse_experiment_config(read_config(o.config), base);
    apply_seed(cfg, o);
    const auto run = ex::run_training(cfg);
    std::cerr << "train: " << run.scheme << " on " << run.dataset << ", seed " << run.seed << ", final loss "
              << run.train_eval.losses.back() << '\n';
    emit(ex::make_document(cfg, run), o);
    return kExitOk;
}

int run_compare(const CommonOptions& o) {
    auto cfg = ex::parse_experiment_config(read_config(o.config));
    apply_seed(cfg, o);
    const auto rep = ex::run_scheme_comparison(cfg);
    std::cerr << "compare-schemes: " << rep.runs.size() << " runs, " << rep.baselines.size() << " baselines, "
              << rep.exclusions.size() << " excluded\n";
    emit(ex::make_document(cfg, rep), o);
    return kExitOk;
}

int run_evolution(const CommonOptions& o) {
    ex::ExperimentConfig base;
    base.datasets = {ex::blobs_dataset(), ex::spirals_dataset()};
    auto cfg = ex::parse_experiment_config(read_config(o.config), base);
    apply_seed(cfg, o);
    const auto rep = ex::run_weight_evolution(cfg);
    for (const auto& d : cfg.datasets)
        std::cerr << "weight-evolution: " << d.name << " final-third share "
                  << ex::mean_final_third_share(rep, d.name) << '\n';
    emit(ex::make_document(cfg, rep), o);
    return kExitOk;
}

int run_verify(const CommonOptions& o) {
    auto cfg = ex::parse_eann_verify_config(read_config(o.config));
    if (o.seed) cfg.seed = *o.seed;
    const auto rep = ex::run_eann_verification(cfg);
    for (const auto& b : rep.bases)
        for (const auto& c : b.checks)
            if (!c.passed)
                std::cerr << "eann-verify: b=" << b.base << " " << c.name << " failed (observed " << c.observed
                          << ", bound " << c.bound << ")\n";
    emit(ex::make_document(cfg, rep), o);
    return rep.all_passed() ? kExitOk : kExitBound;
}

int run_simulate(const CommonOptions& o) {
    auto cfg = ex::parse_eann_simulate_config(read_config(o.config));
    if (o.seed) cfg.options.seed = *o.seed;
    const auto rep = anytime::eann::simulate_inflation(cfg.spec, cfg.options);
    emit(ex::make_document(cfg, rep), o);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anytime neural networks: adaptive loss weights and exponential ensembles"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::function<int(const CommonOptions&)> action;
    auto add = [&](const char* name, const char* help, int (*fn)(const CommonOptions&)) {
        auto* cmd = app.add_subcommand(name, help);
        add_common(cmd, opts);
        cmd->callback([&action, fn] { action = fn; });
    };
    add("train", "Train one anytime network and report per-epoch losses", run_train);
    add("compare-schemes", "Relative increase over OPT baselines for each weight scheme", run_compare);
    add("weight-evolution", "Final AdaLoss weights on each dataset", run_evolution);
    add("eann-verify", "Check simulated cost inflation against its bounds", run_verify);
    add("eann-simulate", "Simulate cost inflation for one ensemble", run_simulate);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        return action(opts);
    } catch (const ex::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
