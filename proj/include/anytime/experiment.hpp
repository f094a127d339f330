#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "anytime/dataset.hpp"
#include "anytime/eann.hpp"
#include "anytime/loss_weights.hpp"
#include "anytime/network.hpp"
#include "anytime/report_io.hpp"
#include "anytime/training.hpp"

namespace anytime::experiment {

/// Malformed or inconsistent configuration. The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IdxSource {
    std::filesystem::path train_images;
    std::filesystem::path train_labels;
    /// Optional; without them the last `validation_fraction` of the training
    /// file is held out.
    std::filesystem::path validation_images;
    std::filesystem::path validation_labels;
    double validation_fraction = 0.2;
};

struct DatasetSpec {
    std::string name;
    std::variant<SyntheticSpec, IdxSource> source;
    /// Synthetic only: size of the held-out set, drawn with a derived seed.
    std::size_t validation_size = 1000;
};

struct Split {
    std::string name;
    Dataset train;
    Dataset validation;
};

Split load_split(const DatasetSpec& spec);

DatasetSpec spirals_dataset();
/// Heavily overlapping blobs: every head reaches about the same loss.
DatasetSpec blobs_dataset();

struct ExperimentConfig {
    std::vector<DatasetSpec> datasets{spirals_dataset()};
    std::size_t depth = 8;
    std::size_t width = 24;
    bool residual = true;
    LossKind loss = LossKind::CrossEntropy;
    std::vector<WeightScheme> schemes{WeightScheme::Const, WeightScheme::AdaLoss};
    AdaLossSource adaloss{};
    TrainConfig train = default_train_config();
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    /// OPT baselines train for this many times train.epochs (stand-in for
    /// "to convergence"); learning-rate drops scale along.
    std::size_t opt_epoch_factor = 3;
    /// `train` subcommand only.
    std::optional<std::filesystem::path> checkpoint;

    static TrainConfig default_train_config();
};

/// Throws ConfigError.
void validate(const ExperimentConfig& cfg);

/// Overlays `j` on `base`. Unknown keys, wrong types and invalid values are
/// ConfigErrors.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, ExperimentConfig base = {});
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

inline constexpr double kFractions[] = {0.25, 0.5, 0.75, 1.0};

/// ceil(fraction * depth), 1-based.
std::size_t fraction_head(double fraction, std::size_t depth);

NetworkShape network_shape(const ExperimentConfig& cfg, const Split& split);
SchemeSource scheme_source(const ExperimentConfig& cfg, WeightScheme scheme);

struct RunRecord {
    std::string scheme;  // "opt@<head>" for baselines
    std::uint64_t seed = 0;
    bool diverged = false;
    std::string error;
    LossVector train_losses;
    LossVector validation_losses;
    std::vector<double> validation_errors;
    std::vector<double> final_weights;
};

struct RelativeStat {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> per_seed;
};

struct FractionRow {
    std::string scheme;  // "opt" or a weight scheme name
    std::vector<RelativeStat> train_loss;        // one per fraction
    std::vector<RelativeStat> validation_error;  // one per fraction
};

struct ComparisonReport {
    std::string dataset;
    std::vector<std::size_t> fraction_heads;
    std::vector<RunRecord> runs;       // schemes, seed-major within scheme
    std::vector<RunRecord> baselines;  // OPT, one per (fraction head, seed)
    std::vector<FractionRow> rows;     // "opt" first, then cfg.schemes order
    std::vector<std::string> exclusions;
};

/// OPT baselines at every fraction head and one multi-head net per scheme and
/// seed on cfg.datasets[0]. Relative increase is 100 (x - x_opt) / x_opt per
/// seed, then averaged; validation errors use max(x_opt, 0.5 / n_val) as the
/// denominator so a perfect baseline does not divide by zero. Diverged runs
/// are excluded and listed. Runs execute in parallel.
ComparisonReport run_scheme_comparison(const ExperimentConfig& cfg);

const FractionRow& row_for(const ComparisonReport& report, std::string_view scheme);

struct EvolutionEntry {
    std::string dataset;
    std::uint64_t seed = 0;
    bool diverged = false;
    std::string error;
    std::vector<double> weights;
    double final_third_share = 0.0;
};

struct EvolutionReport {
    std::size_t final_third_heads = 0;
    std::vector<EvolutionEntry> entries;  // dataset-major
    std::vector<std::string> exclusions;
};

/// Share of the total weight on the last ceil(L/3) heads.
double final_third_share(std::span<const double> weights);

/// Identical AdaLoss nets (same init per seed) on every dataset.
EvolutionReport run_weight_evolution(const ExperimentConfig& cfg);

/// Mean final-third share over the non-diverged seeds of `dataset`.
double mean_final_third_share(const EvolutionReport& report, std::string_view dataset);

struct TrainingRun {
    std::string dataset;
    std::string scheme;
    std::uint64_t seed = 0;
    TrainResult result;
    HeadEvaluation train_eval;
    HeadEvaluation validation_eval;
};

/// One net: first dataset, first scheme, first seed. Saves a checkpoint if
/// configured. DivergenceError propagates.
TrainingRun run_training(const ExperimentConfig& cfg);

struct EannVerifyConfig {
    std::vector<double> bases{1.5, 2.0, 3.0, 4.0};
    std::size_t member_count = 12;
    std::size_t workers = 1;
    std::size_t samples = 1'000'000;
    eann::BudgetSampler sampler = eann::BudgetSampler::Stratified;
    std::uint64_t seed = 0;
    /// Relative tolerance for empirical sup C against its formula.
    double sup_tolerance = 0.01;
};

void validate(const EannVerifyConfig& cfg);
EannVerifyConfig parse_eann_verify_config(const nlohmann::json& j, EannVerifyConfig base = {});
nlohmann::ordered_json to_json(const EannVerifyConfig& cfg);

struct BoundCheck {
    std::string name;
    double observed = 0.0;
    double bound = 0.0;
    bool passed = false;
};

struct BaseVerification {
    double base = 0.0;
    double effective_base = 0.0;
    eann::InflationReport anytime;
    eann::InflationReport plain;
    std::vector<BoundCheck> checks;
};

struct VerificationReport {
    std::vector<BaseVerification> bases;
    bool all_passed() const;
};

/// Per base: empirical sup within tolerance of 2 + 1/(b-1) and never above
/// it, empirical mean <= the E[C] bound, anytime bounds below the linear
/// ensemble's, and the simulated plain sequence within its own formulas.
/// Bounds use the effective base b^workers.
VerificationReport run_eann_verification(const EannVerifyConfig& cfg);

struct EannSimulateConfig {
    eann::EannSpec spec{};
    eann::SimulationOptions options{.samples = 100'000, .record_limit = 1000};
    double quality_tau = 4.0;
};

void validate(const EannSimulateConfig& cfg);
EannSimulateConfig parse_eann_simulate_config(const nlohmann::json& j, EannSimulateConfig base = {});
nlohmann::ordered_json to_json(const EannSimulateConfig& cfg);

/// Reports: JSON document (schema version, resolved config, results) plus
/// the CSV table for the same results.
struct Document {
    nlohmann::ordered_json json;
    report::Table table;
};

Document make_document(const ExperimentConfig& cfg, const ComparisonReport& report);
Document make_document(const ExperimentConfig& cfg, const EvolutionReport& report);
Document make_document(const ExperimentConfig& cfg, const TrainingRun& run);
Document make_document(const EannVerifyConfig& cfg, const VerificationReport& report);
Document make_document(const EannSimulateConfig& cfg, const eann::InflationReport& report);

}  // namespace anytime::experiment
