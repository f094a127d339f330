#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

// Exponentially deepening ensembles of anytime networks: members of depth
// b^0, b^1, ... run one after another, and each new anytime output is used
// only if it beats everything published so far. Computation is continuous
// (depth is a real number of units).
namespace anytime::eann {

struct EannSpec {
    double base = 2.0;
    std::size_t member_count = 12;
    /// Parallel FIFO workers; the effective base becomes base^workers.
    std::size_t workers = 1;

    double effective_base() const { return std::pow(base, static_cast<double>(workers)); }
    /// Depth of member k (0-based).
    double member_depth(std::size_t k) const { return std::pow(effective_base(), static_cast<double>(k)); }
    /// Summed depth of members 0..n-1, accumulated term by term.
    double completed_cost(std::size_t n) const;
    /// Cost of running all member_count members.
    double total_cost() const { return completed_cost(member_count); }
};

void validate(const EannSpec& spec);

/// Where a budget lands: `member_index` members have completed and the
/// ensemble is at depth `within_member_depth` of member member_index + 1.
struct BudgetPoint {
    double budget = 0.0;
    std::size_t member_index = 0;
    double within_member_depth = 0.0;
};

/// Sequential-execution position for budget B >= 0. The member sequence is
/// treated as unbounded; a budget exactly at a member boundary reports that
/// member as running at full depth.
BudgetPoint locate(const EannSpec& spec, double budget);

/// Depth of the optimal model the current output competes with. With member
/// n+1 at depth z: previous member's depth b^(n-1) while z <= b^(n-1), z otherwise.
double competitive_depth(const EannSpec& spec, const BudgetPoint& point);

/// As above from a raw budget; nullopt before the first member completes (B < 1).
std::optional<double> competitive_depth(const EannSpec& spec, double budget);

/// Cost inflation C = B / x' from first principles.
double inflation(const EannSpec& spec, const BudgetPoint& point);
std::optional<double> inflation(const EannSpec& spec, double budget);

/// Discrete-layer mode: outputs exist only at whole units of depth, so the
/// depth inside the running member is floored before the competitive depth
/// is taken. nullopt before the first member's first output.
std::optional<double> discrete_inflation(const EannSpec& spec, double budget);

/// Closed forms for C at depth z of member n+1 (n >= 1):
/// z <= b^(n-1): z/b^(n-1) + 1 + 1/(b-1) - 1/(b^(n-1)(b-1));
/// otherwise:    1 + (b^n - 1)/(z(b-1)).
double inflation_closed_form(double base, std::size_t n, double z);

/// sup_B C = 2 + 1/(b-1)
double sup_inflation(double base);

/// E[C] <= 1 - 1/(2b) + (1 + ln b)/(b-1)
double expected_inflation_bound(double base);

/// Exponential sequence of ordinary (non-anytime) networks.
struct LinearEnsembleBounds {
    double sup = 0.0;         // b^2/(b-1)
    double mean_limit = 0.0;  // 1.5 + (b-1)/2 + 1/(b-1)
};

LinearEnsembleBounds linear_ensemble_inflation(double base);

/// Cost inflation of the ordinary-network sequence: the output in use is the
/// last completed member's. nullopt before the first member completes.
std::optional<double> plain_inflation(const EannSpec& spec, double budget);

/// Outputs available after `budget` units with one output per unit of depth.
std::uint64_t eann_prediction_count(double budget);

/// Outputs from a sequence of ordinary networks: one per completed member.
std::uint64_t plain_prediction_count(const EannSpec& spec, double budget);

enum class BudgetSampler {
    /// Strata are the case-1 and case-2 pieces of every member, weighted by
    /// their exact length, with jittered evenly spaced budgets inside.
    Stratified,
    IidUniform,
};

enum class EnsembleKind { Anytime, Plain };

std::string_view to_string(BudgetSampler sampler);
BudgetSampler parse_budget_sampler(std::string_view name);

struct SimulationOptions {
    std::size_t samples = 1'000'000;
    BudgetSampler sampler = BudgetSampler::Stratified;
    EnsembleKind kind = EnsembleKind::Anytime;
    std::uint64_t seed = 0;
    /// Number of individual (budget, C) records kept in the report.
    std::size_t record_limit = 0;
};

struct InflationRecord {
    double budget = 0.0;
    std::size_t member = 0;  // 1-based member being computed
    double z = 0.0;
    double x_prime = 0.0;
    double c = 0.0;
};

struct InflationReport {
    double sup_c = 0.0;
    double mean_c = 0.0;
    std::size_t samples = 0;
    std::vector<InflationRecord> per_budget;
};

/// Budgets uniform over [1, total_cost]; C computed per budget via locate ->
/// competitive_depth -> ratio. Sharded across OpenMP threads; shards merge by
/// max and by a fixed-order weighted sum, so results are thread-count independent.
InflationReport simulate_inflation(const EannSpec& spec, const SimulationOptions& options = {});

/// C on `points` evenly spaced budgets in [1, total_cost]; every point recorded.
InflationReport grid_inflation(const EannSpec& spec, std::size_t points, EnsembleKind kind = EnsembleKind::Anytime);

namespace reference {

/// Serial version of eann::simulate_inflation; identical output.
InflationReport simulate_inflation(const EannSpec& spec, const SimulationOptions& options = {});

}  // namespace reference

/// Saturating validation score 1 - exp(-depth / tau). Synthetic stand-in for
/// a measured accuracy-vs-depth profile.
struct QualityCurve {
    double tau = 4.0;
    double operator()(double depth) const { return 1.0 - std::exp(-depth / tau); }
};

template <typename Payload>
struct MemberOutput {
    double cost = 0.0;
    double score = 0.0;
    Payload payload{};
};

/// Outputs that survived validation gating, in cost order.
template <typename Payload>
class GatedSchedule {
public:
    const std::vector<MemberOutput<Payload>>& published() const noexcept { return published_; }
    const std::vector<std::size_t>& published_indices() const noexcept { return indices_; }

    /// Latest published output with cost <= budget, or nullptr.
    const MemberOutput<Payload>* at(double budget) const {
        const MemberOutput<Payload>* best = nullptr;
        for (const auto& o : published_) {
            if (o.cost > budget) break;
            best = &o;
        }
        return best;
    }

private:
    template <typename P>
    friend GatedSchedule<P> gated_anytime_outputs(std::span<const MemberOutput<P>> outputs);

    std::vector<MemberOutput<Payload>> published_;
    std::vector<std::size_t> indices_;
};

/// Publishes an output only if its score strictly exceeds every score
/// published before it. Ties keep the earlier (cheaper) output.
template <typename Payload>
GatedSchedule<Payload> gated_anytime_outputs(std::span<const MemberOutput<Payload>> outputs) {
    GatedSchedule<Payload> schedule;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (i > 0 && !(outputs[i].cost > outputs[i - 1].cost))
            throw std::invalid_argument("gated_anytime_outputs: costs must be strictly increasing");
        if (schedule.published_.empty() ? !std::isnan(outputs[i].score)
                                        : outputs[i].score > schedule.published_.back().score) {
            schedule.published_.push_back(outputs[i]);
            schedule.indices_.push_back(i);
        }
    }
    return schedule;
}

/// Which member produced an output and at what depth inside it.
struct OutputTag {
    std::size_t member = 0;  // 1-based
    double depth = 0.0;
};

/// One output per unit of depth (plus each member's final layer) for every
/// member, scored by `curve` at the output's depth within its member.
std::vector<MemberOutput<OutputTag>> member_outputs(const EannSpec& spec, const QualityCurve& curve);

}  // namespace anytime::eann
