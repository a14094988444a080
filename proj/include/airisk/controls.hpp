#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "airisk/types.hpp"

namespace airisk::engine {
struct SimulationOptions;
}

namespace airisk::controls {

/// Marginal value of one control on one scenario.
struct ControlEvaluation {
    std::string control_id;
    double ale_before{0.0};
    double ale_after{0.0};
    double annual_cost{0.0};
    /// (ale_before - ale_after - annual_cost) / annual_cost; nullopt when the cost is zero.
    std::optional<double> rosi;
    double net_benefit{0.0};  // ale_before - ale_after - annual_cost
};

/// Combined surviving fraction prod(1 - r_i). Factors are multiplied in sorted order,
/// so the result is bit-identical for any permutation of the inputs.
double surviving_fraction(std::span<const double> reductions);

/// Scales the scenario's models by `controls` without checking applicability.
/// The scenario's own attached control list is left untouched.
RiskScenario adjust(const RiskScenario& scenario, std::span<const Control> controls);

/// The scenario with its attached controls baked into the models and the control list cleared.
RiskScenario effective(const RiskScenario& scenario);

/// Applies `controls` (multiplicative stacking) to a copy of the scenario.
/// Throws InapplicableControl if a control excludes the scenario's domain.
RiskScenario apply(std::span<const Control> controls, const RiskScenario& scenario,
                   const taxonomy::TaxonomyRegistry& registry);

/// Before/after annual loss with common random numbers. "Before" is the scenario
/// without this control (removed by id if attached); "after" adds it. The scenario's
/// other attached controls stay in effect in both runs.
ControlEvaluation evaluate(const Control& control, const RiskScenario& scenario,
                           std::size_t n_trials, std::uint64_t seed);
ControlEvaluation evaluate(const Control& control, const RiskScenario& scenario,
                           std::size_t n_trials, std::uint64_t seed,
                           const engine::SimulationOptions& options);

/// Net benefit descending, then annual cost ascending, then id.
std::vector<ControlEvaluation> rank(std::span<const Control> controls, const RiskScenario& scenario,
                                    std::size_t n_trials, std::uint64_t seed);
std::vector<ControlEvaluation> rank(std::span<const Control> controls, const RiskScenario& scenario,
                                    std::size_t n_trials, std::uint64_t seed,
                                    const engine::SimulationOptions& options);

/// Orders evaluations by the ranking rule (exposed for callers that evaluate themselves).
void sort_ranked(std::vector<ControlEvaluation>& evaluations);

}  // namespace airisk::controls
