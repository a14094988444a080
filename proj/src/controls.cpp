#include "airisk/controls.hpp"

#include <algorithm>
#include <tuple>

#include <fmt/format.h>

#include "airisk/engine.hpp"

namespace airisk::controls {

double surviving_fraction(std::span<const double> reductions) {
    std::vector<double> factors;
    factors.reserve(reductions.size());
    for (double r : reductions) factors.push_back(1.0 - r);
    std::sort(factors.begin(), factors.end());
    double product = 1.0;
    for (double f : factors) product *= f;
    return product;
}

RiskScenario adjust(const RiskScenario& scenario, std::span<const Control> controls) {
    std::vector<double> freq, mag;
    for (const auto& c : controls) {
        freq.push_back(c.frequency_reduction);
        mag.push_back(c.magnitude_reduction);
    }
    const double freq_factor = surviving_fraction(freq);
    const double mag_factor = surviving_fraction(mag);

    RiskScenario out = scenario;
    out.frequency = calibration::scale_frequency(scenario.frequency, freq_factor);
    for (auto& [cat, model] : out.severities) model = calibration::scale_severity(model, mag_factor);
    return out;
}

RiskScenario effective(const RiskScenario& scenario) {
    RiskScenario out = adjust(scenario, scenario.controls);
    out.controls.clear();
    return out;
}

RiskScenario apply(std::span<const Control> controls, const RiskScenario& scenario,
                   const taxonomy::TaxonomyRegistry& registry) {
    const auto& domain = registry.domain_of(scenario.sub_threat_id);
    for (const auto& c : controls)
        if (!c.applicable_domains.empty() && !c.applicable_domains.count(domain.id))
            throw InapplicableControl(fmt::format("control '{}' does not apply to domain '{}'", c.id,
                                                  domain.id));
    return adjust(scenario, controls);
}

ControlEvaluation evaluate(const Control& control, const RiskScenario& scenario,
                           std::size_t n_trials, std::uint64_t seed) {
    return evaluate(control, scenario, n_trials, seed, engine::SimulationOptions{});
}

ControlEvaluation evaluate(const Control& control, const RiskScenario& scenario,
                           std::size_t n_trials, std::uint64_t seed,
                           const engine::SimulationOptions& options) {
    RiskScenario before = scenario;
    std::erase_if(before.controls, [&](const Control& c) { return c.id == control.id; });
    RiskScenario after = before;
    after.controls.push_back(control);

    const std::array<double, 1> no_confidence{0.5};
    const auto eal = [&](const RiskScenario& s) {
        return engine::metrics(engine::simulate_scenario(s, n_trials, seed, options), no_confidence).eal;
    };

    ControlEvaluation ev;
    ev.control_id = control.id;
    ev.ale_before = eal(before);
    ev.ale_after = eal(after);
    ev.annual_cost = control.annual_cost;
    ev.net_benefit = ev.ale_before - ev.ale_after - control.annual_cost;
    if (control.annual_cost > 0.0) ev.rosi = ev.net_benefit / control.annual_cost;
    return ev;
}

void sort_ranked(std::vector<ControlEvaluation>& evaluations) {
    std::sort(evaluations.begin(), evaluations.end(),
              [](const ControlEvaluation& a, const ControlEvaluation& b) {
                  return std::tuple(-a.net_benefit, a.annual_cost, a.control_id) <
                         std::tuple(-b.net_benefit, b.annual_cost, b.control_id);
              });
}

std::vector<ControlEvaluation> rank(std::span<const Control> controls, const RiskScenario& scenario,
                                    std::size_t n_trials, std::uint64_t seed) {
    return rank(controls, scenario, n_trials, seed, engine::SimulationOptions{});
}

std::vector<ControlEvaluation> rank(std::span<const Control> controls, const RiskScenario& scenario,
                                    std::size_t n_trials, std::uint64_t seed,
                                    const engine::SimulationOptions& options) {
    std::vector<ControlEvaluation> out;
    out.reserve(controls.size());
    for (const auto& c : controls) out.push_back(evaluate(c, scenario, n_trials, seed, options));
    sort_ranked(out);
    return out;
}

}  // namespace airisk::controls
