#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "airisk/types.hpp"

namespace airisk::engine {

/// Simulated annual losses, one per trial, with the provenance needed to replay them.
struct TrialSet {
    std::vector<double> losses;
    std::size_t n_trials{0};
    std::uint64_t seed{0};
    std::vector<std::string> scenario_ids;
    /// Sum over all trials of the loss attributed to each category.
    std::map<LossCategory, double> category_totals;

    bool operator==(const TrialSet&) const = default;
};

struct ExceedancePoint {
    double threshold{0.0};
    double probability{0.0};  // P(annual loss > threshold)

    bool operator==(const ExceedancePoint&) const = default;
};

struct RiskMetrics {
    std::size_t n_trials{0};
    double eal{0.0};
    std::map<double, double> var;
    std::map<double, double> tvar;
    std::vector<ExceedancePoint> exceedance_curve;
    double zero_loss_probability{0.0};
    std::map<LossCategory, double> per_category_eal;

    bool operator==(const RiskMetrics&) const = default;
};

inline constexpr std::size_t kExceedanceGridPoints = 200;
inline constexpr std::size_t kTrialBlockSize = 8192;

struct SimulationOptions {
    /// Worker threads; 0 picks the hardware concurrency. Results never depend on it.
    std::size_t threads{0};
    /// Checked before each trial block; once passed, simulation throws DeadlineExceeded.
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Compound frequency/severity simulation of one scenario. The scenario's attached
/// controls are applied first. Each trial draws its count from a stream keyed by
/// (seed, trial) and each event's per-category severities from a stream keyed by
/// (seed, trial, event), so output is a pure function of (scenario, n_trials, seed).
/// Throws InvalidTrialCount when n_trials == 0.
TrialSet simulate_scenario(const RiskScenario& scenario, std::size_t n_trials, std::uint64_t seed,
                           const SimulationOptions& options = {});

/// Element-wise sum across independently simulated scenarios.
/// Throws EmptyPortfolio for an empty list and TrialCountMismatch for unequal lengths.
TrialSet aggregate(std::span<const TrialSet> portfolio);

/// EAL, ceiling-order-statistic VaR, TVaR, the exceedance curve and per-category EAL.
/// Throws InvalidConfidence for alpha outside (0,1), InvalidTrialCount for an empty set.
RiskMetrics metrics(const TrialSet& trials, std::span<const double> confidences);

/// 1-based index ceil(alpha * n) used for VaR, clamped to [1, n]. Products within
/// 1e-9 of an integer are treated as that integer.
std::size_t var_rank(double alpha, std::size_t n);

/// CSV export: comment header lines with seed and scenario ids, a "loss" column,
/// one value per line in shortest round-trip form.
void write_csv(const TrialSet& trials, std::ostream& out);
std::string to_csv(const TrialSet& trials);

}  // namespace airisk::engine
