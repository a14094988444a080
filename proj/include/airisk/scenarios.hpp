#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "airisk/engine.hpp"
#include "airisk/types.hpp"

namespace airisk::scenarios {

inline constexpr const char* kPortfolioSchemaVersion = "1.0";
inline constexpr const char* kPortfolioExtension = ".portfolio.json";
inline const std::vector<double> kDefaultConfidences{0.50, 0.90, 0.95, 0.99};
inline constexpr double kDefaultReserveConfidence = 0.95;

/// Every violation in one scenario: unknown sub-threat, loss categories outside the
/// domain mapping, model parameter bounds, control factors and applicability.
/// Findings are returned, never thrown. `path` prefixes each finding's location.
std::vector<Finding> validate_scenario(const RiskScenario& scenario,
                                       const taxonomy::TaxonomyRegistry& registry,
                                       const std::string& path = "");

/// Scenario findings plus portfolio-level checks (unique ids, single currency,
/// non-empty, taxonomy version pin; a version mismatch is a warning).
std::vector<Finding> validate_portfolio(const Portfolio& portfolio,
                                        const taxonomy::TaxonomyRegistry& registry);

struct ScenarioResult {
    std::string scenario_id;
    std::uint64_t seed{0};
    engine::TrialSet trials;
    engine::RiskMetrics metrics;
};

struct Reserve {
    double confidence{kDefaultReserveConfidence};
    double amount{0.0};
};

struct WorkflowResult {
    std::string portfolio_id;
    std::string taxonomy_version;
    std::uint64_t seed{0};
    std::size_t n_trials{0};
    std::vector<double> confidences;
    std::vector<ScenarioResult> scenarios;  // portfolio order
    engine::TrialSet portfolio_trials;
    engine::RiskMetrics portfolio_metrics;
    Reserve reserve;
};

struct WorkflowOptions {
    std::size_t n_trials{100000};
    std::uint64_t seed{42};
    std::vector<double> confidences{kDefaultConfidences};
    /// Unset: 0.95 with the default confidence set, otherwise the highest requested.
    std::optional<double> reserve_confidence;
    engine::SimulationOptions simulation{};
};

/// Seed for one scenario: depends on the master seed and the scenario id only.
std::uint64_t scenario_seed(std::uint64_t master_seed, const std::string& scenario_id);

/// Simulates every scenario (attached controls applied), aggregates them and sets
/// the reserve to portfolio VaR at the reserve confidence.
/// Throws ValidationFailed when the portfolio has error-level findings.
WorkflowResult run_workflow(const Portfolio& portfolio, const taxonomy::TaxonomyRegistry& registry,
                            const WorkflowOptions& options = {});

/// Metrics as JSON; probabilities keyed by their shortest decimal form ("0.95").
nlohmann::json to_json(const engine::RiskMetrics& metrics, bool include_curve = true);
/// Per-scenario and portfolio metrics plus the reserve and the reproduction seed.
nlohmann::json to_json(const WorkflowResult& result, bool include_curve = true);

// Persistence -----------------------------------------------------------------

nlohmann::json to_json(const Control& control);
nlohmann::json to_json(const RiskScenario& scenario);
nlohmann::json to_json(const Portfolio& portfolio);
Control control_from_json(const nlohmann::json& j, const std::string& path = "");
RiskScenario scenario_from_json(const nlohmann::json& j, const std::string& path = "");
/// Strict parse; unknown fields are a SchemaError.
Portfolio portfolio_from_json(const nlohmann::json& j);

struct LoadedPortfolio {
    Portfolio portfolio;
    std::vector<Finding> warnings;
};

/// Throws SchemaError. When `registry_version` is given and differs from the
/// document's pin, the load still succeeds and a warning finding is recorded.
LoadedPortfolio load_portfolio(std::istream& in,
                               const std::optional<std::string>& registry_version = std::nullopt);
LoadedPortfolio load_portfolio(const std::filesystem::path& path,
                               const std::optional<std::string>& registry_version = std::nullopt);

void save_portfolio(const Portfolio& portfolio, std::ostream& out);
/// Writes to a sibling temporary file, then renames over `path`.
void save_portfolio(const Portfolio& portfolio, const std::filesystem::path& path);

}  // namespace airisk::scenarios
