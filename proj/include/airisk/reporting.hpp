#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "airisk/controls.hpp"
#include "airisk/scenarios.hpp"
#include "airisk/taxonomy.hpp"

namespace airisk::reporting {

using Clock = std::function<std::chrono::system_clock::time_point()>;

/// Fixed clock for reproducible output.
Clock fixed_clock(std::chrono::system_clock::time_point t);
/// UTC ISO-8601 with second precision, e.g. 2025-11-17T08:30:00Z.
std::string format_utc(std::chrono::system_clock::time_point t);

/// Metric values as presented: currency rounded to cents, probabilities to 4 places.
struct MetricsSummary {
    double eal{0.0};
    std::map<double, double> var;
    std::map<double, double> tvar;
    double zero_loss_probability{0.0};
    std::map<std::string, double> per_category_eal;  // loss category name -> EAL

    bool operator==(const MetricsSummary&) const = default;
};

struct ControlSummary {
    std::string control_id;
    double ale_before{0.0};
    double ale_after{0.0};
    double annual_cost{0.0};
    double net_benefit{0.0};
    std::optional<double> rosi;

    bool operator==(const ControlSummary&) const = default;
};

struct ScenarioSection {
    std::string scenario_id;
    std::string title;
    std::string domain_id;
    std::string domain_name;
    std::string sub_threat_id;
    std::string sub_threat_name;
    std::string narrative;
    std::string exposure_note;
    std::uint64_t seed{0};
    MetricsSummary metrics;
    std::vector<taxonomy::RegulatoryAnchor> anchors;
    std::vector<ControlSummary> controls;  // ranked

    bool operator==(const ScenarioSection&) const = default;
};

struct ReserveStatement {
    double confidence{0.95};
    double amount{0.0};
    std::uint64_t seed{0};
    std::size_t n_trials{0};

    bool operator==(const ReserveStatement&) const = default;
};

struct ComplianceReport {
    std::string generated_at;
    std::string taxonomy_version;
    std::string portfolio_id;
    std::string currency_code;
    bool eu_high_risk{false};
    std::vector<taxonomy::RegulatoryAnchor> portfolio_anchors;
    MetricsSummary portfolio_metrics;
    ReserveStatement reserve;
    std::vector<ScenarioSection> scenarios;

    bool operator==(const ComplianceReport&) const = default;
};

double round_currency(double v);
double round_probability(double v);
MetricsSummary summarize(const engine::RiskMetrics& metrics);
ControlSummary summarize(const controls::ControlEvaluation& evaluation);

struct ReportOptions {
    /// Rank each scenario's attached controls (re-simulates with the workflow seed).
    bool include_controls{true};
    engine::SimulationOptions simulation{};
};

/// Assembles the report from a completed workflow. Anchors are copied verbatim
/// from the registry; EU portfolio anchors attach only for high-risk portfolios.
ComplianceReport build_report(const Portfolio& portfolio, const taxonomy::TaxonomyRegistry& registry,
                              const scenarios::WorkflowResult& result, const Clock& clock,
                              const ReportOptions& options = {});

inline constexpr std::string_view kFormats[] = {"json", "markdown", "csv-summary"};

/// Deterministic rendering: sorted keys, currency to 2 places, probabilities to 4.
/// Throws UnsupportedFormat.
std::string render(const ComplianceReport& report, std::string_view format);

nlohmann::json to_json(const ComplianceReport& report);
ComplianceReport report_from_json(const nlohmann::json& j);

}  // namespace airisk::reporting
