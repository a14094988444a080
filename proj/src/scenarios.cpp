#include "airisk/scenarios.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "airisk/random.hpp"
#include "json_util.hpp"

namespace airisk::scenarios {

using nlohmann::json;

namespace {

Finding error(std::string code, std::string path, std::string message) {
    return Finding{FindingLevel::Error, std::move(code), std::move(path), std::move(message)};
}

bool is_currency_code(const std::string& s) {
    return s.size() == 3 &&
           std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isupper(c); });
}

}  // namespace

std::vector<Finding> validate_scenario(const RiskScenario& scenario,
                                       const taxonomy::TaxonomyRegistry& registry,
                                       const std::string& path) {
    std::vector<Finding> out;

    if (scenario.id.empty()) out.push_back(error("missing_id", path + "/id", "scenario id must be non-empty"));
    if (!is_currency_code(scenario.currency_code))
        out.push_back(error("invalid_currency", path + "/currency_code",
                            fmt::format("'{}' is not an ISO-4217 code", scenario.currency_code)));

    const taxonomy::ThreatDomain* domain = nullptr;
    if (registry.has_sub_threat(scenario.sub_threat_id))
        domain = &registry.domain_of(scenario.sub_threat_id);
    else
        out.push_back(error("unknown_sub_threat", path + "/sub_threat_id",
                            fmt::format("unknown sub-threat '{}'", scenario.sub_threat_id)));

    for (const auto& v : calibration::parameter_violations(scenario.frequency))
        out.push_back(error("invalid_parameter", path + "/frequency/" + v.parameter, v.message));

    if (scenario.severities.empty())
        out.push_back(error("no_severity", path + "/severities", "at least one severity model is required"));
    for (const auto& [cat, model] : scenario.severities) {
        const auto sp = fmt::format("{}/severities/{}", path, taxonomy::to_string(cat));
        if (domain && !domain->loss_categories.count(cat))
            out.push_back(error("loss_category_not_mapped", sp,
                                fmt::format("loss category not mapped for domain: {} is not a loss "
                                            "category of '{}'",
                                            taxonomy::to_string(cat), domain->id)));
        for (const auto& v : calibration::parameter_violations(model))
            out.push_back(error("invalid_parameter", sp + "/" + v.parameter, v.message));
    }

    std::set<std::string> control_ids;
    for (std::size_t i = 0; i < scenario.controls.size(); ++i) {
        const auto& c = scenario.controls[i];
        const auto cp = fmt::format("{}/controls/{}", path, i);
        if (c.id.empty()) out.push_back(error("missing_id", cp + "/id", "control id must be non-empty"));
        if (!control_ids.insert(c.id).second)
            out.push_back(error("duplicate_id", cp + "/id", fmt::format("duplicate control id '{}'", c.id)));
        if (!(c.frequency_reduction >= 0.0 && c.frequency_reduction <= 1.0))
            out.push_back(error("invalid_parameter", cp + "/frequency_reduction",
                                fmt::format("frequency_reduction must be within [0, 1] (got {})",
                                            c.frequency_reduction)));
        if (!(c.magnitude_reduction >= 0.0 && c.magnitude_reduction <= 1.0))
            out.push_back(error("invalid_parameter", cp + "/magnitude_reduction",
                                fmt::format("magnitude_reduction must be within [0, 1] (got {})",
                                            c.magnitude_reduction)));
        if (!(c.annual_cost >= 0.0) || !std::isfinite(c.annual_cost))
            out.push_back(error("invalid_parameter", cp + "/annual_cost",
                                fmt::format("annual_cost must be finite and >= 0 (got {})", c.annual_cost)));
        for (const auto& d : c.applicable_domains)
            if (!registry.has_domain(d))
                out.push_back(error("unknown_domain", cp + "/applicable_domains",
                                    fmt::format("unknown domain '{}'", d)));
        if (domain && !c.applicable_domains.empty() && !c.applicable_domains.count(domain->id))
            out.push_back(error("inapplicable_control", cp,
                                fmt::format("control '{}' does not apply to domain '{}'", c.id, domain->id)));
    }
    return out;
}

std::vector<Finding> validate_portfolio(const Portfolio& portfolio,
                                        const taxonomy::TaxonomyRegistry& registry) {
    std::vector<Finding> out;
    if (portfolio.id.empty()) out.push_back(error("missing_id", "/id", "portfolio id must be non-empty"));
    if (portfolio.scenarios.empty())
        out.push_back(error("empty_portfolio", "/scenarios", "portfolio has no scenarios"));
    if (portfolio.taxonomy_version != registry.version())
        out.push_back(Finding{FindingLevel::Warning, "taxonomy_version_mismatch", "/taxonomy_version",
                              fmt::format("portfolio pins taxonomy '{}' but the loaded registry is '{}'",
                                          portfolio.taxonomy_version, registry.version())});

    std::set<std::string> ids;
    std::set<std::string> currencies;
    for (std::size_t i = 0; i < portfolio.scenarios.size(); ++i) {
        const auto& s = portfolio.scenarios[i];
        const auto path = fmt::format("/scenarios/{}", i);
        if (!ids.insert(s.id).second)
            out.push_back(error("duplicate_id", path + "/id", fmt::format("duplicate scenario id '{}'", s.id)));
        currencies.insert(s.currency_code);
        auto f = validate_scenario(s, registry, path);
        out.insert(out.end(), f.begin(), f.end());
    }
    if (currencies.size() > 1)
        out.push_back(error("mixed_currency", "/scenarios",
                            "all scenarios in a portfolio must use the same currency"));
    return out;
}

std::uint64_t scenario_seed(std::uint64_t master_seed, const std::string& scenario_id) {
    return derive_seed(master_seed, stable_hash(scenario_id), 0x5ce7a410ULL);
}

WorkflowResult run_workflow(const Portfolio& portfolio, const taxonomy::TaxonomyRegistry& registry,
                            const WorkflowOptions& options) {
    auto findings = validate_portfolio(portfolio, registry);
    if (has_errors(findings)) throw ValidationFailed(std::move(findings));

    std::vector<double> confidences =
        options.confidences.empty() ? kDefaultConfidences : options.confidences;
    double reserve_confidence = options.reserve_confidence.value_or(
        confidences == kDefaultConfidences
            ? kDefaultReserveConfidence
            : *std::max_element(confidences.begin(), confidences.end()));
    if (std::find(confidences.begin(), confidences.end(), reserve_confidence) == confidences.end())
        confidences.push_back(reserve_confidence);

    WorkflowResult result;
    result.portfolio_id = portfolio.id;
    result.taxonomy_version = registry.version();
    result.seed = options.seed;
    result.n_trials = options.n_trials;
    result.confidences = confidences;

    for (const auto& s : portfolio.scenarios) {
        ScenarioResult sr;
        sr.scenario_id = s.id;
        sr.seed = scenario_seed(options.seed, s.id);
        sr.trials = engine::simulate_scenario(s, options.n_trials, sr.seed, options.simulation);
        sr.metrics = engine::metrics(sr.trials, confidences);
        result.scenarios.push_back(std::move(sr));
    }

    // Sum in id order so the portfolio trials do not depend on scenario order.
    std::vector<const ScenarioResult*> by_id;
    for (const auto& sr : result.scenarios) by_id.push_back(&sr);
    std::sort(by_id.begin(), by_id.end(),
              [](auto* a, auto* b) { return a->scenario_id < b->scenario_id; });
    std::vector<engine::TrialSet> sets;
    sets.reserve(by_id.size());
    for (auto* sr : by_id) sets.push_back(sr->trials);

    result.portfolio_trials = engine::aggregate(sets);
    result.portfolio_trials.seed = options.seed;
    result.portfolio_metrics = engine::metrics(result.portfolio_trials, confidences);
    result.reserve = Reserve{reserve_confidence, result.portfolio_metrics.var.at(reserve_confidence)};
    return result;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const Control& c) {
    return json{{"id", c.id},
                {"name", c.name},
                {"frequency_reduction", c.frequency_reduction},
                {"magnitude_reduction", c.magnitude_reduction},
                {"annual_cost", c.annual_cost},
                {"applicable_domains", c.applicable_domains}};
}

json to_json(const RiskScenario& s) {
    json severities = json::object();
    for (const auto& [cat, model] : s.severities)
        severities[std::string(taxonomy::to_string(cat))] = calibration::to_json(model);
    json controls = json::array();
    for (const auto& c : s.controls) controls.push_back(to_json(c));
    return json{{"id", s.id},
                {"title", s.title},
                {"sub_threat_id", s.sub_threat_id},
                {"narrative", s.narrative},
                {"exposure_note", s.exposure_note},
                {"frequency", calibration::to_json(s.frequency)},
                {"severities", severities},
                {"controls", controls},
                {"currency_code", s.currency_code}};
}

json to_json(const Portfolio& p) {
    json scenarios = json::array();
    for (const auto& s : p.scenarios) scenarios.push_back(to_json(s));
    return json{{"schema_version", kPortfolioSchemaVersion},
                {"id", p.id},
                {"taxonomy_version", p.taxonomy_version},
                {"eu_high_risk", p.eu_high_risk},
                {"scenarios", scenarios}};
}

Control control_from_json(const json& j, const std::string& path) {
    using namespace detail;
    require_object(j, path);
    reject_unknown_keys(j, {"id", "name", "frequency_reduction", "magnitude_reduction", "annual_cost",
                            "applicable_domains"},
                        path);
    Control c;
    c.id = get_string(j, "id", path);
    c.name = get_string_or(j, "name", path, "");
    c.frequency_reduction = j.contains("frequency_reduction") ? get_number(j, "frequency_reduction", path) : 0.0;
    c.magnitude_reduction = j.contains("magnitude_reduction") ? get_number(j, "magnitude_reduction", path) : 0.0;
    c.annual_cost = get_number(j, "annual_cost", path);
    if (j.contains("applicable_domains")) {
        const auto& ds = require_array(j.at("applicable_domains"), path + "/applicable_domains");
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (!ds[i].is_string())
                throw SchemaError(fmt::format("{}/applicable_domains/{}: expected string", path, i));
            c.applicable_domains.insert(ds[i].get<std::string>());
        }
    }
    return c;
}

RiskScenario scenario_from_json(const json& j, const std::string& path) {
    using namespace detail;
    require_object(j, path);
    reject_unknown_keys(j, {"id", "title", "sub_threat_id", "narrative", "exposure_note", "frequency",
                            "severities", "controls", "currency_code"},
                        path);
    RiskScenario s;
    s.id = get_string(j, "id", path);
    s.title = get_string_or(j, "title", path, "");
    s.sub_threat_id = get_string(j, "sub_threat_id", path);
    s.narrative = get_string_or(j, "narrative", path, "");
    s.exposure_note = get_string_or(j, "exposure_note", path, "");
    s.currency_code = get_string_or(j, "currency_code", path, "USD");
    s.frequency = calibration::frequency_from_json(field(j, "frequency", path), path + "/frequency");
    const auto& sev = require_object(field(j, "severities", path), path + "/severities");
    for (const auto& [key, model] : sev.items()) {
        auto cat = taxonomy::parse_loss_category(key);
        if (!cat) throw SchemaError(path + "/severities: unknown loss category '" + key + "'");
        s.severities.emplace(*cat, calibration::severity_from_json(model, path + "/severities/" + key));
    }
    if (j.contains("controls")) {
        const auto& cs = require_array(j.at("controls"), path + "/controls");
        for (std::size_t i = 0; i < cs.size(); ++i)
            s.controls.push_back(control_from_json(cs[i], fmt::format("{}/controls/{}", path, i)));
    }
    return s;
}

Portfolio portfolio_from_json(const json& j) {
    using namespace detail;
    require_object(j, "");
    reject_unknown_keys(j, {"$schema", "schema_version", "id", "taxonomy_version", "eu_high_risk", "scenarios"},
                        "");
    if (j.contains("schema_version")) {
        auto v = get_string(j, "schema_version", "");
        if (v != kPortfolioSchemaVersion)
            throw SchemaError("/schema_version: unsupported portfolio schema version '" + v + "'");
    }
    Portfolio p;
    p.id = get_string(j, "id", "");
    p.taxonomy_version = get_string(j, "taxonomy_version", "");
    p.eu_high_risk = get_bool_or(j, "eu_high_risk", "", false);
    const auto& ss = require_array(field(j, "scenarios", ""), "/scenarios");
    for (std::size_t i = 0; i < ss.size(); ++i)
        p.scenarios.push_back(scenario_from_json(ss[i], fmt::format("/scenarios/{}", i)));
    return p;
}

LoadedPortfolio load_portfolio(std::istream& in, const std::optional<std::string>& registry_version) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("portfolio is not valid JSON: ") + e.what());
    }
    LoadedPortfolio out{portfolio_from_json(doc), {}};
    if (registry_version && *registry_version != out.portfolio.taxonomy_version)
        out.warnings.push_back(Finding{
            FindingLevel::Warning, "taxonomy_version_mismatch", "/taxonomy_version",
            fmt::format("portfolio pins taxonomy '{}' but the loaded registry is '{}'",
                        out.portfolio.taxonomy_version, *registry_version)});
    return out;
}

LoadedPortfolio load_portfolio(const std::filesystem::path& path,
                               const std::optional<std::string>& registry_version) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open portfolio file " + path.string());
    return load_portfolio(in, registry_version);
}

void save_portfolio(const Portfolio& portfolio, std::ostream& out) {
    out << to_json(portfolio).dump(2) << '\n';
}

void save_portfolio(const Portfolio& portfolio, const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("IoError", "cannot write " + tmp.string());
        save_portfolio(portfolio, out);
        out.flush();
        if (!out) throw Error("IoError", "failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

json to_json(const engine::RiskMetrics& m, bool include_curve) {
    json var = json::object(), tvar = json::object(), cats = json::object();
    for (const auto& [a, v] : m.var) var[fmt::format("{}", a)] = v;
    for (const auto& [a, v] : m.tvar) tvar[fmt::format("{}", a)] = v;
    for (const auto& [c, v] : m.per_category_eal) cats[std::string(taxonomy::to_string(c))] = v;
    json j{{"n_trials", m.n_trials},
           {"eal", m.eal},
           {"var", var},
           {"tvar", tvar},
           {"zero_loss_probability", m.zero_loss_probability},
           {"per_category_eal", cats}};
    if (include_curve) {
        json curve = json::array();
        for (const auto& p : m.exceedance_curve)
            curve.push_back(json{{"threshold", p.threshold}, {"probability", p.probability}});
        j["exceedance_curve"] = std::move(curve);
    }
    return j;
}

json to_json(const WorkflowResult& r, bool include_curve) {
    json scenarios = json::array();
    for (const auto& s : r.scenarios)
        scenarios.push_back(json{{"scenario_id", s.scenario_id},
                                 {"seed", s.seed},
                                 {"metrics", to_json(s.metrics, include_curve)}});
    return json{{"portfolio_id", r.portfolio_id},
                {"taxonomy_version", r.taxonomy_version},
                {"seed", r.seed},
                {"n_trials", r.n_trials},
                {"confidences", r.confidences},
                {"reserve", {{"confidence", r.reserve.confidence}, {"amount", r.reserve.amount}}},
                {"portfolio", to_json(r.portfolio_metrics, include_curve)},
                {"scenarios", scenarios}};
}

}  // namespace airisk::scenarios
