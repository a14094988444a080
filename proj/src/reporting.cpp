#include "airisk/reporting.hpp"

#include <cmath>
#include <ctime>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "airisk/error.hpp"
#include "json_util.hpp"

namespace airisk::reporting {

using nlohmann::json;

Clock fixed_clock(std::chrono::system_clock::time_point t) {
    return [t] { return t; };
}

std::string format_utc(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", tm.tm_year + 1900, tm.tm_mon + 1,
                       tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
}

double round_currency(double v) { return std::round(v * 100.0) / 100.0; }
double round_probability(double v) { return std::round(v * 10000.0) / 10000.0; }

MetricsSummary summarize(const engine::RiskMetrics& m) {
    MetricsSummary s;
    s.eal = round_currency(m.eal);
    for (const auto& [a, v] : m.var) s.var[round_probability(a)] = round_currency(v);
    for (const auto& [a, v] : m.tvar) s.tvar[round_probability(a)] = round_currency(v);
    s.zero_loss_probability = round_probability(m.zero_loss_probability);
    for (const auto& [cat, v] : m.per_category_eal)
        s.per_category_eal[std::string(taxonomy::to_string(cat))] = round_currency(v);
    return s;
}

ControlSummary summarize(const controls::ControlEvaluation& e) {
    ControlSummary s;
    s.control_id = e.control_id;
    s.ale_before = round_currency(e.ale_before);
    s.ale_after = round_currency(e.ale_after);
    s.annual_cost = round_currency(e.annual_cost);
    s.net_benefit = round_currency(e.net_benefit);
    if (e.rosi) s.rosi = round_probability(*e.rosi);
    return s;
}

ComplianceReport build_report(const Portfolio& portfolio, const taxonomy::TaxonomyRegistry& registry,
                              const scenarios::WorkflowResult& result, const Clock& clock,
                              const ReportOptions& options) {
    ComplianceReport r;
    r.generated_at = format_utc(clock());
    r.taxonomy_version = result.taxonomy_version;
    r.portfolio_id = portfolio.id;
    r.currency_code = portfolio.scenarios.empty() ? "USD" : portfolio.scenarios.front().currency_code;
    r.eu_high_risk = portfolio.eu_high_risk;
    if (portfolio.eu_high_risk) r.portfolio_anchors = registry.portfolio_anchors();
    r.portfolio_metrics = summarize(result.portfolio_metrics);
    r.reserve = ReserveStatement{round_probability(result.reserve.confidence),
                                 round_currency(result.reserve.amount), result.seed, result.n_trials};

    for (std::size_t i = 0; i < portfolio.scenarios.size(); ++i) {
        const auto& s = portfolio.scenarios[i];
        const auto& sr = result.scenarios.at(i);
        const auto& domain = registry.domain_of(s.sub_threat_id);
        ScenarioSection sec;
        sec.scenario_id = s.id;
        sec.title = s.title;
        sec.domain_id = domain.id;
        sec.domain_name = domain.name;
        sec.sub_threat_id = s.sub_threat_id;
        sec.sub_threat_name = registry.sub_threat(s.sub_threat_id).name;
        sec.narrative = s.narrative;
        sec.exposure_note = s.exposure_note;
        sec.seed = sr.seed;
        sec.metrics = summarize(sr.metrics);
        sec.anchors = registry.anchors_for(domain.id);
        if (options.include_controls && !s.controls.empty())
            for (const auto& e : controls::rank(s.controls, s, result.n_trials, sr.seed, options.simulation))
                sec.controls.push_back(summarize(e));
        r.scenarios.push_back(std::move(sec));
    }
    return r;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string prob_key(double a) { return fmt::format("{}", a); }

json to_json(const MetricsSummary& m) {
    json var = json::object(), tvar = json::object();
    for (const auto& [a, v] : m.var) var[prob_key(a)] = v;
    for (const auto& [a, v] : m.tvar) tvar[prob_key(a)] = v;
    return json{{"eal", m.eal},
                {"var", var},
                {"tvar", tvar},
                {"zero_loss_probability", m.zero_loss_probability},
                {"per_category_eal", m.per_category_eal}};
}

std::map<double, double> prob_map(const json& j, const std::string& path) {
    std::map<double, double> out;
    detail::require_object(j, path);
    for (const auto& [k, v] : j.items()) {
        if (!v.is_number()) throw SchemaError(path + "/" + k + ": expected number");
        try {
            out[std::stod(k)] = v.get<double>();
        } catch (const std::exception&) {
            throw SchemaError(path + ": key '" + k + "' is not a probability");
        }
    }
    return out;
}

MetricsSummary metrics_from_json(const json& j, const std::string& path) {
    detail::require_object(j, path);
    MetricsSummary m;
    m.eal = detail::get_number(j, "eal", path);
    m.var = prob_map(detail::field(j, "var", path), path + "/var");
    m.tvar = prob_map(detail::field(j, "tvar", path), path + "/tvar");
    m.zero_loss_probability = detail::get_number(j, "zero_loss_probability", path);
    m.per_category_eal = detail::field(j, "per_category_eal", path).get<std::map<std::string, double>>();
    return m;
}

taxonomy::RegulatoryAnchor anchor_from_json(const json& j, const std::string& path) {
    taxonomy::RegulatoryAnchor a;
    auto fw = taxonomy::parse_framework(detail::get_string(j, "framework", path));
    if (!fw) throw SchemaError(path + "/framework: unknown framework");
    a.framework = *fw;
    a.reference = detail::get_string(j, "reference", path);
    a.note = detail::get_string_or(j, "note", path, "");
    return a;
}

json anchors_json(const std::vector<taxonomy::RegulatoryAnchor>& anchors) {
    json out = json::array();
    for (const auto& a : anchors) out.push_back(taxonomy::to_json(a));
    return out;
}

std::vector<taxonomy::RegulatoryAnchor> anchors_from_json(const json& j, const std::string& path) {
    std::vector<taxonomy::RegulatoryAnchor> out;
    detail::require_array(j, path);
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(anchor_from_json(j[i], fmt::format("{}/{}", path, i)));
    return out;
}

}  // namespace

json to_json(const ComplianceReport& r) {
    json sections = json::array();
    for (const auto& s : r.scenarios) {
        json controls = json::array();
        for (const auto& c : s.controls)
            controls.push_back(json{{"control_id", c.control_id},
                                    {"ale_before", c.ale_before},
                                    {"ale_after", c.ale_after},
                                    {"annual_cost", c.annual_cost},
                                    {"net_benefit", c.net_benefit},
                                    {"rosi", c.rosi ? json(*c.rosi) : json(nullptr)}});
        sections.push_back(json{{"scenario_id", s.scenario_id},
                                {"title", s.title},
                                {"domain_id", s.domain_id},
                                {"domain_name", s.domain_name},
                                {"sub_threat_id", s.sub_threat_id},
                                {"sub_threat_name", s.sub_threat_name},
                                {"narrative", s.narrative},
                                {"exposure_note", s.exposure_note},
                                {"seed", s.seed},
                                {"metrics", to_json(s.metrics)},
                                {"regulatory_anchors", anchors_json(s.anchors)},
                                {"control_evaluations", controls}});
    }
    return json{{"generated_at", r.generated_at},
                {"taxonomy_version", r.taxonomy_version},
                {"portfolio_id", r.portfolio_id},
                {"currency_code", r.currency_code},
                {"eu_high_risk", r.eu_high_risk},
                {"portfolio_anchors", anchors_json(r.portfolio_anchors)},
                {"portfolio_metrics", to_json(r.portfolio_metrics)},
                {"reserve",
                 {{"confidence", r.reserve.confidence},
                  {"amount", r.reserve.amount},
                  {"seed", r.reserve.seed},
                  {"n_trials", r.reserve.n_trials}}},
                {"scenarios", sections}};
}

ComplianceReport report_from_json(const json& j) {
    using namespace detail;
    require_object(j, "");
    ComplianceReport r;
    r.generated_at = get_string(j, "generated_at", "");
    r.taxonomy_version = get_string(j, "taxonomy_version", "");
    r.portfolio_id = get_string(j, "portfolio_id", "");
    r.currency_code = get_string(j, "currency_code", "");
    r.eu_high_risk = get_bool_or(j, "eu_high_risk", "", false);
    r.portfolio_anchors = anchors_from_json(field(j, "portfolio_anchors", ""), "/portfolio_anchors");
    r.portfolio_metrics = metrics_from_json(field(j, "portfolio_metrics", ""), "/portfolio_metrics");
    const auto& res = require_object(field(j, "reserve", ""), "/reserve");
    r.reserve.confidence = get_number(res, "confidence", "/reserve");
    r.reserve.amount = get_number(res, "amount", "/reserve");
    r.reserve.seed = field(res, "seed", "/reserve").get<std::uint64_t>();
    r.reserve.n_trials = field(res, "n_trials", "/reserve").get<std::size_t>();
    const auto& secs = require_array(field(j, "scenarios", ""), "/scenarios");
    for (std::size_t i = 0; i < secs.size(); ++i) {
        const auto path = fmt::format("/scenarios/{}", i);
        const auto& sj = require_object(secs[i], path);
        ScenarioSection s;
        s.scenario_id = get_string(sj, "scenario_id", path);
        s.title = get_string(sj, "title", path);
        s.domain_id = get_string(sj, "domain_id", path);
        s.domain_name = get_string(sj, "domain_name", path);
        s.sub_threat_id = get_string(sj, "sub_threat_id", path);
        s.sub_threat_name = get_string(sj, "sub_threat_name", path);
        s.narrative = get_string(sj, "narrative", path);
        s.exposure_note = get_string(sj, "exposure_note", path);
        s.seed = field(sj, "seed", path).get<std::uint64_t>();
        s.metrics = metrics_from_json(field(sj, "metrics", path), path + "/metrics");
        s.anchors = anchors_from_json(field(sj, "regulatory_anchors", path), path + "/regulatory_anchors");
        const auto& cs = require_array(field(sj, "control_evaluations", path), path + "/control_evaluations");
        for (std::size_t k = 0; k < cs.size(); ++k) {
            const auto cp = fmt::format("{}/control_evaluations/{}", path, k);
            ControlSummary c;
            c.control_id = get_string(cs[k], "control_id", cp);
            c.ale_before = get_number(cs[k], "ale_before", cp);
            c.ale_after = get_number(cs[k], "ale_after", cp);
            c.annual_cost = get_number(cs[k], "annual_cost", cp);
            c.net_benefit = get_number(cs[k], "net_benefit", cp);
            if (!field(cs[k], "rosi", cp).is_null()) c.rosi = get_number(cs[k], "rosi", cp);
            s.controls.push_back(std::move(c));
        }
        r.scenarios.push_back(std::move(s));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Text renderings

namespace {

std::string money(double v) { return fmt::format("{:.2f}", v); }
std::string prob(double v) { return fmt::format("{:.4f}", v); }

void metrics_table(std::string& out, const MetricsSummary& m, const std::string& currency) {
    out += fmt::format("| Metric | Value ({}) |\n|---|---:|\n", currency);
    out += fmt::format("| EAL | {} |\n", money(m.eal));
    for (const auto& [a, v] : m.var) out += fmt::format("| VaR {} | {} |\n", prob(a), money(v));
    for (const auto& [a, v] : m.tvar) out += fmt::format("| TVaR {} | {} |\n", prob(a), money(v));
    out += fmt::format("\nProbability of zero annual loss: {}\n", prob(m.zero_loss_probability));
}

std::string render_markdown(const ComplianceReport& r) {
    std::string out;
    out += "# AI Risk Quantification Report\n\n";
    out += fmt::format("- Portfolio: `{}`\n", r.portfolio_id);
    out += fmt::format("- Taxonomy version: `{}`\n", r.taxonomy_version);
    out += fmt::format("- Generated at: {}\n", r.generated_at);
    out += fmt::format("- Currency: {}\n", r.currency_code);
    out += fmt::format("- Seed: {}\n", r.reserve.seed);
    out += fmt::format("- Trials: {}\n", r.reserve.n_trials);
    out += fmt::format("- EU high-risk system: {}\n\n", r.eu_high_risk ? "yes" : "no");

    out += "## Reserve\n\n";
    out += fmt::format("Contingency reserve at VaR {}: **{} {}** (seed {}, {} trials).\n\n",
                       prob(r.reserve.confidence), money(r.reserve.amount), r.currency_code,
                       r.reserve.seed, r.reserve.n_trials);

    out += "## Portfolio metrics\n\n";
    metrics_table(out, r.portfolio_metrics, r.currency_code);
    out += '\n';

    if (!r.portfolio_anchors.empty()) {
        out += "## Portfolio regulatory anchors\n\n";
        for (const auto& a : r.portfolio_anchors)
            out += fmt::format("- {} {}: {}\n", taxonomy::to_string(a.framework), a.reference, a.note);
        out += '\n';
    }

    for (const auto& s : r.scenarios) {
        out += fmt::format("## Scenario `{}`: {}\n\n", s.scenario_id, s.title);
        out += fmt::format("- Domain: {} (`{}`)\n", s.domain_name, s.domain_id);
        out += fmt::format("- Sub-threat: {} (`{}`)\n", s.sub_threat_name, s.sub_threat_id);
        out += fmt::format("- Scenario seed: {}\n", s.seed);
        if (!s.narrative.empty()) out += fmt::format("- Narrative: {}\n", s.narrative);
        if (!s.exposure_note.empty()) out += fmt::format("- Exposure: {}\n", s.exposure_note);
        out += '\n';
        metrics_table(out, s.metrics, r.currency_code);
        out += "\n### Loss categories\n\n| Category | EAL |\n|---|---:|\n";
        for (const auto& [cat, v] : s.metrics.per_category_eal)
            out += fmt::format("| {} | {} |\n", cat, money(v));
        out += "\n### Regulatory anchors\n\n";
        if (s.anchors.empty()) out += "No anchors published for this domain.\n";
        for (const auto& a : s.anchors)
            out += fmt::format("- {} {}: {}\n", taxonomy::to_string(a.framework), a.reference, a.note);
        if (!s.controls.empty()) {
            out += "\n### Control evaluations\n\n";
            out += "| Control | ALE before | ALE after | Annual cost | Net benefit | ROSI |\n";
            out += "|---|---:|---:|---:|---:|---:|\n";
            for (const auto& c : s.controls)
                out += fmt::format("| {} | {} | {} | {} | {} | {} |\n", c.control_id, money(c.ale_before),
                                   money(c.ale_after), money(c.annual_cost), money(c.net_benefit),
                                   c.rosi ? prob(*c.rosi) : std::string("n/a"));
        }
        out += '\n';
    }
    return out;
}

std::string render_csv(const ComplianceReport& r) {
    std::string out = "scenario_id,domain_id,sub_threat_id,eal";
    for (const auto& [a, _] : r.portfolio_metrics.var) out += fmt::format(",var_{}", prob(a));
    for (const auto& [a, _] : r.portfolio_metrics.tvar) out += fmt::format(",tvar_{}", prob(a));
    out += '\n';
    auto row = [&](const std::string& id, const std::string& dom, const std::string& st,
                   const MetricsSummary& m) {
        out += fmt::format("{},{},{},{}", id, dom, st, money(m.eal));
        for (const auto& [a, _] : r.portfolio_metrics.var)
            out += "," + (m.var.count(a) ? money(m.var.at(a)) : std::string());
        for (const auto& [a, _] : r.portfolio_metrics.tvar)
            out += "," + (m.tvar.count(a) ? money(m.tvar.at(a)) : std::string());
        out += '\n';
    };
    for (const auto& s : r.scenarios) row(s.scenario_id, s.domain_id, s.sub_threat_id, s.metrics);
    row("PORTFOLIO", "", "", r.portfolio_metrics);
    return out;
}

}  // namespace

std::string render(const ComplianceReport& report, std::string_view format) {
    if (format == "json") return to_json(report).dump(2) + "\n";
    if (format == "markdown") return render_markdown(report);
    if (format == "csv-summary") return render_csv(report);
    throw UnsupportedFormat(std::string(format));
}

}  // namespace airisk::reporting
