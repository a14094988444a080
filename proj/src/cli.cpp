#include "airisk/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <ostream>
#include <ranges>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "airisk/api.hpp"
#include "airisk/calibration.hpp"
#include "airisk/controls.hpp"
#include "airisk/engine.hpp"
#include "airisk/error.hpp"
#include "airisk/incidents.hpp"
#include "airisk/reporting.hpp"
#include "airisk/scenarios.hpp"
#include "airisk/taxonomy.hpp"

namespace airisk::cli {

namespace {

using nlohmann::json;

struct Options {
    std::string registry;
    std::string output_format{"text"};

    std::string domain, lifecycle, loss, temporal;

    double low{0}, high{0}, confidence{0.9};

    std::string portfolio;
    std::size_t trials{100000};
    std::uint64_t seed{42};
    std::vector<double> confidences;
    std::string export_trials;
    std::size_t threads{0};

    std::string scenario;

    std::string input;
    bool reference_labels{false};
    bool records{false};

    std::string report_format{"markdown"};
    std::string output;

    std::string addr{"127.0.0.1:8080"};
    std::string snapshot_dir;
    std::string static_dir;
};

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

taxonomy::TaxonomyRegistry load(const Options& o) {
    return taxonomy::load_registry(o.registry.empty() ? taxonomy::default_registry_path()
                                                      : std::filesystem::path(o.registry));
}

void print_warnings(const std::vector<Finding>& findings, std::ostream& err) {
    for (const auto& f : findings)
        if (f.level == FindingLevel::Warning) err << "warning: " << f.path << ": " << f.message << '\n';
}

std::string money(double v) { return fmt::format("{:.2f}", v); }

int cmd_taxonomy_validate(const Options& o, std::ostream& out) {
    auto reg = load(o);
    if (o.output_format == "json") {
        out << json{{"valid", true},
                    {"taxonomy_version", reg.version()},
                    {"domains", reg.domains().size()},
                    {"sub_threats", reg.sub_threat_count()}}
                   .dump(2)
            << '\n';
    } else {
        out << fmt::format("ok: taxonomy {}: {} domains, {} sub-threats\n", reg.version(),
                           reg.domains().size(), reg.sub_threat_count());
    }
    return kExitOk;
}

int cmd_taxonomy_list(const Options& o, std::ostream& out) {
    auto reg = load(o);
    taxonomy::SubThreatFilter f;
    if (!o.domain.empty()) {
        if (!reg.has_domain(o.domain)) throw UnknownId(o.domain);
        f.domain_id = o.domain;
    }
    if (!o.lifecycle.empty()) {
        f.lifecycle_phase = taxonomy::parse_lifecycle_phase(o.lifecycle);
        if (!f.lifecycle_phase) throw UsageError("unknown lifecycle phase: " + o.lifecycle);
    }
    if (!o.loss.empty()) {
        f.loss_category = taxonomy::parse_loss_category(o.loss);
        if (!f.loss_category) throw UsageError("unknown loss category: " + o.loss);
    }
    if (!o.temporal.empty()) {
        f.temporal_pattern = taxonomy::parse_temporal_pattern(o.temporal);
        if (!f.temporal_pattern) throw UsageError("unknown temporal pattern: " + o.temporal);
    }
    auto rows = reg.query(f);
    if (o.output_format == "json") {
        json arr = json::array();
        for (const auto& s : rows)
            arr.push_back(json{{"id", s.id},
                               {"name", s.name},
                               {"domain_id", s.domain_id},
                               {"temporal_pattern", taxonomy::to_string(s.temporal_pattern)},
                               {"impact_profile", taxonomy::to_string(s.impact_profile)}});
        out << arr.dump(2) << '\n';
        return kExitOk;
    }
    for (const auto& s : rows) out << fmt::format("{:<20} {:<40} {}\n", s.domain_id, s.id, s.name);
    out << fmt::format("{} sub-threats\n", rows.size());
    return kExitOk;
}

int cmd_calibrate(const Options& o, std::ostream& out) {
    auto ln = calibration::calibrate_lognormal({o.low, o.high, o.confidence});
    const auto m = calibration::moments(calibration::SeverityModel{ln});
    if (o.output_format == "json") {
        out << json{{"family", "Lognormal"},
                    {"mu", ln.mu},
                    {"sigma", ln.sigma},
                    {"median", std::exp(ln.mu)},
                    {"mean", m.mean},
                    {"interval", {{"lower", o.low}, {"upper", o.high}, {"confidence", o.confidence}}}}
                   .dump(2)
            << '\n';
    } else {
        out << fmt::format("Lognormal mu={:.6f} sigma={:.6f}\n", ln.mu, ln.sigma);
        out << fmt::format("median={:.2f} mean={:.2f}\n", std::exp(ln.mu), m.mean);
    }
    return kExitOk;
}

struct LoadedWorkflow {
    taxonomy::TaxonomyRegistry registry;
    Portfolio portfolio;
    scenarios::WorkflowResult result;
};

LoadedWorkflow run_portfolio(const Options& o, std::ostream& err) {
    auto reg = load(o);
    auto loaded = scenarios::load_portfolio(std::filesystem::path(o.portfolio), reg.version());
    print_warnings(loaded.warnings, err);
    scenarios::WorkflowOptions wo;
    wo.n_trials = o.trials;
    wo.seed = o.seed;
    if (!o.confidences.empty()) wo.confidences = o.confidences;
    wo.simulation.threads = o.threads;
    auto result = scenarios::run_workflow(loaded.portfolio, reg, wo);
    return {std::move(reg), std::move(loaded.portfolio), std::move(result)};
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
    auto w = run_portfolio(o, err);
    const auto& r = w.result;
    if (!o.export_trials.empty()) {
        std::ofstream f(o.export_trials);
        if (!f) throw Error("IoError", "cannot write " + o.export_trials);
        engine::write_csv(r.portfolio_trials, f);
    }
    if (o.output_format == "json") {
        out << scenarios::to_json(r, false).dump(2) << '\n';
        return kExitOk;
    }
    const std::string currency = w.portfolio.scenarios.front().currency_code;
    out << fmt::format("portfolio: {} (taxonomy {})\n", r.portfolio_id, r.taxonomy_version);
    out << fmt::format("seed: {}\ntrials: {}\n\n", r.seed, r.n_trials);
    std::string head = fmt::format("{:<28} {:>16}", "scenario", "EAL");
    for (double a : r.portfolio_metrics.var | std::views::keys) head += fmt::format(" {:>16}", fmt::format("VaR {}", a));
    out << head << '\n';
    auto row = [&](const std::string& id, const engine::RiskMetrics& m) {
        std::string line = fmt::format("{:<28} {:>16}", id, money(m.eal));
        for (double v : m.var | std::views::values) line += fmt::format(" {:>16}", money(v));
        out << line << '\n';
    };
    for (const auto& s : r.scenarios) row(s.scenario_id, s.metrics);
    row("PORTFOLIO", r.portfolio_metrics);
    out << fmt::format("\nreserve (VaR {}): {} {}\n", r.reserve.confidence, money(r.reserve.amount), currency);
    return kExitOk;
}

int cmd_controls_rank(const Options& o, std::ostream& out, std::ostream& err) {
    auto reg = load(o);
    auto loaded = scenarios::load_portfolio(std::filesystem::path(o.portfolio), reg.version());
    print_warnings(loaded.warnings, err);
    const auto findings = scenarios::validate_portfolio(loaded.portfolio, reg);
    if (has_errors(findings)) throw ValidationFailed(findings);
    const RiskScenario* scenario = nullptr;
    for (const auto& s : loaded.portfolio.scenarios)
        if (s.id == o.scenario) scenario = &s;
    if (!scenario) throw UnknownId(o.scenario);
    engine::SimulationOptions so;
    so.threads = o.threads;
    const auto seed = scenarios::scenario_seed(o.seed, scenario->id);
    auto ranked = controls::rank(scenario->controls, *scenario, o.trials, seed, so);
    if (o.output_format == "json") {
        json arr = json::array();
        for (const auto& e : ranked)
            arr.push_back(json{{"control_id", e.control_id},
                               {"ale_before", e.ale_before},
                               {"ale_after", e.ale_after},
                               {"annual_cost", e.annual_cost},
                               {"net_benefit", e.net_benefit},
                               {"rosi", e.rosi ? json(*e.rosi) : json(nullptr)}});
        out << json{{"scenario_id", scenario->id}, {"seed", o.seed}, {"scenario_seed", seed},
                    {"n_trials", o.trials}, {"ranking", arr}}
                   .dump(2)
            << '\n';
        return kExitOk;
    }
    out << fmt::format("scenario: {}\nseed: {}\ntrials: {}\n\n", scenario->id, o.seed, o.trials);
    out << fmt::format("{:<4} {:<24} {:>14} {:>14} {:>12} {:>14} {:>10}\n", "rank", "control", "ALE before",
                       "ALE after", "cost", "net benefit", "ROSI");
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& e = ranked[i];
        out << fmt::format("{:<4} {:<24} {:>14} {:>14} {:>12} {:>14} {:>10}\n", i + 1, e.control_id,
                           money(e.ale_before), money(e.ale_after), money(e.annual_cost), money(e.net_benefit),
                           e.rosi ? fmt::format("{:.4f}", *e.rosi) : std::string("n/a"));
    }
    if (ranked.empty()) out << "no controls attached\n";
    return kExitOk;
}

int cmd_incidents(const Options& o, std::ostream& out) {
    auto reg = load(o);
    auto records = incidents::ingest(o.input);
    if (o.reference_labels) {
        records = incidents::apply_reference_labels(std::move(records), reg);
    } else {
        incidents::Classifier c(reg);
        for (auto& r : records) r = c.classify(std::move(r));
    }
    auto rep = incidents::prevalence(records, reg);
    if (o.output_format == "json") {
        auto j = incidents::to_json(rep);
        if (o.records) {
            json arr = json::array();
            for (const auto& r : records) arr.push_back(incidents::to_json(r));
            j["records"] = arr;
        }
        out << j.dump(2) << '\n';
        return kExitOk;
    }
    if (o.records)
        for (const auto& r : records)
            out << fmt::format("{:<16} {}\n", r.id, r.classified_domain->label());
    if (o.records) out << '\n';
    out << incidents::to_markdown(rep);
    return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
    auto w = run_portfolio(o, err);
    reporting::ReportOptions ro;
    ro.simulation.threads = o.threads;
    auto report = reporting::build_report(w.portfolio, w.registry, w.result,
                                          [] { return std::chrono::system_clock::now(); }, ro);
    auto text = reporting::render(report, o.report_format);
    if (o.output.empty()) {
        out << text;
    } else {
        std::ofstream f(o.output);
        if (!f) throw Error("IoError", "cannot write " + o.output);
        f << text;
        err << "wrote " << o.output << '\n';
    }
    return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out) {
    auto reg = std::make_shared<const taxonomy::TaxonomyRegistry>(load(o));
    api::ServiceOptions so;
    if (!o.snapshot_dir.empty()) so.snapshot_dir = o.snapshot_dir;
    api::Service service(reg, so);
    api::HttpServer server(service);
    auto [host, port] = api::parse_address(o.addr);
    int bound = server.bind(host, port);
    if (bound < 0) throw Error("BindFailed", "cannot bind " + o.addr);
    if (!o.static_dir.empty() && !server.mount_static(o.static_dir))
        throw Error("InvalidStaticDir", "cannot serve " + o.static_dir);
    out << fmt::format("listening on http://{}:{}", host, bound) << std::endl;
    return server.listen() ? kExitOk : kExitFailure;
}

void print_error(const Error& e, std::ostream& err) {
    err << "error: " << e.code() << ": " << e.what() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"AI risk quantification"};
    app.name("airisk");
    app.require_subcommand(1);
    app.set_version_flag("--version", "airisk 0.1.0");

    auto add_registry = [&](CLI::App* c) {
        c->add_option("--registry", o.registry, "Taxonomy registry JSON (default: $AIRISK_REGISTRY or bundled)");
    };
    auto add_format = [&](CLI::App* c) {
        c->add_option("--format", o.output_format, "Output format")->check(CLI::IsMember({"text", "json"}));
    };
    std::vector<CLI::Option*> seed_options;
    auto add_run = [&](CLI::App* c) {
        c->add_option("--portfolio", o.portfolio, "Portfolio file")->required()->check(CLI::ExistingFile);
        c->add_option("--trials", o.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
        seed_options.push_back(c->add_option("--seed", o.seed, "Master seed (default: $AIRISK_SEED or 42)"));
        c->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
    };

    auto* tax = app.add_subcommand("taxonomy", "Inspect the threat taxonomy")->require_subcommand(1);
    auto* tax_validate = tax->add_subcommand("validate", "Load and validate the registry");
    add_registry(tax_validate);
    add_format(tax_validate);
    auto* tax_list = tax->add_subcommand("list", "List sub-threats matching all filters");
    add_registry(tax_list);
    add_format(tax_list);
    tax_list->add_option("--domain", o.domain, "Domain id");
    tax_list->add_option("--lifecycle", o.lifecycle, "Lifecycle phase");
    tax_list->add_option("--loss", o.loss, "Loss category");
    tax_list->add_option("--temporal", o.temporal, "Temporal pattern");

    auto* cal = app.add_subcommand("calibrate", "Fit severity models to expert intervals")->require_subcommand(1);
    auto* cal_ln = cal->add_subcommand("lognormal", "Lognormal from a (low, high) interval");
    cal_ln->add_option("--low", o.low, "Lower bound")->required();
    cal_ln->add_option("--high", o.high, "Upper bound")->required();
    cal_ln->add_option("--confidence", o.confidence, "Interval confidence");
    add_format(cal_ln);

    auto* sim = app.add_subcommand("simulate", "Run the Monte Carlo workflow on a portfolio");
    add_registry(sim);
    add_format(sim);
    add_run(sim);
    sim->add_option("--confidence", o.confidences, "Confidence level (repeatable)");
    sim->add_option("--export-trials", o.export_trials, "Write portfolio trial losses to CSV");

    auto* ctl = app.add_subcommand("controls", "Evaluate mitigations")->require_subcommand(1);
    auto* ctl_rank = ctl->add_subcommand("rank", "Rank a scenario's attached controls");
    add_registry(ctl_rank);
    add_format(ctl_rank);
    add_run(ctl_rank);
    ctl_rank->add_option("--scenario", o.scenario, "Scenario id")->required();

    auto* inc = app.add_subcommand("incidents", "Incident corpus tools")->require_subcommand(1);
    auto* inc_classify = inc->add_subcommand("classify", "Classify incidents and report prevalence");
    add_registry(inc_classify);
    add_format(inc_classify);
    inc_classify->add_option("--input", o.input, "CSV or JSON incident file")->required()->check(CLI::ExistingFile);
    inc_classify->add_flag("--reference-labels", o.reference_labels, "Use curated labels instead of the classifier");
    inc_classify->add_flag("--records", o.records, "Also list per-record assignments");

    auto* rep = app.add_subcommand("report", "Render a compliance report");
    add_registry(rep);
    add_run(rep);
    rep->add_option("--confidence", o.confidences, "Confidence level (repeatable)");
    rep->add_option("--format", o.report_format, "Report format")
        ->check(CLI::IsMember({"json", "markdown", "csv-summary"}));
    rep->add_option("--output", o.output, "Write to file instead of stdout");

    auto* srv = app.add_subcommand("serve", "Serve the HTTP API");
    add_registry(srv);
    srv->add_option("--addr", o.addr, "Listen address host:port (loopback by default)");
    srv->add_option("--snapshot-dir", o.snapshot_dir, "Persist portfolios to this directory");
    srv->add_option("--static-dir", o.static_dir, "Serve the web client from this directory")
        ->check(CLI::ExistingDirectory);

    std::vector<const char*> argv{"airisk"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        bool seed_given = false;
        for (auto* opt : seed_options) seed_given = seed_given || opt->count() > 0;
        if (!seed_given) {
            if (const char* env = std::getenv("AIRISK_SEED"); env && *env) {
                try {
                    std::size_t pos = 0;
                    o.seed = std::stoull(env, &pos);
                    if (pos != std::string(env).size()) throw std::invalid_argument(env);
                } catch (const std::exception&) {
                    throw UsageError(std::string("AIRISK_SEED is not an unsigned integer: ") + env);
                }
            }
        }

        if (*tax_validate) return cmd_taxonomy_validate(o, out);
        if (*tax_list) return cmd_taxonomy_list(o, out);
        if (*cal_ln) return cmd_calibrate(o, out);
        if (*sim) return cmd_simulate(o, out, err);
        if (*ctl_rank) return cmd_controls_rank(o, out, err);
        if (*inc_classify) return cmd_incidents(o, out);
        if (*rep) return cmd_report(o, out, err);
        if (*srv) return cmd_serve(o, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        print_error(e, err);
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace airisk::cli
