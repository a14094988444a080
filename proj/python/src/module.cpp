#include <chrono>
#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "airisk/api.hpp"
#include "airisk/calibration.hpp"
#include "airisk/controls.hpp"
#include "airisk/error.hpp"
#include "airisk/incidents.hpp"
#include "airisk/reporting.hpp"
#include "airisk/scenarios.hpp"
#include "airisk/taxonomy.hpp"

namespace py = pybind11;
using namespace airisk;
using nlohmann::json;

namespace {

using RegistryPtr = std::shared_ptr<taxonomy::TaxonomyRegistry>;

Portfolio parse_portfolio(const std::string& text, const taxonomy::TaxonomyRegistry& registry) {
    std::istringstream in(text);
    return scenarios::load_portfolio(in, registry.version()).portfolio;
}

scenarios::WorkflowOptions workflow_options(std::size_t trials, std::uint64_t seed,
                                            const std::optional<std::vector<double>>& confidences,
                                            std::size_t threads) {
    scenarios::WorkflowOptions o;
    o.n_trials = trials;
    o.seed = seed;
    if (confidences) o.confidences = *confidences;
    o.simulation.threads = threads;
    return o;
}

py::tuple simulate_portfolio(const RegistryPtr& registry, const std::string& portfolio, std::size_t trials,
                             std::uint64_t seed, const std::optional<std::vector<double>>& confidences,
                             std::size_t threads) {
    std::string text;
    std::vector<double> losses;
    {
        py::gil_scoped_release release;
        auto p = parse_portfolio(portfolio, *registry);
        auto r = scenarios::run_workflow(p, *registry, workflow_options(trials, seed, confidences, threads));
        text = scenarios::to_json(r).dump();
        losses = std::move(r.portfolio_trials.losses);
    }
    return py::make_tuple(text, losses);
}

std::string rank_controls(const RegistryPtr& registry, const std::string& portfolio, const std::string& scenario_id,
                          std::size_t trials, std::uint64_t seed, std::size_t threads) {
    py::gil_scoped_release release;
    auto p = parse_portfolio(portfolio, *registry);
    const auto findings = scenarios::validate_portfolio(p, *registry);
    if (has_errors(findings)) throw ValidationFailed(findings);
    for (const auto& s : p.scenarios) {
        if (s.id != scenario_id) continue;
        json arr = json::array();
        engine::SimulationOptions so;
        so.threads = threads;
        for (const auto& e : controls::rank(s.controls, s, trials, scenarios::scenario_seed(seed, s.id), so))
            arr.push_back(json{{"control_id", e.control_id},
                               {"ale_before", e.ale_before},
                               {"ale_after", e.ale_after},
                               {"annual_cost", e.annual_cost},
                               {"net_benefit", e.net_benefit},
                               {"rosi", e.rosi ? json(*e.rosi) : json(nullptr)}});
        return arr.dump();
    }
    throw UnknownId(scenario_id);
}

std::string classify_incidents(const RegistryPtr& registry, const std::filesystem::path& path,
                               bool reference_labels) {
    auto records = incidents::ingest(path);
    if (reference_labels) {
        records = incidents::apply_reference_labels(std::move(records), *registry);
    } else {
        incidents::Classifier c(*registry);
        for (auto& r : records) r = c.classify(std::move(r));
    }
    auto j = incidents::to_json(incidents::prevalence(records, *registry));
    json arr = json::array();
    for (const auto& r : records) arr.push_back(incidents::to_json(r));
    j["records"] = arr;
    return j.dump();
}

std::string render_report(const RegistryPtr& registry, const std::string& portfolio, const std::string& format,
                          std::size_t trials, std::uint64_t seed, std::optional<std::int64_t> generated_at) {
    py::gil_scoped_release release;
    auto p = parse_portfolio(portfolio, *registry);
    auto r = scenarios::run_workflow(p, *registry, workflow_options(trials, seed, std::nullopt, 0));
    reporting::Clock clock = [] { return std::chrono::system_clock::now(); };
    if (generated_at)
        clock = reporting::fixed_clock(std::chrono::system_clock::time_point(std::chrono::seconds(*generated_at)));
    return reporting::render(reporting::build_report(p, *registry, r, clock), format);
}

}  // namespace

PYBIND11_MODULE(_airisk, m) {
    m.doc() = "Native core of the airisk package";

    static py::exception<Error> error(m, "AiriskError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::handle(error.ptr())(e.what());
            exc.attr("code") = e.code();
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    py::class_<taxonomy::TaxonomyRegistry, RegistryPtr>(m, "Registry")
        .def(py::init([](const std::filesystem::path& path) {
                 return std::make_shared<taxonomy::TaxonomyRegistry>(taxonomy::load_registry(path));
             }),
             py::arg("path"))
        .def_property_readonly("version", &taxonomy::TaxonomyRegistry::version)
        .def_property_readonly("sub_threat_count", &taxonomy::TaxonomyRegistry::sub_threat_count)
        .def("domain_ids",
             [](const taxonomy::TaxonomyRegistry& r) {
                 std::vector<std::string> ids;
                 for (const auto& d : r.domains()) ids.push_back(d.id);
                 return ids;
             })
        .def("anchors_for",
             [](const taxonomy::TaxonomyRegistry& r, const std::string& domain_id) {
                 json arr = json::array();
                 for (const auto& a : r.anchors_for(domain_id)) arr.push_back(taxonomy::to_json(a));
                 return arr.dump();
             })
        .def("to_json", [](const taxonomy::TaxonomyRegistry& r) { return taxonomy::to_json(r).dump(); })
        .def("__repr__", [](const taxonomy::TaxonomyRegistry& r) {
            return "<Registry " + r.version() + ": " + std::to_string(r.domains().size()) + " domains>";
        });

    m.def(
        "calibrate_lognormal",
        [](double low, double high, double confidence) {
            auto ln = calibration::calibrate_lognormal({low, high, confidence});
            return std::make_pair(ln.mu, ln.sigma);
        },
        py::arg("low"), py::arg("high"), py::arg("confidence") = 0.9);
    m.def(
        "lognormal_quantile",
        [](double mu, double sigma, double p) { return calibration::quantile(calibration::Lognormal{mu, sigma}, p); },
        py::arg("mu"), py::arg("sigma"), py::arg("p"));

    m.def("simulate_portfolio", &simulate_portfolio, py::arg("registry"), py::arg("portfolio"), py::arg("trials"),
          py::arg("seed"), py::arg("confidences") = std::nullopt, py::arg("threads") = 0);
    m.def("rank_controls", &rank_controls, py::arg("registry"), py::arg("portfolio"), py::arg("scenario_id"),
          py::arg("trials"), py::arg("seed"), py::arg("threads") = 0);
    m.def("classify_incidents", &classify_incidents, py::arg("registry"), py::arg("path"),
          py::arg("reference_labels") = false);
    m.def("render_report", &render_report, py::arg("registry"), py::arg("portfolio"), py::arg("format"),
          py::arg("trials"), py::arg("seed"), py::arg("generated_at") = std::nullopt);

    py::class_<api::Service>(m, "Service")
        .def(py::init([](const RegistryPtr& registry, std::size_t max_trials, std::size_t default_trials) {
                 api::ServiceOptions o;
                 o.max_trials = max_trials;
                 o.default_trials = default_trials;
                 return std::make_unique<api::Service>(registry, o);
             }),
             py::arg("registry"), py::arg("max_trials") = 1'000'000, py::arg("default_trials") = 100'000)
        .def(
            "handle",
            [](api::Service& s, std::string method, std::string path, std::string body,
               std::map<std::string, std::string> headers) {
                api::Response r;
                {
                    py::gil_scoped_release release;
                    r = s.handle(api::Request{std::move(method), std::move(path), std::move(body), std::move(headers)});
                }
                return py::make_tuple(r.status, r.body, r.headers);
            },
            py::arg("method"), py::arg("path"), py::arg("body") = "",
            py::arg("headers") = std::map<std::string, std::string>{});
}
