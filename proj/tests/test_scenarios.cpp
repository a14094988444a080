#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "airisk/engine.hpp"
#include "airisk/error.hpp"
#include "airisk/scenarios.hpp"
#include "support.hpp"

using namespace airisk;
using namespace airisk::scenarios;
using namespace airisk::calibration;
using nlohmann::json;

namespace {

std::vector<std::string> codes(const std::vector<Finding>& fs) {
    std::vector<std::string> out;
    for (const auto& f : fs) out.push_back(f.code);
    return out;
}

bool has(const std::vector<Finding>& fs, const std::string& code, const std::string& path = "") {
    return std::any_of(fs.begin(), fs.end(),
                       [&](const Finding& f) { return f.code == code && (path.empty() || f.path == path); });
}

Portfolio sample_portfolio() {
    Portfolio p;
    p.id = "sample";
    p.taxonomy_version = test::registry().version();
    p.scenarios.push_back(test::compound("injection", 2.0, 9.0, 1.0));
    p.scenarios.push_back(test::scenario("drift", "concept_drift", Bernoulli{0.3},
                                         {{LossCategory::Availability, Pert{100, 1000, 8000}}}));
    p.scenarios.push_back(test::scenario("leak", "personal_data_leakage", NegativeBinomial{1.5, 0.8},
                                         {{LossCategory::Confidentiality, Lognormal{10, 1.2}},
                                          {LossCategory::Legal, Uniform{1000, 50000}}}));
    p.scenarios[0].controls.push_back(test::control("filter", 0.4, 0.1, 2000));
    return p;
}

WorkflowOptions opts(std::size_t n, std::uint64_t seed) {
    WorkflowOptions o;
    o.n_trials = n;
    o.seed = seed;
    return o;
}

}  // namespace

TEST_CASE("valid scenario has no findings") {
    CHECK(validate_portfolio(sample_portfolio(), test::registry()).empty());
}

TEST_CASE("scenario findings") {
    const auto& reg = test::registry();
    SUBCASE("unknown sub-threat") {
        auto s = test::compound("a", 1, 1, 1);
        s.sub_threat_id = "time_travel";
        CHECK(has(validate_scenario(s, reg), "unknown_sub_threat", "/sub_threat_id"));
    }
    SUBCASE("loss category outside the domain mapping") {
        auto s = test::scenario("a", "concept_drift", Poisson{1}, {{LossCategory::Legal, PointMass{5}}});
        auto f = validate_scenario(s, reg, "/scenarios/0");
        REQUIRE(has(f, "loss_category_not_mapped", "/scenarios/0/severities/Legal"));
        CHECK(f[0].message.find("loss category not mapped for domain") != std::string::npos);
    }
    SUBCASE("parameter bound names the field") {
        auto s = test::compound("a", -1, 1, 1);
        auto f = validate_scenario(s, reg);
        REQUIRE(has(f, "invalid_parameter", "/frequency/rate"));
        CHECK(f[0].message == "rate must be >= 0 (got -1)");
    }
    SUBCASE("no severity") {
        auto s = test::scenario("a", "prompt_injection", Poisson{1}, {});
        CHECK(has(validate_scenario(s, reg), "no_severity"));
    }
    SUBCASE("bad controls") {
        auto s = test::compound("a", 1, 1, 1);
        auto c = test::control("c", 1.5, -0.1, -3);
        c.applicable_domains = {"privacy", "nowhere"};
        s.controls = {c, test::control("c", 0, 0, 0)};
        auto f = validate_scenario(s, reg);
        CHECK(has(f, "invalid_parameter", "/controls/0/frequency_reduction"));
        CHECK(has(f, "invalid_parameter", "/controls/0/magnitude_reduction"));
        CHECK(has(f, "invalid_parameter", "/controls/0/annual_cost"));
        CHECK(has(f, "unknown_domain"));
        CHECK(has(f, "inapplicable_control", "/controls/0"));
        CHECK(has(f, "duplicate_id", "/controls/1/id"));
    }
    SUBCASE("all findings at once") {
        auto s = test::scenario("", "prompt_injection", Poisson{-2}, {{LossCategory::Integrity, Lognormal{1, -1}}});
        s.currency_code = "usd";
        auto c = codes(validate_scenario(s, reg));
        for (auto code : {"missing_id", "invalid_currency", "invalid_parameter", "loss_category_not_mapped"})
            CHECK(std::find(c.begin(), c.end(), code) != c.end());
    }
}

TEST_CASE("portfolio findings") {
    const auto& reg = test::registry();
    auto p = sample_portfolio();
    p.scenarios[1].id = "injection";
    p.scenarios[2].currency_code = "EUR";
    p.taxonomy_version = "2024.01-1";
    auto f = validate_portfolio(p, reg);
    CHECK(has(f, "duplicate_id", "/scenarios/1/id"));
    CHECK(has(f, "mixed_currency"));
    auto mismatch = std::find_if(f.begin(), f.end(), [](auto& x) { return x.code == "taxonomy_version_mismatch"; });
    REQUIRE(mismatch != f.end());
    CHECK(mismatch->level == FindingLevel::Warning);

    Portfolio empty{"e", reg.version(), false, {}};
    CHECK(has(validate_portfolio(empty, reg), "empty_portfolio"));
    CHECK_THROWS_AS(run_workflow(empty, reg, opts(10, 1)), ValidationFailed);
}

TEST_CASE("version mismatch alone does not block a run") {
    auto p = sample_portfolio();
    p.taxonomy_version = "2024.01-1";
    CHECK_NOTHROW(run_workflow(p, test::registry(), opts(100, 1)));
}

TEST_CASE("workflow aggregates scenarios and sets the reserve") {
    auto p = sample_portfolio();
    auto r = run_workflow(p, test::registry(), opts(20000, 42));
    REQUIRE(r.scenarios.size() == 3);
    CHECK(r.seed == 42);
    CHECK(r.n_trials == 20000);
    CHECK(r.taxonomy_version == test::registry().version());
    double sum = 0;
    for (const auto& s : r.scenarios) {
        sum += s.metrics.eal;
        CHECK(s.seed == scenario_seed(42, s.scenario_id));
    }
    CHECK(r.portfolio_metrics.eal == doctest::Approx(sum).epsilon(1e-12));
    CHECK(r.reserve.confidence == 0.95);
    CHECK(r.reserve.amount == r.portfolio_metrics.var.at(0.95));
    // no trial can exceed the sum of per-scenario maxima
    double max_sum = 0;
    for (const auto& s : r.scenarios)
        max_sum += *std::max_element(s.trials.losses.begin(), s.trials.losses.end());
    CHECK(r.reserve.amount <= max_sum);
}

TEST_CASE("reserve confidence selection") {
    auto p = sample_portfolio();
    auto o = opts(2000, 1);
    o.confidences = {0.9, 0.975};
    auto r = run_workflow(p, test::registry(), o);
    CHECK(r.reserve.confidence == 0.975);

    o.reserve_confidence = 0.8;
    r = run_workflow(p, test::registry(), o);
    CHECK(r.reserve.confidence == 0.8);
    CHECK(r.portfolio_metrics.var.count(0.8) == 1);
}

TEST_CASE("scenario order does not change any metric") {
    auto p = sample_portfolio();
    const auto base = run_workflow(p, test::registry(), opts(10000, 9));
    std::mt19937_64 gen(3);
    for (int i = 0; i < 5; ++i) {
        std::shuffle(p.scenarios.begin(), p.scenarios.end(), gen);
        auto r = run_workflow(p, test::registry(), opts(10000, 9));
        CHECK(r.portfolio_metrics == base.portfolio_metrics);
        CHECK(r.reserve.amount == base.reserve.amount);
        for (const auto& s : r.scenarios) {
            auto it = std::find_if(base.scenarios.begin(), base.scenarios.end(),
                                   [&](auto& b) { return b.scenario_id == s.scenario_id; });
            CHECK(s.metrics == it->metrics);
        }
    }
}

TEST_CASE("adding a scenario leaves the others untouched") {
    auto p = sample_portfolio();
    auto before = run_workflow(p, test::registry(), opts(5000, 5));
    p.scenarios.push_back(test::compound("extra", 1, 5, 1));
    auto after = run_workflow(p, test::registry(), opts(5000, 5));
    for (std::size_t i = 0; i < before.scenarios.size(); ++i)
        CHECK(before.scenarios[i].trials.losses == after.scenarios[i].trials.losses);
}

TEST_CASE("thread count does not change the portfolio export") {
    auto p = sample_portfolio();
    auto o1 = opts(3 * engine::kTrialBlockSize + 5, 77);
    o1.simulation.threads = 1;
    auto o4 = o1;
    o4.simulation.threads = 4;
    auto a = run_workflow(p, test::registry(), o1);
    auto b = run_workflow(p, test::registry(), o4);
    CHECK(engine::to_csv(a.portfolio_trials) == engine::to_csv(b.portfolio_trials));
}

TEST_CASE("portfolio persistence round trip") {
    auto p = sample_portfolio();
    p.eu_high_risk = true;
    p.scenarios[0].narrative = "Injected instructions in a retrieved page.";
    p.scenarios[0].controls[0].applicable_domains = {"misuse"};
    std::stringstream ss;
    save_portfolio(p, ss);
    auto loaded = load_portfolio(ss, test::registry().version());
    CHECK(loaded.portfolio == p);
    CHECK(loaded.warnings.empty());

    auto dir = std::filesystem::temp_directory_path() / "airisk-test-persist";
    std::filesystem::create_directories(dir);
    auto path = dir / ("sample" + std::string(kPortfolioExtension));
    save_portfolio(p, path);
    CHECK(load_portfolio(path).portfolio == p);
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("version mismatch on load is a warning") {
    auto p = sample_portfolio();
    p.taxonomy_version = "2020.01-1";
    std::stringstream ss;
    save_portfolio(p, ss);
    auto loaded = load_portfolio(ss, std::string("2025.11-1"));
    REQUIRE(loaded.warnings.size() == 1);
    CHECK(loaded.warnings[0].code == "taxonomy_version_mismatch");
}

TEST_CASE("strict document parsing") {
    auto doc = to_json(sample_portfolio());
    SUBCASE("unknown portfolio field") {
        doc["owner"] = "risk team";
        CHECK_THROWS_AS(portfolio_from_json(doc), SchemaError);
    }
    SUBCASE("unknown scenario field") {
        doc["scenarios"][0]["likelihood"] = 3;
        CHECK_THROWS_AS(portfolio_from_json(doc), SchemaError);
    }
    SUBCASE("unknown loss category key") {
        doc["scenarios"][0]["severities"]["Financial"] = doc["scenarios"][0]["severities"]["Legal"];
        CHECK_THROWS_AS(portfolio_from_json(doc), SchemaError);
    }
    SUBCASE("wrong schema version") {
        doc["schema_version"] = "2.0";
        CHECK_THROWS_AS(portfolio_from_json(doc), SchemaError);
    }
    SUBCASE("malformed json") {
        std::istringstream in("{\"id\": ");
        CHECK_THROWS_AS(load_portfolio(in), SchemaError);
    }
}

TEST_CASE("bundled example portfolios load and validate") {
    int n = 0;
    for (const auto& e : std::filesystem::directory_iterator(test::data_dir() / "portfolios")) {
        auto loaded = load_portfolio(e.path(), test::registry().version());
        CHECK(loaded.warnings.empty());
        CHECK_FALSE(has_errors(validate_portfolio(loaded.portfolio, test::registry())));
        ++n;
    }
    CHECK(n >= 3);
}

TEST_CASE("workflow json") {
    auto r = run_workflow(sample_portfolio(), test::registry(), opts(1000, 3));
    auto j = to_json(r, false);
    CHECK(j["seed"] == 3);
    CHECK(j["n_trials"] == 1000);
    CHECK(j["taxonomy_version"] == "2025.11-1");
    CHECK(j["portfolio"]["var"]["0.95"].get<double>() == r.portfolio_metrics.var.at(0.95));
    CHECK_FALSE(j["portfolio"].contains("exceedance_curve"));
    CHECK(to_json(r, true)["portfolio"]["exceedance_curve"].size() == engine::kExceedanceGridPoints);
}
