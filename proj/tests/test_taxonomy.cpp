#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "airisk/error.hpp"
#include "airisk/taxonomy.hpp"
#include "support.hpp"

using namespace airisk;
using namespace airisk::taxonomy;
using nlohmann::json;

namespace {

json bundled() { return test::read_json(test::data_dir() / "taxonomy.json"); }

std::vector<std::string> violations_of(const json& doc) {
    try {
        registry_from_json(doc);
    } catch (const ValidationError& e) {
        return e.violations();
    }
    return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
    return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("bundled registry has the canonical shape") {
    const auto& reg = test::registry();
    CHECK(reg.domains().size() == 9);
    CHECK(reg.sub_threat_count() == 53);
    CHECK(reg.version() == "2025.11-1");
    for (std::size_t i = 0; i < kCanonicalDomains.size(); ++i) {
        CHECK(reg.domains()[i].name == kCanonicalDomains[i].name);
        CHECK(reg.domains()[i].sub_threats.size() == kCanonicalDomains[i].sub_threat_count);
    }
    for (const auto& d : reg.domains()) {
        CHECK_FALSE(d.loss_categories.empty());
        for (const auto& st : d.sub_threats) {
            CHECK(st.domain_id == d.id);
            CHECK(reg.domain_of(st.id).id == d.id);
            CHECK_FALSE(st.lifecycle_phases.empty());
        }
    }
}

TEST_CASE("loss mapping per domain") {
    const auto& reg = test::registry();
    CHECK(reg.loss_categories_for("privacy") ==
          std::set<LossCategory>{LossCategory::Confidentiality, LossCategory::Legal});
    CHECK(reg.loss_categories_for("ip_threat") == std::set<LossCategory>{LossCategory::Confidentiality});
    CHECK_THROWS_AS(reg.loss_categories_for("nope"), UnknownId);
    CHECK_THROWS_AS(reg.sub_threat("nope"), UnknownId);
    CHECK_THROWS_AS(reg.domain_of("nope"), UnknownId);
}

TEST_CASE("anchors") {
    const auto& reg = test::registry();
    auto biases = reg.anchors_for("biases");
    REQUIRE(biases.size() == 2);
    CHECK(biases[0].framework == Framework::NistAiRmf);
    CHECK(biases[0].reference == "MEASURE 2.11");
    CHECK(biases[1].framework == Framework::Iso42001);
    CHECK(biases[1].reference == "6.2.2");
    CHECK(reg.anchors_for("adversarial").empty());
    CHECK_THROWS_AS(reg.anchors_for("nope"), UnknownId);
    REQUIRE(reg.portfolio_anchors().size() == 3);
    for (const auto& a : reg.portfolio_anchors()) CHECK(a.framework == Framework::EuAiAct);
}

TEST_CASE("reference syntax") {
    CHECK(is_valid_reference(Framework::NistAiRmf, "GOVERN 1.5"));
    CHECK(is_valid_reference(Framework::NistAiRmf, "MEASURE 2.11"));
    CHECK_FALSE(is_valid_reference(Framework::NistAiRmf, "GOVERN1.5"));
    CHECK_FALSE(is_valid_reference(Framework::NistAiRmf, "govern 1.5"));
    CHECK_FALSE(is_valid_reference(Framework::NistAiRmf, "PLAN 1.1"));
    CHECK(is_valid_reference(Framework::Iso42001, "6.2.2"));
    CHECK_FALSE(is_valid_reference(Framework::Iso42001, "6..2"));
    CHECK(is_valid_reference(Framework::EuAiAct, "Art. 9"));
    CHECK_FALSE(is_valid_reference(Framework::EuAiAct, "Article 9"));
}

TEST_CASE("duplicate sub-threat id is rejected") {
    auto doc = bundled();
    doc["domains"][1]["sub_threats"][0]["id"] = "prompt_injection";
    auto v = violations_of(doc);
    CHECK(any_contains(v, "duplicate sub-threat id 'prompt_injection'"));
}

TEST_CASE("every violation is reported, not just the first") {
    auto doc = bundled();
    doc["domains"][0]["loss_categories"] = json::array();
    doc["domains"][2]["sub_threats"][0]["lifecycle_phases"] = json::array();
    doc["crosswalk"]["misuse"][0]["reference"] = "GOVERN-1.5";
    auto v = violations_of(doc);
    CHECK(any_contains(v, "empty loss category set"));
    CHECK(any_contains(v, "no lifecycle phases"));
    CHECK(any_contains(v, "is not a valid"));
    CHECK(v.size() >= 3);
}

TEST_CASE("structural checks") {
    SUBCASE("missing domain") {
        auto doc = bundled();
        doc["domains"].erase(8);
        auto v = violations_of(doc);
        CHECK(any_contains(v, "expected 9 domains, found 8"));
        CHECK(any_contains(v, "expected 53 sub-threats in total, found 48"));
    }
    SUBCASE("renamed domain") {
        auto doc = bundled();
        doc["domains"][3]["name"] = "Evasion";
        CHECK(any_contains(violations_of(doc), "expected 'Adversarial'"));
    }
    SUBCASE("sub-threat in wrong domain") {
        auto doc = bundled();
        doc["domains"][0]["sub_threats"][0]["domain_id"] = "privacy";
        CHECK(any_contains(violations_of(doc), "is nested under 'misuse'"));
    }
    SUBCASE("crosswalk keyed by unknown domain") {
        auto doc = bundled();
        doc["crosswalk"]["robotics"] = json::array();
        CHECK(any_contains(violations_of(doc), "'robotics' is not a domain id"));
    }
    SUBCASE("uppercase keyword") {
        auto doc = bundled();
        doc["domains"][0]["sub_threats"][0]["keywords"][0] = "Prompt";
        CHECK(any_contains(violations_of(doc), "non-empty lowercase"));
    }
}

TEST_CASE("schema errors") {
    SUBCASE("unknown top-level key") {
        auto doc = bundled();
        doc["extra"] = 1;
        CHECK_THROWS_AS(registry_from_json(doc), SchemaError);
    }
    SUBCASE("unknown loss category") {
        auto doc = bundled();
        doc["domains"][0]["loss_categories"][0] = "Financial";
        CHECK_THROWS_AS(registry_from_json(doc), SchemaError);
    }
    SUBCASE("wrong type") {
        auto doc = bundled();
        doc["domains"][0]["sub_threats"] = "none";
        CHECK_THROWS_AS(registry_from_json(doc), SchemaError);
    }
    SUBCASE("not json") {
        std::istringstream in("{ not json");
        CHECK_THROWS_AS(load_registry(in), SchemaError);
    }
}

TEST_CASE("json round trip") {
    const auto& reg = test::registry();
    auto again = registry_from_json(to_json(reg));
    CHECK(again == reg);
    CHECK(to_json(again) == to_json(reg));
}

TEST_CASE("query equals brute-force filtering") {
    const auto& reg = test::registry();
    std::vector<std::optional<std::string>> domains{std::nullopt};
    for (const auto& d : reg.domains()) domains.push_back(d.id);
    std::vector<std::optional<LifecyclePhase>> phases{std::nullopt};
    for (auto p : kAllLifecyclePhases) phases.push_back(p);
    std::vector<std::optional<LossCategory>> losses{std::nullopt};
    for (auto c : kAllLossCategories) losses.push_back(c);
    std::vector<std::optional<TemporalPattern>> temporals{std::nullopt, TemporalPattern::DiscreteEvent,
                                                          TemporalPattern::ContinuousDegradation};
    std::size_t combos = 0;
    for (const auto& d : domains)
        for (const auto& p : phases)
            for (const auto& l : losses)
                for (const auto& t : temporals) {
                    std::vector<std::string> expected;
                    for (const auto& dom : reg.domains())
                        for (const auto& st : dom.sub_threats) {
                            if (d && dom.id != *d) continue;
                            if (p && !st.lifecycle_phases.count(*p)) continue;
                            if (l && !dom.loss_categories.count(*l)) continue;
                            if (t && st.temporal_pattern != *t) continue;
                            expected.push_back(st.id);
                        }
                    std::vector<std::string> got;
                    for (const auto& st : reg.query({d, p, l, t})) got.push_back(st.id);
                    CHECK(got == expected);
                    ++combos;
                }
    CHECK(combos == 10 * 5 * 6 * 3);
    CHECK(reg.query({}).size() == 53);
}

TEST_CASE("with_loss_categories revalidates") {
    const auto& reg = test::registry();
    auto changed = reg.with_loss_categories("drift", {LossCategory::Availability});
    CHECK(changed.loss_categories_for("drift") == std::set<LossCategory>{LossCategory::Availability});
    CHECK(reg.loss_categories_for("drift").size() == 2);
    CHECK_THROWS_AS(reg.with_loss_categories("drift", {}), ValidationError);
    CHECK_THROWS_AS(reg.with_loss_categories("nope", {LossCategory::Legal}), UnknownId);
}

TEST_CASE("enum spellings round trip") {
    for (auto c : kAllLossCategories) CHECK(parse_loss_category(to_string(c)) == c);
    for (auto p : kAllLifecyclePhases) CHECK(parse_lifecycle_phase(to_string(p)) == p);
    for (auto f : {Framework::NistAiRmf, Framework::Iso42001, Framework::EuAiAct})
        CHECK(parse_framework(to_string(f)) == f);
    CHECK_FALSE(parse_loss_category("legal").has_value());
}

TEST_CASE("registry path honours AIRISK_REGISTRY") {
    ::setenv("AIRISK_REGISTRY", "/tmp/custom-taxonomy.json", 1);
    CHECK(default_registry_path() == std::filesystem::path("/tmp/custom-taxonomy.json"));
    ::unsetenv("AIRISK_REGISTRY");
    CHECK(default_registry_path().filename() == "taxonomy.json");
}
