#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "airisk/error.hpp"
#include "airisk/incidents.hpp"
#include "support.hpp"

using namespace airisk;
using namespace airisk::incidents;

namespace {

std::vector<IncidentRecord> classify_all(std::vector<IncidentRecord> rs) {
    Classifier c(test::registry());
    for (auto& r : rs) r = c.classify(std::move(r));
    return rs;
}

IncidentRecord with_text(std::string text) {
    IncidentRecord r;
    r.id = "x";
    r.description = std::move(text);
    return r;
}

}  // namespace

TEST_CASE("csv ingest handles quoting") {
    auto rs = ingest(test::data_dir() / "incidents" / "synthetic_corpus.csv");
    REQUIRE(rs.size() == 12);
    CHECK(rs[0].id == "syn-001");
    CHECK(rs[0].source_url == "https://example.org/syn-001");
    CHECK_FALSE(rs[1].source_url.has_value());
    CHECK(rs[11].title == "Quoted, \"tricky\" title");
    CHECK(rs[11].description.find('\n') != std::string::npos);
}

TEST_CASE("csv ingest errors name the row") {
    std::istringstream missing("id,description\na,ok\nb,\n");
    try {
        ingest_csv(missing);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()) == "incident CSV row 2 (b): missing description");
    }
    std::istringstream unknown("id,description,severity\n");
    CHECK_THROWS_AS(ingest_csv(unknown), SchemaError);
    std::istringstream ragged("id,description\na,b,c\n");
    CHECK_THROWS_AS(ingest_csv(ragged), SchemaError);
    std::istringstream no_desc_col("id,title\n");
    CHECK_THROWS_AS(ingest_csv(no_desc_col), SchemaError);
    std::istringstream blank_lines("id,description\r\na,text\r\n\r\n");
    CHECK(ingest_csv(blank_lines).size() == 1);
}

TEST_CASE("json ingest") {
    std::istringstream arr(R"([{"id": "a", "description": "prompt injection"}])");
    CHECK(ingest_json(arr).size() == 1);
    std::istringstream missing(R"({"records": [{"id": "a"}]})");
    CHECK_THROWS_AS(ingest_json(missing), SchemaError);
    std::istringstream extra(R"([{"id": "a", "description": "d", "severity": 3}])");
    CHECK_THROWS_AS(ingest_json(extra), SchemaError);
    CHECK_THROWS_AS(ingest(test::data_dir() / "taxonomy.schema.xml"), SchemaError);
}

TEST_CASE("text normalisation") {
    CHECK(normalize_text("Prompt-Injection!!") == " prompt injection ");
    CHECK(normalize_text("  A  b\n c ") == " a b c ");
    CHECK(normalize_text("") == " ");
}

TEST_CASE("synthetic corpus classifications") {
    auto rs = classify_all(ingest(test::data_dir() / "incidents" / "synthetic_corpus.csv"));
    const std::vector<std::string> expected{
        "misuse",   "unreliable_outputs", "misuse",      "supply_chain", "biases",       "drift",
        "poisoning", "privacy",           "adversarial", "ip_threat",    "unclassified", "unreliable_outputs"};
    REQUIRE(rs.size() == expected.size());
    for (std::size_t i = 0; i < rs.size(); ++i) {
        CAPTURE(rs[i].id);
        CHECK(rs[i].classified_domain->label() == expected[i]);
        if (expected[i] != "unclassified")
            CHECK_FALSE(rs[i].matched_keywords.empty());
        else
            CHECK(rs[i].matched_keywords.empty());
    }
}

TEST_CASE("matching is case-insensitive and whole-phrase") {
    Classifier c(test::registry());
    auto a = c.classify(with_text("PROMPT INJECTION in the help desk"));
    auto b = c.classify(with_text("prompt injection in the help desk"));
    CHECK(a.classified_domain == b.classified_domain);
    CHECK(a.classified_domain->domain_id == "misuse");
    CHECK(c.classify(with_text("the weather was pleasant")).classified_domain == Assignment::unclassified());
    CHECK(c.classify(with_text("")).classified_domain == Assignment::unclassified());
    // "drift" must not match inside "driftwood"
    auto scores = c.score("driftwood sculpture");
    for (const auto& s : scores) CHECK(s.score == 0);
}

TEST_CASE("winner is the first domain with the top score") {
    const auto& reg = test::registry();
    Classifier c(reg);
    std::vector<std::string> names;
    for (const auto& d : reg.domains())
        for (const auto& st : d.sub_threats) names.push_back(st.name);
    std::mt19937_64 gen(8);
    for (int i = 0; i < 300; ++i) {
        std::string text;
        const int k = 1 + static_cast<int>(gen() % 4);
        for (int j = 0; j < k; ++j) text += names[gen() % names.size()] + ". ";
        auto scores = c.score(text);
        REQUIRE(scores.size() == 9);
        int best = 0;
        std::string winner;
        for (const auto& s : scores)
            if (s.score > best) {
                best = s.score;
                winner = s.domain_id;
            }
        auto r = c.classify(with_text(text));
        REQUIRE(best > 0);
        CHECK(r.classified_domain->domain_id == winner);
        CHECK(r.classified_domain == c.classify(with_text(text)).classified_domain);
    }
}

TEST_CASE("sub-threat names outweigh single keywords") {
    Classifier c(test::registry());
    auto scores = c.score("membership inference");
    auto privacy = std::find_if(scores.begin(), scores.end(), [](auto& s) { return s.domain_id == "privacy"; });
    CHECK(privacy->score >= 2);
}

TEST_CASE("curated fixture prevalence") {
    const auto& reg = test::registry();
    auto rs = apply_reference_labels(ingest(test::data_dir() / "incidents" / "aiid_2025_labels.json"), reg);
    auto rep = prevalence(rs, reg);
    CHECK(rep.total == 133);
    auto count = [&](const std::string& id) {
        for (const auto& d : rep.per_domain)
            if (d.domain_id == id) return d.share.count;
        return std::size_t{999};
    };
    CHECK(count("misuse") == 81);
    CHECK(count("unreliable_outputs") == 36);
    CHECK(count("supply_chain") == 7);
    CHECK(rep.unattributed.count == 9);
    CHECK(rep.unclassified.count == 0);
    CHECK(rep.coverage == 1.0);
    CHECK(rep.per_domain.size() == 9);
    double total = rep.unattributed.share + rep.unclassified.share;
    for (const auto& d : rep.per_domain) total += d.share.share;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    auto meta = test::read_json(test::data_dir() / "incidents" / "aiid_2025_labels.json")["metadata"];
    CHECK(meta["review_window"]["from"] == "2025-05-30");
    CHECK(meta["review_window"]["to"] == "2025-11-17");
    CHECK(meta["inclusion_window"] == "2019-2025");

    auto md = to_markdown(rep);
    CHECK(md.find("| Misuse | 81 | 0.6090 |") != std::string::npos);
    CHECK(md.find("| Unreliable Outputs | 36 | 0.2707 |") != std::string::npos);
    CHECK(md.find("| Supply Chain | 7 | 0.0526 |") != std::string::npos);
}

TEST_CASE("prevalence edge cases") {
    const auto& reg = test::registry();
    auto empty = prevalence({}, reg);
    CHECK(empty.empty_input);
    CHECK(empty.total == 0);
    CHECK(empty.coverage == 1.0);
    for (const auto& d : empty.per_domain) CHECK(d.share.share == 0.0);

    std::vector<IncidentRecord> raw{with_text("anything")};
    CHECK_THROWS_AS(prevalence(raw, reg), Error);

    raw[0].reference_label = "robotics";
    CHECK_THROWS_AS(apply_reference_labels(raw, reg), SchemaError);
    raw[0].reference_label.reset();
    CHECK_THROWS_AS(apply_reference_labels(raw, reg), SchemaError);
}

TEST_CASE("prevalence json") {
    auto rs = classify_all(ingest(test::data_dir() / "incidents" / "synthetic_corpus.csv"));
    auto j = to_json(prevalence(rs, test::registry()));
    CHECK(j["total"] == 12);
    CHECK(j["unclassified"]["count"] == 1);
    CHECK(j["per_domain"]["misuse"]["count"] == 2);
    CHECK(j["coverage"].get<double>() == doctest::Approx(11.0 / 12.0));
    auto rj = to_json(rs[0]);
    CHECK(rj["classified_domain"] == "misuse");
}
