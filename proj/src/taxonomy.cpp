#include "airisk/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "airisk/error.hpp"
#include "json_util.hpp"

#ifndef AIRISK_DATA_DIR
#define AIRISK_DATA_DIR "data"
#endif

namespace airisk::taxonomy {

using nlohmann::json;

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(std::string_view s, const std::array<Enum, N>& all) {
    for (auto e : all)
        if (to_string(e) == s) return e;
    return std::nullopt;
}

constexpr std::array<TemporalPattern, 2> kTemporalPatterns{TemporalPattern::DiscreteEvent,
                                                           TemporalPattern::ContinuousDegradation};
constexpr std::array<ImpactProfile, 2> kImpactProfiles{ImpactProfile::Bounded,
                                                       ImpactProfile::HeavyTailed};
constexpr std::array<Framework, 3> kFrameworks{Framework::NistAiRmf, Framework::Iso42001,
                                               Framework::EuAiAct};

}  // namespace

std::string_view to_string(LossCategory c) {
    switch (c) {
        case LossCategory::Confidentiality: return "Confidentiality";
        case LossCategory::Integrity: return "Integrity";
        case LossCategory::Availability: return "Availability";
        case LossCategory::Legal: return "Legal";
        case LossCategory::Reputation: return "Reputation";
    }
    return "?";
}

std::string_view to_string(LifecyclePhase p) {
    switch (p) {
        case LifecyclePhase::DataCollection: return "DataCollection";
        case LifecyclePhase::ModelTraining: return "ModelTraining";
        case LifecyclePhase::Deployment: return "Deployment";
        case LifecyclePhase::Operations: return "Operations";
    }
    return "?";
}

std::string_view to_string(TemporalPattern t) {
    return t == TemporalPattern::DiscreteEvent ? "DiscreteEvent" : "ContinuousDegradation";
}

std::string_view to_string(ImpactProfile i) {
    return i == ImpactProfile::Bounded ? "Bounded" : "HeavyTailed";
}

std::string_view to_string(Framework f) {
    switch (f) {
        case Framework::NistAiRmf: return "NIST_AI_RMF";
        case Framework::Iso42001: return "ISO_42001";
        case Framework::EuAiAct: return "EU_AI_ACT";
    }
    return "?";
}

std::optional<LossCategory> parse_loss_category(std::string_view s) {
    return parse_enum(s, kAllLossCategories);
}
std::optional<LifecyclePhase> parse_lifecycle_phase(std::string_view s) {
    return parse_enum(s, kAllLifecyclePhases);
}
std::optional<TemporalPattern> parse_temporal_pattern(std::string_view s) {
    return parse_enum(s, kTemporalPatterns);
}
std::optional<ImpactProfile> parse_impact_profile(std::string_view s) {
    return parse_enum(s, kImpactProfiles);
}
std::optional<Framework> parse_framework(std::string_view s) { return parse_enum(s, kFrameworks); }

bool is_valid_reference(Framework framework, std::string_view reference) {
    static const std::regex nist{R"(^(GOVERN|MAP|MEASURE|MANAGE) [0-9]+\.[0-9]+$)"};
    static const std::regex iso{R"(^[0-9]+(\.[0-9]+)+$)"};
    static const std::regex eu{R"(^Art\. [0-9]+$)"};
    const std::string ref{reference};
    switch (framework) {
        case Framework::NistAiRmf: return std::regex_match(ref, nist);
        case Framework::Iso42001: return std::regex_match(ref, iso);
        case Framework::EuAiAct: return std::regex_match(ref, eu);
    }
    return false;
}

// ---------------------------------------------------------------------------
// TaxonomyRegistry

TaxonomyRegistry::TaxonomyRegistry(std::string version, std::vector<ThreatDomain> domains,
                                   std::map<std::string, std::vector<RegulatoryAnchor>> crosswalk,
                                   std::vector<RegulatoryAnchor> portfolio_anchors)
    : version_(std::move(version)),
      domains_(std::move(domains)),
      crosswalk_(std::move(crosswalk)),
      portfolio_anchors_(std::move(portfolio_anchors)) {
    std::vector<std::string> v;

    if (version_.empty()) v.emplace_back("version must be non-empty");

    if (domains_.size() != kCanonicalDomains.size())
        v.push_back(fmt::format("expected {} domains, found {}", kCanonicalDomains.size(),
                                domains_.size()));

    for (std::size_t d = 0; d < domains_.size(); ++d) {
        const auto& dom = domains_[d];
        if (dom.id.empty()) v.push_back(fmt::format("domain #{} has an empty id", d));
        if (!domain_index_.emplace(dom.id, d).second)
            v.push_back(fmt::format("duplicate domain id '{}'", dom.id));
        if (dom.loss_categories.empty())
            v.push_back(fmt::format("domain '{}' has an empty loss category set", dom.id));
        if (dom.sub_threats.empty())
            v.push_back(fmt::format("domain '{}' has no sub-threats", dom.id));

        if (d < kCanonicalDomains.size()) {
            const auto& canon = kCanonicalDomains[d];
            if (dom.name != canon.name)
                v.push_back(fmt::format("domain #{} is named '{}', expected '{}'", d + 1, dom.name,
                                        canon.name));
            if (dom.sub_threats.size() != canon.sub_threat_count)
                v.push_back(fmt::format("domain '{}' has {} sub-threats, expected {}", dom.id,
                                        dom.sub_threats.size(), canon.sub_threat_count));
        }

        for (std::size_t s = 0; s < dom.sub_threats.size(); ++s) {
            const auto& st = dom.sub_threats[s];
            if (st.id.empty())
                v.push_back(fmt::format("sub-threat #{} of '{}' has an empty id", s, dom.id));
            if (st.domain_id != dom.id)
                v.push_back(fmt::format("sub-threat '{}' lists domain '{}' but is nested under '{}'",
                                        st.id, st.domain_id, dom.id));
            if (st.lifecycle_phases.empty())
                v.push_back(fmt::format("sub-threat '{}' has no lifecycle phases", st.id));
            for (const auto& kw : st.keywords) {
                bool lower = std::none_of(kw.begin(), kw.end(),
                                          [](unsigned char c) { return std::isupper(c); });
                if (kw.empty() || !lower)
                    v.push_back(fmt::format("sub-threat '{}' keyword '{}' must be non-empty lowercase",
                                            st.id, kw));
            }
            if (!sub_threat_index_.emplace(st.id, std::pair{d, s}).second)
                v.push_back(fmt::format("duplicate sub-threat id '{}'", st.id));
        }
    }

    if (sub_threat_index_.size() != kCanonicalSubThreatCount) {
        std::size_t total = 0;
        for (const auto& dom : domains_) total += dom.sub_threats.size();
        v.push_back(fmt::format("expected {} sub-threats in total, found {}",
                                kCanonicalSubThreatCount, total));
    }

    auto check_anchor = [&](const RegulatoryAnchor& a, const std::string& where) {
        if (a.reference.empty())
            v.push_back(fmt::format("{}: anchor reference must be non-empty", where));
        else if (!is_valid_reference(a.framework, a.reference))
            v.push_back(fmt::format("{}: '{}' is not a valid {} reference", where, a.reference,
                                    to_string(a.framework)));
    };
    for (const auto& [domain_id, anchors] : crosswalk_) {
        if (!domain_index_.count(domain_id))
            v.push_back(fmt::format("crosswalk key '{}' is not a domain id", domain_id));
        for (const auto& a : anchors) check_anchor(a, "crosswalk/" + domain_id);
    }
    for (const auto& a : portfolio_anchors_) check_anchor(a, "portfolio_anchors");

    if (!v.empty()) throw ValidationError(std::move(v));
}

bool TaxonomyRegistry::has_domain(std::string_view domain_id) const {
    return domain_index_.count(std::string{domain_id}) > 0;
}

bool TaxonomyRegistry::has_sub_threat(std::string_view sub_threat_id) const {
    return sub_threat_index_.count(std::string{sub_threat_id}) > 0;
}

const ThreatDomain& TaxonomyRegistry::domain(std::string_view domain_id) const {
    auto it = domain_index_.find(std::string{domain_id});
    if (it == domain_index_.end()) throw UnknownId(std::string{domain_id});
    return domains_[it->second];
}

const ThreatDomain& TaxonomyRegistry::domain_of(std::string_view sub_threat_id) const {
    auto it = sub_threat_index_.find(std::string{sub_threat_id});
    if (it == sub_threat_index_.end()) throw UnknownId(std::string{sub_threat_id});
    return domains_[it->second.first];
}

const SubThreat& TaxonomyRegistry::sub_threat(std::string_view sub_threat_id) const {
    auto it = sub_threat_index_.find(std::string{sub_threat_id});
    if (it == sub_threat_index_.end()) throw UnknownId(std::string{sub_threat_id});
    return domains_[it->second.first].sub_threats[it->second.second];
}

const std::set<LossCategory>& TaxonomyRegistry::loss_categories_for(std::string_view domain_id) const {
    return domain(domain_id).loss_categories;
}

std::vector<RegulatoryAnchor> TaxonomyRegistry::anchors_for(std::string_view domain_id) const {
    const auto& dom = domain(domain_id);
    auto it = crosswalk_.find(dom.id);
    if (it == crosswalk_.end()) return {};
    return it->second;
}

std::vector<SubThreat> TaxonomyRegistry::query(const SubThreatFilter& filter) const {
    std::vector<SubThreat> out;
    for (const auto& dom : domains_) {
        if (filter.domain_id && *filter.domain_id != dom.id) continue;
        if (filter.loss_category && !dom.loss_categories.count(*filter.loss_category)) continue;
        for (const auto& st : dom.sub_threats) {
            if (filter.lifecycle_phase && !st.lifecycle_phases.count(*filter.lifecycle_phase))
                continue;
            if (filter.temporal_pattern && st.temporal_pattern != *filter.temporal_pattern) continue;
            out.push_back(st);
        }
    }
    return out;
}

TaxonomyRegistry TaxonomyRegistry::with_loss_categories(std::string_view domain_id,
                                                        std::set<LossCategory> categories) const {
    auto domains = domains_;
    auto it = std::find_if(domains.begin(), domains.end(),
                           [&](const ThreatDomain& d) { return d.id == domain_id; });
    if (it == domains.end()) throw UnknownId(std::string{domain_id});
    it->loss_categories = std::move(categories);
    return TaxonomyRegistry(version_, std::move(domains), crosswalk_, portfolio_anchors_);
}

bool TaxonomyRegistry::operator==(const TaxonomyRegistry& other) const {
    return version_ == other.version_ && domains_ == other.domains_ &&
           crosswalk_ == other.crosswalk_ && portfolio_anchors_ == other.portfolio_anchors_;
}

// ---------------------------------------------------------------------------
// Document parsing

namespace {

using detail::get_string;
using detail::get_string_or;
using detail::reject_unknown_keys;
using detail::require_array;
using detail::require_object;

template <typename Enum>
Enum parse_or_throw(const json& j, std::optional<Enum> (*parse)(std::string_view),
                    const std::string& path, const char* what) {
    if (!j.is_string()) throw SchemaError(path + ": expected string");
    auto e = parse(j.get_ref<const std::string&>());
    if (!e) throw SchemaError(path + ": unknown " + what + " '" + j.get<std::string>() + "'");
    return *e;
}

RegulatoryAnchor parse_anchor(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, {"framework", "reference", "note"}, path);
    RegulatoryAnchor a;
    a.framework = parse_or_throw<Framework>(detail::field(j, "framework", path), parse_framework,
                                            path + "/framework", "framework");
    a.reference = get_string(j, "reference", path);
    a.note = get_string_or(j, "note", path, "");
    return a;
}

SubThreat parse_sub_threat(const json& j, const std::string& path, const std::string& domain_id) {
    require_object(j, path);
    reject_unknown_keys(j, {"id", "name", "temporal_pattern", "impact_profile", "lifecycle_phases",
                            "keywords", "domain_id"},
                        path);
    SubThreat st;
    st.id = get_string(j, "id", path);
    st.name = get_string(j, "name", path);
    st.domain_id = get_string_or(j, "domain_id", path, domain_id);
    st.temporal_pattern = parse_or_throw<TemporalPattern>(
        detail::field(j, "temporal_pattern", path), parse_temporal_pattern,
        path + "/temporal_pattern", "temporal pattern");
    st.impact_profile =
        parse_or_throw<ImpactProfile>(detail::field(j, "impact_profile", path), parse_impact_profile,
                                      path + "/impact_profile", "impact profile");
    const auto& phases = require_array(detail::field(j, "lifecycle_phases", path),
                                       path + "/lifecycle_phases");
    for (std::size_t i = 0; i < phases.size(); ++i)
        st.lifecycle_phases.insert(parse_or_throw<LifecyclePhase>(
            phases[i], parse_lifecycle_phase, fmt::format("{}/lifecycle_phases/{}", path, i),
            "lifecycle phase"));
    if (j.contains("keywords")) {
        const auto& kws = require_array(j.at("keywords"), path + "/keywords");
        for (std::size_t i = 0; i < kws.size(); ++i) {
            if (!kws[i].is_string())
                throw SchemaError(fmt::format("{}/keywords/{}: expected string", path, i));
            st.keywords.push_back(kws[i].get<std::string>());
        }
    }
    return st;
}

ThreatDomain parse_domain(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, {"id", "name", "description", "loss_categories", "prevalence_note",
                            "sub_threats"},
                        path);
    ThreatDomain d;
    d.id = get_string(j, "id", path);
    d.name = get_string(j, "name", path);
    d.description = get_string_or(j, "description", path, "");
    d.prevalence_note = get_string_or(j, "prevalence_note", path, "");
    const auto& cats =
        require_array(detail::field(j, "loss_categories", path), path + "/loss_categories");
    for (std::size_t i = 0; i < cats.size(); ++i)
        d.loss_categories.insert(parse_or_throw<LossCategory>(
            cats[i], parse_loss_category, fmt::format("{}/loss_categories/{}", path, i),
            "loss category"));
    const auto& subs = require_array(detail::field(j, "sub_threats", path), path + "/sub_threats");
    for (std::size_t i = 0; i < subs.size(); ++i)
        d.sub_threats.push_back(
            parse_sub_threat(subs[i], fmt::format("{}/sub_threats/{}", path, i), d.id));
    return d;
}

}  // namespace

TaxonomyRegistry registry_from_json(const json& doc) {
    require_object(doc, "");
    reject_unknown_keys(doc, {"$schema", "schema_version", "taxonomy_version", "domains",
                              "crosswalk", "portfolio_anchors"},
                        "");
    auto version = get_string(doc, "taxonomy_version", "");

    std::vector<ThreatDomain> domains;
    const auto& ds = require_array(detail::field(doc, "domains", ""), "/domains");
    for (std::size_t i = 0; i < ds.size(); ++i)
        domains.push_back(parse_domain(ds[i], fmt::format("/domains/{}", i)));

    std::map<std::string, std::vector<RegulatoryAnchor>> crosswalk;
    if (doc.contains("crosswalk")) {
        const auto& cw = require_object(doc.at("crosswalk"), "/crosswalk");
        for (const auto& [key, anchors] : cw.items()) {
            auto path = "/crosswalk/" + key;
            require_array(anchors, path);
            auto& list = crosswalk[key];
            for (std::size_t i = 0; i < anchors.size(); ++i)
                list.push_back(parse_anchor(anchors[i], fmt::format("{}/{}", path, i)));
        }
    }

    std::vector<RegulatoryAnchor> portfolio_anchors;
    if (doc.contains("portfolio_anchors")) {
        const auto& pa = require_array(doc.at("portfolio_anchors"), "/portfolio_anchors");
        for (std::size_t i = 0; i < pa.size(); ++i)
            portfolio_anchors.push_back(parse_anchor(pa[i], fmt::format("/portfolio_anchors/{}", i)));
    }

    return TaxonomyRegistry(std::move(version), std::move(domains), std::move(crosswalk),
                            std::move(portfolio_anchors));
}

TaxonomyRegistry load_registry(std::istream& source) {
    json doc;
    try {
        doc = json::parse(source);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("registry is not valid JSON: ") + e.what());
    }
    return registry_from_json(doc);
}

TaxonomyRegistry load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open registry file " + path.string());
    return load_registry(in);
}

std::filesystem::path default_registry_path() {
    if (const char* env = std::getenv("AIRISK_REGISTRY"); env && *env) return env;
    return std::filesystem::path(AIRISK_DATA_DIR) / "taxonomy.json";
}

json to_json(const RegulatoryAnchor& a) {
    return json{{"framework", to_string(a.framework)},
                {"reference", a.reference},
                {"note", a.note}};
}

json to_json(const ThreatDomain& d) {
    json cats = json::array();
    for (auto c : d.loss_categories) cats.push_back(to_string(c));
    json subs = json::array();
    for (const auto& st : d.sub_threats) {
        json phases = json::array();
        for (auto p : st.lifecycle_phases) phases.push_back(to_string(p));
        subs.push_back(json{{"id", st.id},
                            {"name", st.name},
                            {"temporal_pattern", to_string(st.temporal_pattern)},
                            {"impact_profile", to_string(st.impact_profile)},
                            {"lifecycle_phases", phases},
                            {"keywords", st.keywords}});
    }
    return json{{"id", d.id},
                {"name", d.name},
                {"description", d.description},
                {"loss_categories", cats},
                {"prevalence_note", d.prevalence_note},
                {"sub_threats", subs}};
}

json to_json(const TaxonomyRegistry& r) {
    json domains = json::array();
    for (const auto& d : r.domains()) domains.push_back(to_json(d));
    json crosswalk = json::object();
    for (const auto& [id, anchors] : r.crosswalk()) {
        json list = json::array();
        for (const auto& a : anchors) list.push_back(to_json(a));
        crosswalk[id] = list;
    }
    json pa = json::array();
    for (const auto& a : r.portfolio_anchors()) pa.push_back(to_json(a));
    return json{{"schema_version", "1.0"},
                {"taxonomy_version", r.version()},
                {"domains", domains},
                {"crosswalk", crosswalk},
                {"portfolio_anchors", pa}};
}

}  // namespace airisk::taxonomy
