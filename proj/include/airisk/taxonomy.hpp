#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace airisk::taxonomy {

/// CIA-L-R business loss categories.
enum class LossCategory { Confidentiality, Integrity, Availability, Legal, Reputation };

inline constexpr std::array<LossCategory, 5> kAllLossCategories{
    LossCategory::Confidentiality, LossCategory::Integrity, LossCategory::Availability,
    LossCategory::Legal, LossCategory::Reputation};

enum class LifecyclePhase { DataCollection, ModelTraining, Deployment, Operations };

inline constexpr std::array<LifecyclePhase, 4> kAllLifecyclePhases{
    LifecyclePhase::DataCollection, LifecyclePhase::ModelTraining, LifecyclePhase::Deployment,
    LifecyclePhase::Operations};

enum class TemporalPattern { DiscreteEvent, ContinuousDegradation };
enum class ImpactProfile { Bounded, HeavyTailed };
enum class Framework { NistAiRmf, Iso42001, EuAiAct };

std::string_view to_string(LossCategory c);
std::string_view to_string(LifecyclePhase p);
std::string_view to_string(TemporalPattern t);
std::string_view to_string(ImpactProfile i);
std::string_view to_string(Framework f);

// Parsers return nullopt on unknown spelling; spellings are exactly the to_string forms.
std::optional<LossCategory> parse_loss_category(std::string_view s);
std::optional<LifecyclePhase> parse_lifecycle_phase(std::string_view s);
std::optional<TemporalPattern> parse_temporal_pattern(std::string_view s);
std::optional<ImpactProfile> parse_impact_profile(std::string_view s);
std::optional<Framework> parse_framework(std::string_view s);

struct SubThreat {
    std::string id;
    std::string name;
    std::string domain_id;
    TemporalPattern temporal_pattern{TemporalPattern::DiscreteEvent};
    ImpactProfile impact_profile{ImpactProfile::Bounded};
    std::set<LifecyclePhase> lifecycle_phases;
    std::vector<std::string> keywords;

    bool operator==(const SubThreat&) const = default;
};

struct ThreatDomain {
    std::string id;
    std::string name;
    std::string description;
    std::set<LossCategory> loss_categories;
    std::string prevalence_note;
    std::vector<SubThreat> sub_threats;

    bool operator==(const ThreatDomain&) const = default;
};

struct RegulatoryAnchor {
    Framework framework{Framework::NistAiRmf};
    std::string reference;
    std::string note;

    bool operator==(const RegulatoryAnchor&) const = default;
};

/// Checks framework-specific reference syntax: NIST "FUNCTION N.M", ISO dotted
/// control number, EU "Art. N".
bool is_valid_reference(Framework framework, std::string_view reference);

/// Conjunctive filter for `TaxonomyRegistry::query`; unset fields match everything.
struct SubThreatFilter {
    std::optional<std::string> domain_id;
    std::optional<LifecyclePhase> lifecycle_phase;
    std::optional<LossCategory> loss_category;
    std::optional<TemporalPattern> temporal_pattern;
};

/// Names and per-domain sub-threat counts the canonical taxonomy must carry, in order.
struct CanonicalDomain {
    std::string_view name;
    std::size_t sub_threat_count;
};

inline constexpr std::array<CanonicalDomain, 9> kCanonicalDomains{{
    {"Misuse", 7},
    {"Poisoning", 8},
    {"Privacy", 5},
    {"Adversarial", 8},
    {"Biases", 5},
    {"Unreliable Outputs", 5},
    {"Drift", 5},
    {"Supply Chain", 5},
    {"IP Threat", 5},
}};

inline constexpr std::size_t kCanonicalSubThreatCount = 53;

/// The validated threat ontology. Immutable once constructed; every accessor is
/// const and safe for concurrent readers.
class TaxonomyRegistry {
public:
    /// Validates every invariant and throws ValidationError listing all violations.
    TaxonomyRegistry(std::string version, std::vector<ThreatDomain> domains,
                     std::map<std::string, std::vector<RegulatoryAnchor>> crosswalk,
                     std::vector<RegulatoryAnchor> portfolio_anchors = {});

    const std::string& version() const noexcept { return version_; }
    const std::vector<ThreatDomain>& domains() const noexcept { return domains_; }
    const std::map<std::string, std::vector<RegulatoryAnchor>>& crosswalk() const noexcept {
        return crosswalk_;
    }
    /// Anchors that apply at portfolio level (EU AI Act articles for high-risk systems).
    const std::vector<RegulatoryAnchor>& portfolio_anchors() const noexcept {
        return portfolio_anchors_;
    }

    std::size_t sub_threat_count() const noexcept { return sub_threat_index_.size(); }

    const ThreatDomain& domain(std::string_view domain_id) const;
    const ThreatDomain& domain_of(std::string_view sub_threat_id) const;
    const SubThreat& sub_threat(std::string_view sub_threat_id) const;
    bool has_domain(std::string_view domain_id) const;
    bool has_sub_threat(std::string_view sub_threat_id) const;

    const std::set<LossCategory>& loss_categories_for(std::string_view domain_id) const;
    std::vector<RegulatoryAnchor> anchors_for(std::string_view domain_id) const;

    /// All and only matching sub-threats, in registry order.
    std::vector<SubThreat> query(const SubThreatFilter& filter) const;

    /// Copy of this registry with one domain's loss mapping replaced (revalidated).
    TaxonomyRegistry with_loss_categories(std::string_view domain_id,
                                          std::set<LossCategory> categories) const;

    bool operator==(const TaxonomyRegistry& other) const;

private:
    std::string version_;
    std::vector<ThreatDomain> domains_;
    std::map<std::string, std::vector<RegulatoryAnchor>> crosswalk_;
    std::vector<RegulatoryAnchor> portfolio_anchors_;
    std::unordered_map<std::string, std::size_t> domain_index_;
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> sub_threat_index_;
};

/// Parse and validate a registry document. All-or-nothing: throws SchemaError for
/// malformed input, ValidationError for invariant violations.
TaxonomyRegistry load_registry(std::istream& source);
TaxonomyRegistry load_registry(const std::filesystem::path& path);
TaxonomyRegistry registry_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const TaxonomyRegistry& registry);
nlohmann::json to_json(const ThreatDomain& domain);
nlohmann::json to_json(const RegulatoryAnchor& anchor);

/// Path of the registry shipped with the project. `AIRISK_REGISTRY` overrides it.
std::filesystem::path default_registry_path();

}  // namespace airisk::taxonomy
