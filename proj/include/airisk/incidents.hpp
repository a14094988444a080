#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "airisk/taxonomy.hpp"

namespace airisk::incidents {

/// Where a record landed. `Unattributed` is for records known to be classified
/// into some domain whose identity the source does not disclose.
struct Assignment {
    enum class Kind { Domain, Unclassified, Unattributed };
    Kind kind{Kind::Unclassified};
    std::string domain_id;  // set iff kind == Domain

    static Assignment domain(std::string id) { return {Kind::Domain, std::move(id)}; }
    static Assignment unclassified() { return {Kind::Unclassified, {}}; }
    static Assignment unattributed() { return {Kind::Unattributed, {}}; }

    /// Domain id, "unclassified" or "other_unattributed".
    std::string label() const;

    bool operator==(const Assignment&) const = default;
};

inline constexpr const char* kUnclassifiedLabel = "unclassified";
inline constexpr const char* kUnattributedLabel = "other_unattributed";

struct IncidentRecord {
    std::string id;
    std::string date;
    std::string title;
    std::string description;
    std::optional<std::string> source_url;
    /// Curated label carried by fixture files; not used by the classifier.
    std::optional<std::string> reference_label;
    std::optional<Assignment> classified_domain;  // unset until classified
    std::vector<std::string> matched_keywords;

    bool operator==(const IncidentRecord&) const = default;
};

/// CSV with a header row naming at least `id` and `description` (also accepted:
/// date, title, source_url, label). Throws SchemaError naming the 1-based data row.
std::vector<IncidentRecord> ingest_csv(std::istream& in);
/// JSON array of objects, or an object with a "records" array (plus optional "metadata").
std::vector<IncidentRecord> ingest_json(std::istream& in);
/// Dispatches on the file extension (.csv / .json).
std::vector<IncidentRecord> ingest(const std::filesystem::path& path);

/// Keyword classifier over registry vocabulary. Sub-threat names score 2, auxiliary
/// keywords 1; case-insensitive whole-phrase matching on punctuation-normalised text.
/// Highest domain score wins, ties go to the earlier domain, zero is Unclassified.
class Classifier {
public:
    explicit Classifier(const taxonomy::TaxonomyRegistry& registry);

    IncidentRecord classify(IncidentRecord record) const;

    struct DomainScore {
        std::string domain_id;
        int score{0};
        std::vector<std::string> matched;
    };
    /// Per-domain scores in registry order.
    std::vector<DomainScore> score(const std::string& description) const;

private:
    struct Phrase {
        std::string text;  // normalised, space padded
        std::string keyword;
        int weight;
    };
    struct DomainVocabulary {
        std::string domain_id;
        std::vector<Phrase> phrases;
    };
    std::vector<DomainVocabulary> vocab_;
};

IncidentRecord classify(IncidentRecord record, const taxonomy::TaxonomyRegistry& registry);

/// Lowercase, punctuation to spaces, single-spaced, padded with one space each side.
std::string normalize_text(const std::string& text);

/// Sets classified_domain from reference labels (domain id, "unclassified" or
/// "other_unattributed"). Throws SchemaError for a missing or unknown label.
std::vector<IncidentRecord> apply_reference_labels(std::vector<IncidentRecord> records,
                                                   const taxonomy::TaxonomyRegistry& registry);

struct Share {
    std::size_t count{0};
    double share{0.0};
};

struct DomainPrevalence {
    std::string domain_id;
    std::string name;
    Share share;
};

struct PrevalenceReport {
    std::size_t total{0};
    std::vector<DomainPrevalence> per_domain;  // registry order, zero counts included
    Share unattributed;
    Share unclassified;
    double coverage{1.0};  // share not Unclassified
    bool empty_input{false};
};

/// Exact counts and shares. Every record must already be classified.
PrevalenceReport prevalence(const std::vector<IncidentRecord>& records,
                            const taxonomy::TaxonomyRegistry& registry);

nlohmann::json to_json(const PrevalenceReport& report);
std::string to_markdown(const PrevalenceReport& report);
nlohmann::json to_json(const IncidentRecord& record);

}  // namespace airisk::incidents
