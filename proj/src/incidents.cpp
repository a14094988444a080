#include "airisk/incidents.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "airisk/error.hpp"
#include "json_util.hpp"

namespace airisk::incidents {

using nlohmann::json;

std::string Assignment::label() const {
    switch (kind) {
        case Kind::Domain: return domain_id;
        case Kind::Unclassified: return kUnclassifiedLabel;
        case Kind::Unattributed: return kUnattributedLabel;
    }
    return kUnclassifiedLabel;
}

// ---------------------------------------------------------------------------
// Ingest

namespace {

// RFC 4180 fields: quoted fields may contain commas, doubled quotes and newlines.
bool read_csv_row(std::istream& in, std::vector<std::string>& row) {
    row.clear();
    std::string field;
    bool in_quotes = false, any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field += '"';
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (!any) return false;
    row.push_back(std::move(field));
    return true;
}

bool blank(const std::vector<std::string>& row) {
    return std::all_of(row.begin(), row.end(), [](const std::string& s) {
        return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
    });
}

std::optional<std::string> non_empty(std::string s) {
    if (s.empty()) return std::nullopt;
    return s;
}

}  // namespace

std::vector<IncidentRecord> ingest_csv(std::istream& in) {
    static const std::set<std::string> known{"id", "date", "title", "description", "source_url", "label"};
    std::vector<std::string> header;
    if (!read_csv_row(in, header)) throw SchemaError("incident CSV is empty (header row required)");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!known.count(header[i])) throw SchemaError("incident CSV: unknown column '" + header[i] + "'");
        col[header[i]] = i;
    }
    if (!col.count("id") || !col.count("description"))
        throw SchemaError("incident CSV header must contain 'id' and 'description'");

    std::vector<IncidentRecord> out;
    std::vector<std::string> row;
    for (std::size_t row_no = 1; read_csv_row(in, row); ++row_no) {
        if (blank(row)) continue;
        if (row.size() != header.size())
            throw SchemaError(fmt::format("incident CSV row {}: expected {} fields, found {}", row_no,
                                          header.size(), row.size()));
        auto get = [&](const char* name) -> std::string {
            auto it = col.find(name);
            return it == col.end() ? std::string{} : row[it->second];
        };
        IncidentRecord r;
        r.id = get("id");
        r.date = get("date");
        r.title = get("title");
        r.description = get("description");
        r.source_url = non_empty(get("source_url"));
        r.reference_label = non_empty(get("label"));
        if (r.id.empty()) throw SchemaError(fmt::format("incident CSV row {}: missing id", row_no));
        if (r.description.empty())
            throw SchemaError(fmt::format("incident CSV row {} ({}): missing description", row_no, r.id));
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<IncidentRecord> ingest_json(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("incident JSON is not valid: ") + e.what());
    }
    const json* rows = &doc;
    if (doc.is_object()) {
        detail::reject_unknown_keys(doc, {"metadata", "records"}, "");
        rows = &detail::field(doc, "records", "");
    }
    detail::require_array(*rows, "/records");

    std::vector<IncidentRecord> out;
    for (std::size_t i = 0; i < rows->size(); ++i) {
        const auto& j = (*rows)[i];
        const auto path = fmt::format("row {}", i + 1);
        detail::require_object(j, path);
        detail::reject_unknown_keys(j, {"id", "date", "title", "description", "source_url", "label"}, path);
        if (!j.contains("description") || !j.at("description").is_string() ||
            j.at("description").get_ref<const std::string&>().empty())
            throw SchemaError(path + ": missing description");
        IncidentRecord r;
        r.id = detail::get_string(j, "id", path);
        r.date = detail::get_string_or(j, "date", path, "");
        r.title = detail::get_string_or(j, "title", path, "");
        r.description = detail::get_string(j, "description", path);
        r.source_url = non_empty(detail::get_string_or(j, "source_url", path, ""));
        r.reference_label = non_empty(detail::get_string_or(j, "label", path, ""));
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<IncidentRecord> ingest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open incident file " + path.string());
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".csv") return ingest_csv(in);
    if (ext == ".json") return ingest_json(in);
    throw UnsupportedFormat(ext.empty() ? path.string() : ext);
}

// ---------------------------------------------------------------------------
// Classification

std::string normalize_text(const std::string& text) {
    std::string out = " ";
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            out += static_cast<char>(std::tolower(c));
        } else if (out.back() != ' ') {
            out += ' ';
        }
    }
    if (out.back() != ' ') out += ' ';
    return out;
}

Classifier::Classifier(const taxonomy::TaxonomyRegistry& registry) {
    for (const auto& d : registry.domains()) {
        DomainVocabulary v{d.id, {}};
        std::map<std::string, std::size_t> seen;  // normalised phrase -> index in v.phrases
        auto add = [&](const std::string& keyword, int weight) {
            auto norm = normalize_text(keyword);
            if (norm.size() <= 2) return;
            auto [it, inserted] = seen.emplace(norm, v.phrases.size());
            if (inserted)
                v.phrases.push_back({norm, keyword, weight});
            else
                v.phrases[it->second].weight = std::max(v.phrases[it->second].weight, weight);
        };
        for (const auto& st : d.sub_threats) {
            add(st.name, 2);
            for (const auto& kw : st.keywords) add(kw, 1);
        }
        vocab_.push_back(std::move(v));
    }
}

std::vector<Classifier::DomainScore> Classifier::score(const std::string& description) const {
    const auto text = normalize_text(description);
    std::vector<DomainScore> out;
    out.reserve(vocab_.size());
    for (const auto& v : vocab_) {
        DomainScore s{v.domain_id, 0, {}};
        for (const auto& p : v.phrases) {
            if (text.find(p.text) != std::string::npos) {
                s.score += p.weight;
                s.matched.push_back(p.keyword);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

IncidentRecord Classifier::classify(IncidentRecord record) const {
    auto scores = score(record.description);
    const DomainScore* best = nullptr;
    for (const auto& s : scores)
        if (s.score > 0 && (!best || s.score > best->score)) best = &s;
    if (best) {
        record.classified_domain = Assignment::domain(best->domain_id);
        record.matched_keywords = best->matched;
    } else {
        record.classified_domain = Assignment::unclassified();
        record.matched_keywords.clear();
    }
    return record;
}

IncidentRecord classify(IncidentRecord record, const taxonomy::TaxonomyRegistry& registry) {
    return Classifier(registry).classify(std::move(record));
}

std::vector<IncidentRecord> apply_reference_labels(std::vector<IncidentRecord> records,
                                                   const taxonomy::TaxonomyRegistry& registry) {
    for (auto& r : records) {
        if (!r.reference_label) throw SchemaError("record " + r.id + " has no reference label");
        const auto& label = *r.reference_label;
        if (label == kUnclassifiedLabel)
            r.classified_domain = Assignment::unclassified();
        else if (label == kUnattributedLabel)
            r.classified_domain = Assignment::unattributed();
        else if (registry.has_domain(label))
            r.classified_domain = Assignment::domain(label);
        else
            throw SchemaError("record " + r.id + " has unknown label '" + label + "'");
    }
    return records;
}

// ---------------------------------------------------------------------------
// Prevalence

PrevalenceReport prevalence(const std::vector<IncidentRecord>& records,
                            const taxonomy::TaxonomyRegistry& registry) {
    PrevalenceReport rep;
    rep.total = records.size();
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) {
        if (!r.classified_domain)
            throw Error("UnclassifiedRecord", "record " + r.id + " has not been classified");
        switch (r.classified_domain->kind) {
            case Assignment::Kind::Domain: ++counts[r.classified_domain->domain_id]; break;
            case Assignment::Kind::Unclassified: ++rep.unclassified.count; break;
            case Assignment::Kind::Unattributed: ++rep.unattributed.count; break;
        }
    }
    for (const auto& [id, _] : counts)
        if (!registry.has_domain(id)) throw UnknownId(id);

    rep.empty_input = rep.total == 0;
    const double n = static_cast<double>(rep.total);
    auto share_of = [&](std::size_t c) { return rep.total ? static_cast<double>(c) / n : 0.0; };
    for (const auto& d : registry.domains()) {
        const std::size_t c = counts.count(d.id) ? counts.at(d.id) : 0;
        rep.per_domain.push_back({d.id, d.name, {c, share_of(c)}});
    }
    rep.unattributed.share = share_of(rep.unattributed.count);
    rep.unclassified.share = share_of(rep.unclassified.count);
    rep.coverage = rep.total ? 1.0 - rep.unclassified.share : 1.0;
    return rep;
}

json to_json(const PrevalenceReport& r) {
    json per_domain = json::object();
    for (const auto& d : r.per_domain)
        per_domain[d.domain_id] = json{{"name", d.name}, {"count", d.share.count}, {"share", d.share.share}};
    return json{{"total", r.total},
                {"per_domain", per_domain},
                {"unattributed", {{"count", r.unattributed.count}, {"share", r.unattributed.share}}},
                {"unclassified", {{"count", r.unclassified.count}, {"share", r.unclassified.share}}},
                {"coverage", r.coverage},
                {"empty_input", r.empty_input}};
}

std::string to_markdown(const PrevalenceReport& r) {
    std::string out = "| Domain | Count | Share |\n|---|---:|---:|\n";
    for (const auto& d : r.per_domain)
        out += fmt::format("| {} | {} | {:.4f} |\n", d.name, d.share.count, d.share.share);
    out += fmt::format("| Other (unattributed) | {} | {:.4f} |\n", r.unattributed.count, r.unattributed.share);
    out += fmt::format("| Unclassified | {} | {:.4f} |\n", r.unclassified.count, r.unclassified.share);
    out += fmt::format("| **Total** | {} | {:.4f} |\n", r.total, r.total ? 1.0 : 0.0);
    out += fmt::format("\nCoverage: {:.4f}{}\n", r.coverage, r.empty_input ? " (empty input)" : "");
    return out;
}

json to_json(const IncidentRecord& r) {
    json j{{"id", r.id},
           {"date", r.date},
           {"title", r.title},
           {"classified_domain", r.classified_domain ? json(r.classified_domain->label()) : json(nullptr)},
           {"matched_keywords", r.matched_keywords}};
    if (r.source_url) j["source_url"] = *r.source_url;
    return j;
}

}  // namespace airisk::incidents
