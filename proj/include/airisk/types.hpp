#pragma once

// Value types shared by the controls, engine and scenarios modules.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "airisk/calibration.hpp"
#include "airisk/error.hpp"
#include "airisk/taxonomy.hpp"

namespace airisk {

using taxonomy::LossCategory;

/// A mitigation modelled as fractional reductions of event frequency and of
/// each loss. Empty `applicable_domains` means universal.
struct Control {
    std::string id;
    std::string name;
    double frequency_reduction{0.0};
    double magnitude_reduction{0.0};
    double annual_cost{0.0};
    std::set<std::string> applicable_domains;

    bool operator==(const Control&) const = default;
};

struct RiskScenario {
    std::string id;
    std::string title;
    std::string sub_threat_id;
    std::string narrative;
    std::string exposure_note;  // carried as audit metadata; never enters the arithmetic
    calibration::FrequencyModel frequency{calibration::Poisson{}};
    std::map<LossCategory, calibration::SeverityModel> severities;
    std::vector<Control> controls;
    std::string currency_code{"USD"};

    bool operator==(const RiskScenario&) const = default;
};

struct Portfolio {
    std::string id;
    std::string taxonomy_version;
    bool eu_high_risk{false};
    std::vector<RiskScenario> scenarios;

    bool operator==(const Portfolio&) const = default;
};

enum class FindingLevel { Error, Warning };

/// One validation problem. `path` locates the offending field in the document.
struct Finding {
    FindingLevel level{FindingLevel::Error};
    std::string code;
    std::string path;
    std::string message;

    bool operator==(const Finding&) const = default;
};

inline bool has_errors(const std::vector<Finding>& findings) {
    for (const auto& f : findings)
        if (f.level == FindingLevel::Error) return true;
    return false;
}

class ValidationFailed : public Error {
public:
    explicit ValidationFailed(std::vector<Finding> findings)
        : Error("ValidationFailed", summary(findings)), findings_(std::move(findings)) {}

    const std::vector<Finding>& findings() const noexcept { return findings_; }

private:
    static std::string summary(const std::vector<Finding>& findings) {
        std::string out = "validation failed";
        for (const auto& f : findings) {
            if (f.level != FindingLevel::Error) continue;
            out += "\n  ";
            out += f.path;
            out += ": ";
            out += f.message;
        }
        return out;
    }

    std::vector<Finding> findings_;
};

}  // namespace airisk
