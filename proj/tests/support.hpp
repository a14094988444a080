#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "airisk/taxonomy.hpp"
#include "airisk/types.hpp"

namespace test {

inline std::filesystem::path data_dir() { return AIRISK_TEST_DATA_DIR; }
inline std::filesystem::path tests_dir() { return AIRISK_TEST_DIR; }

inline const airisk::taxonomy::TaxonomyRegistry& registry() {
    static const auto r = airisk::taxonomy::load_registry(data_dir() / "taxonomy.json");
    return r;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline airisk::RiskScenario scenario(std::string id, std::string sub_threat,
                                     airisk::calibration::FrequencyModel freq,
                                     std::map<airisk::LossCategory, airisk::calibration::SeverityModel> sev) {
    airisk::RiskScenario s;
    s.id = std::move(id);
    s.title = s.id;
    s.sub_threat_id = std::move(sub_threat);
    s.frequency = std::move(freq);
    s.severities = std::move(sev);
    return s;
}

/// Poisson(rate) x Lognormal(mu, sigma) on a Legal-mapped misuse sub-threat.
inline airisk::RiskScenario compound(std::string id, double rate, double mu, double sigma) {
    return scenario(std::move(id), "prompt_injection", airisk::calibration::Poisson{rate},
                    {{airisk::LossCategory::Legal, airisk::calibration::Lognormal{mu, sigma}}});
}

inline airisk::Control control(std::string id, double freq, double mag, double cost) {
    airisk::Control c;
    c.id = std::move(id);
    c.name = c.id;
    c.frequency_reduction = freq;
    c.magnitude_reduction = mag;
    c.annual_cost = cost;
    return c;
}

}  // namespace test
