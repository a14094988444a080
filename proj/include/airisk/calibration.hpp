#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "airisk/random.hpp"
#include "airisk/taxonomy.hpp"

namespace airisk::calibration {

// Frequency models: annual event counts.

struct Poisson {
    double rate{0.0};  // events / year
    bool operator==(const Poisson&) const = default;
};

/// Gamma-Poisson mixture parameterised by mean and dispersion; variance = mean + mean^2/dispersion.
struct NegativeBinomial {
    double mean{0.0};
    double dispersion{1.0};
    bool operator==(const NegativeBinomial&) const = default;
};

/// At most one materialisation per year.
struct Bernoulli {
    double p{0.0};
    bool operator==(const Bernoulli&) const = default;
};

struct EmpiricalCounts {
    std::map<std::uint32_t, double> pmf;
    bool operator==(const EmpiricalCounts&) const = default;
};

using FrequencyModel = std::variant<Poisson, NegativeBinomial, Bernoulli, EmpiricalCounts>;

// Severity models: loss per event, in currency units.

struct Lognormal {
    double mu{0.0};  // log-currency
    double sigma{0.0};
    bool operator==(const Lognormal&) const = default;
};

/// Beta-PERT with the conventional shape weight of 4.
struct Pert {
    double min{0.0};
    double mode{0.0};
    double max{0.0};
    bool operator==(const Pert&) const = default;
};

struct Uniform {
    double lo{0.0};
    double hi{0.0};
    bool operator==(const Uniform&) const = default;
};

struct PointMass {
    double value{0.0};
    bool operator==(const PointMass&) const = default;
};

/// Resamples the given values with equal weight.
struct EmpiricalSamples {
    std::vector<double> values;
    bool operator==(const EmpiricalSamples&) const = default;
};

using SeverityModel = std::variant<Lognormal, Pert, Uniform, PointMass, EmpiricalSamples>;

inline constexpr double kPertLambda = 4.0;

struct CalibrationInterval {
    double lower{0.0};
    double upper{0.0};
    double confidence{0.90};
};

struct Moments {
    double mean{0.0};
    double variance{0.0};
};

/// One violated parameter bound; `parameter` is the serialized field name.
struct ParameterViolation {
    std::string parameter;
    std::string message;
};

std::vector<ParameterViolation> parameter_violations(const FrequencyModel& model);
std::vector<ParameterViolation> parameter_violations(const SeverityModel& model);

/// Symmetric-quantile lognormal fit: the interval bounds become the
/// (1-c)/2 and 1-(1-c)/2 quantiles.
/// Throws NonPositiveBound, DegenerateInterval (lower == upper) or
/// InvalidInterval (lower > upper, confidence outside (0,1)).
Lognormal calibrate_lognormal(const CalibrationInterval& interval);

/// Standard normal quantile.
double normal_quantile(double p);
double quantile(const Lognormal& model, double p);

Moments moments(const FrequencyModel& model);
Moments moments(const SeverityModel& model);

std::uint64_t sample(const FrequencyModel& model, RngState& rng);
double sample(const SeverityModel& model, RngState& rng);

/// Rate-scaled copy: Poisson rate, NegativeBinomial mean and Bernoulli p are multiplied by
/// `factor`; EmpiricalCounts moves (1 - factor) of its mass to zero events.
FrequencyModel scale_frequency(const FrequencyModel& model, double factor);

/// Copy whose draws are `factor` times the original's.
SeverityModel scale_severity(const SeverityModel& model, double factor);

enum class FrequencyFamily { Poisson, NegativeBinomial, BernoulliPerPeriod, EmpiricalCounts };
enum class SeverityFamily { Lognormal, Pert, Uniform, PointMass, EmpiricalSamples };

std::string_view to_string(FrequencyFamily f);
std::string_view to_string(SeverityFamily f);

struct Recommendation {
    FrequencyFamily frequency;
    SeverityFamily severity;
    std::string note;
};

/// Model families for a sub-threat, a pure function of its temporal pattern and impact profile.
Recommendation recommend(const taxonomy::SubThreat& sub_threat);
Recommendation recommend(taxonomy::TemporalPattern pattern, taxonomy::ImpactProfile profile);

// Serialization: {"family": "<Name>", <field>: ...} with field names as declared above.
nlohmann::json to_json(const FrequencyModel& model);
nlohmann::json to_json(const SeverityModel& model);
FrequencyModel frequency_from_json(const nlohmann::json& j, const std::string& path = "");
SeverityModel severity_from_json(const nlohmann::json& j, const std::string& path = "");

}  // namespace airisk::calibration
