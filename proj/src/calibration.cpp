#include "airisk/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "airisk/error.hpp"
#include "json_util.hpp"

namespace airisk::calibration {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Below this rate Poisson counts are drawn by sequential CDF inversion (one uniform
// per draw, monotone in the rate); above it Boost's PTRS rejection sampler is used.
constexpr double kPoissonInversionLimit = 30.0;

std::uint64_t poisson_inversion(double rate, RngState& rng) {
    const double u = rng.uniform();
    double p = std::exp(-rate);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf) {
        ++k;
        p *= rate / static_cast<double>(k);
        cdf += p;
        if (p < 1e-300 && static_cast<double>(k) > rate) break;
    }
    return k;
}

std::uint64_t sample_poisson(double rate, RngState& rng) {
    if (rate <= 0.0) return 0;
    if (rate < kPoissonInversionLimit) return poisson_inversion(rate, rng);
    boost::random::poisson_distribution<std::uint64_t, double> dist(rate);
    return dist(rng);
}

double sample_gamma(double shape, double scale, RngState& rng) {
    boost::random::gamma_distribution<double> dist(shape, scale);
    return dist(rng);
}

void require_finite(std::vector<ParameterViolation>& out, const char* name, double v) {
    if (!std::isfinite(v)) out.push_back({name, fmt::format("{} must be finite", name)});
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<ParameterViolation> parameter_violations(const FrequencyModel& model) {
    std::vector<ParameterViolation> out;
    std::visit(
        overloaded{
            [&](const Poisson& m) {
                require_finite(out, "rate", m.rate);
                if (m.rate < 0) out.push_back({"rate", fmt::format("rate must be >= 0 (got {})", m.rate)});
            },
            [&](const NegativeBinomial& m) {
                require_finite(out, "mean", m.mean);
                require_finite(out, "dispersion", m.dispersion);
                if (m.mean < 0) out.push_back({"mean", fmt::format("mean must be >= 0 (got {})", m.mean)});
                if (!(m.dispersion > 0))
                    out.push_back({"dispersion",
                                   fmt::format("dispersion must be > 0 (got {})", m.dispersion)});
            },
            [&](const Bernoulli& m) {
                if (!(m.p >= 0.0 && m.p <= 1.0))
                    out.push_back({"p", fmt::format("p must be within [0, 1] (got {})", m.p)});
            },
            [&](const EmpiricalCounts& m) {
                if (m.pmf.empty()) {
                    out.push_back({"pmf", "pmf must have at least one support point"});
                    return;
                }
                double total = 0.0;
                for (const auto& [k, prob] : m.pmf) {
                    if (!(prob >= 0.0) || !std::isfinite(prob))
                        out.push_back({"pmf", fmt::format("pmf[{}] must be a non-negative probability (got {})", k, prob)});
                    total += prob;
                }
                if (std::abs(total - 1.0) > 1e-9)
                    out.push_back({"pmf", fmt::format("pmf must sum to 1 within 1e-9 (got {:.12g})", total)});
            },
        },
        model);
    return out;
}

std::vector<ParameterViolation> parameter_violations(const SeverityModel& model) {
    std::vector<ParameterViolation> out;
    std::visit(
        overloaded{
            [&](const Lognormal& m) {
                require_finite(out, "mu", m.mu);
                require_finite(out, "sigma", m.sigma);
                if (m.sigma < 0) out.push_back({"sigma", fmt::format("sigma must be >= 0 (got {})", m.sigma)});
            },
            [&](const Pert& m) {
                require_finite(out, "min", m.min);
                require_finite(out, "mode", m.mode);
                require_finite(out, "max", m.max);
                if (m.min < 0) out.push_back({"min", fmt::format("min must be >= 0 (got {})", m.min)});
                if (!(m.min <= m.mode && m.mode <= m.max))
                    out.push_back({"mode", fmt::format("require min <= mode <= max (got {}, {}, {})",
                                                       m.min, m.mode, m.max)});
            },
            [&](const Uniform& m) {
                require_finite(out, "lo", m.lo);
                require_finite(out, "hi", m.hi);
                if (m.lo < 0) out.push_back({"lo", fmt::format("lo must be >= 0 (got {})", m.lo)});
                if (!(m.lo <= m.hi))
                    out.push_back({"hi", fmt::format("require lo <= hi (got {}, {})", m.lo, m.hi)});
            },
            [&](const PointMass& m) {
                require_finite(out, "value", m.value);
                if (m.value < 0) out.push_back({"value", fmt::format("value must be >= 0 (got {})", m.value)});
            },
            [&](const EmpiricalSamples& m) {
                if (m.values.empty()) out.push_back({"values", "values must be non-empty"});
                for (std::size_t i = 0; i < m.values.size(); ++i)
                    if (!(m.values[i] >= 0.0) || !std::isfinite(m.values[i]))
                        out.push_back({"values", fmt::format("values[{}] must be finite and >= 0 (got {})",
                                                             i, m.values[i])});
            },
        },
        model);
    return out;
}

// ---------------------------------------------------------------------------

double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double quantile(const Lognormal& model, double p) {
    return std::exp(model.mu + model.sigma * normal_quantile(p));
}

Lognormal calibrate_lognormal(const CalibrationInterval& interval) {
    const auto [lower, upper, confidence] = interval;
    if (!(lower > 0.0) || !(upper > 0.0))
        throw NonPositiveBound(fmt::format("interval bounds must be > 0 (got {}, {})", lower, upper));
    if (!std::isfinite(lower) || !std::isfinite(upper))
        throw InvalidInterval("interval bounds must be finite");
    if (lower == upper) throw DegenerateInterval(fmt::format("lower == upper == {}", lower));
    if (lower > upper)
        throw InvalidInterval(fmt::format("lower must be < upper (got {}, {})", lower, upper));
    if (!(confidence > 0.0 && confidence < 1.0))
        throw InvalidInterval(fmt::format("confidence must be in (0, 1) (got {})", confidence));

    const double z = normal_quantile(1.0 - (1.0 - confidence) / 2.0);
    // log of the ratio keeps sigma a function of upper/lower alone.
    return Lognormal{(std::log(lower) + std::log(upper)) / 2.0, std::log(upper / lower) / (2.0 * z)};
}

// ---------------------------------------------------------------------------

Moments moments(const FrequencyModel& model) {
    return std::visit(
        overloaded{
            [](const Poisson& m) { return Moments{m.rate, m.rate}; },
            [](const NegativeBinomial& m) {
                return Moments{m.mean, m.mean + m.mean * m.mean / m.dispersion};
            },
            [](const Bernoulli& m) { return Moments{m.p, m.p * (1.0 - m.p)}; },
            [](const EmpiricalCounts& m) {
                double mean = 0.0, second = 0.0;
                for (const auto& [k, p] : m.pmf) {
                    mean += p * k;
                    second += p * static_cast<double>(k) * k;
                }
                return Moments{mean, second - mean * mean};
            },
        },
        model);
}

Moments moments(const SeverityModel& model) {
    return std::visit(
        overloaded{
            [](const Lognormal& m) {
                const double s2 = m.sigma * m.sigma;
                return Moments{std::exp(m.mu + s2 / 2.0),
                               std::expm1(s2) * std::exp(2.0 * m.mu + s2)};
            },
            [](const Pert& m) {
                const double mean = (m.min + kPertLambda * m.mode + m.max) / (kPertLambda + 2.0);
                return Moments{mean, (mean - m.min) * (m.max - mean) / (kPertLambda + 3.0)};
            },
            [](const Uniform& m) {
                const double w = m.hi - m.lo;
                return Moments{(m.lo + m.hi) / 2.0, w * w / 12.0};
            },
            [](const PointMass& m) { return Moments{m.value, 0.0}; },
            [](const EmpiricalSamples& m) {
                double mean = 0.0;
                for (double v : m.values) mean += v;
                mean /= static_cast<double>(m.values.size());
                double var = 0.0;
                for (double v : m.values) var += (v - mean) * (v - mean);
                return Moments{mean, var / static_cast<double>(m.values.size())};
            },
        },
        model);
}

// ---------------------------------------------------------------------------

std::uint64_t sample(const FrequencyModel& model, RngState& rng) {
    return std::visit(
        overloaded{
            [&](const Poisson& m) { return sample_poisson(m.rate, rng); },
            [&](const NegativeBinomial& m) -> std::uint64_t {
                if (m.mean <= 0.0) return 0;
                return sample_poisson(sample_gamma(m.dispersion, m.mean / m.dispersion, rng), rng);
            },
            [&](const Bernoulli& m) -> std::uint64_t { return rng.uniform() < m.p ? 1 : 0; },
            [&](const EmpiricalCounts& m) -> std::uint64_t {
                const double u = rng.uniform();
                double cdf = 0.0;
                for (const auto& [k, p] : m.pmf) {
                    cdf += p;
                    if (u < cdf) return k;
                }
                return m.pmf.rbegin()->first;
            },
        },
        model);
}

double sample(const SeverityModel& model, RngState& rng) {
    return std::visit(
        overloaded{
            [&](const Lognormal& m) {
                return std::exp(m.mu + m.sigma * normal_quantile(rng.uniform_open()));
            },
            [&](const Pert& m) {
                const double width = m.max - m.min;
                if (width <= 0.0) return m.min;
                const double a = 1.0 + kPertLambda * (m.mode - m.min) / width;
                const double b = 1.0 + kPertLambda * (m.max - m.mode) / width;
                const double x = sample_gamma(a, 1.0, rng);
                const double y = sample_gamma(b, 1.0, rng);
                return m.min + width * x / (x + y);
            },
            [&](const Uniform& m) { return m.lo + (m.hi - m.lo) * rng.uniform(); },
            [&](const PointMass& m) { return m.value; },
            [&](const EmpiricalSamples& m) {
                const auto n = m.values.size();
                auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
                return m.values[std::min(idx, n - 1)];
            },
        },
        model);
}

// ---------------------------------------------------------------------------

FrequencyModel scale_frequency(const FrequencyModel& model, double factor) {
    if (factor == 1.0) return model;
    return std::visit(
        overloaded{
            [&](const Poisson& m) -> FrequencyModel { return Poisson{m.rate * factor}; },
            [&](const NegativeBinomial& m) -> FrequencyModel {
                return NegativeBinomial{m.mean * factor, m.dispersion};
            },
            [&](const Bernoulli& m) -> FrequencyModel { return Bernoulli{m.p * factor}; },
            [&](const EmpiricalCounts& m) -> FrequencyModel {
                EmpiricalCounts out;
                for (const auto& [k, p] : m.pmf) out.pmf[k] = p * factor;
                out.pmf[0] += 1.0 - factor;
                return out;
            },
        },
        model);
}

SeverityModel scale_severity(const SeverityModel& model, double factor) {
    if (factor == 1.0) return model;
    if (factor == 0.0) return PointMass{0.0};
    return std::visit(
        overloaded{
            [&](const Lognormal& m) -> SeverityModel {
                return Lognormal{m.mu + std::log(factor), m.sigma};
            },
            [&](const Pert& m) -> SeverityModel {
                return Pert{m.min * factor, m.mode * factor, m.max * factor};
            },
            [&](const Uniform& m) -> SeverityModel { return Uniform{m.lo * factor, m.hi * factor}; },
            [&](const PointMass& m) -> SeverityModel { return PointMass{m.value * factor}; },
            [&](const EmpiricalSamples& m) -> SeverityModel {
                EmpiricalSamples out{m.values};
                for (double& v : out.values) v *= factor;
                return out;
            },
        },
        model);
}

// ---------------------------------------------------------------------------

std::string_view to_string(FrequencyFamily f) {
    switch (f) {
        case FrequencyFamily::Poisson: return "Poisson";
        case FrequencyFamily::NegativeBinomial: return "NegativeBinomial";
        case FrequencyFamily::BernoulliPerPeriod: return "BernoulliPerPeriod";
        case FrequencyFamily::EmpiricalCounts: return "EmpiricalCounts";
    }
    return "?";
}

std::string_view to_string(SeverityFamily f) {
    switch (f) {
        case SeverityFamily::Lognormal: return "Lognormal";
        case SeverityFamily::Pert: return "PERT";
        case SeverityFamily::Uniform: return "Uniform";
        case SeverityFamily::PointMass: return "PointMass";
        case SeverityFamily::EmpiricalSamples: return "EmpiricalSamples";
    }
    return "?";
}

Recommendation recommend(taxonomy::TemporalPattern pattern, taxonomy::ImpactProfile profile) {
    using taxonomy::ImpactProfile;
    using taxonomy::TemporalPattern;
    Recommendation r{FrequencyFamily::Poisson, SeverityFamily::Pert, {}};
    if (pattern == TemporalPattern::ContinuousDegradation) {
        r.frequency = FrequencyFamily::BernoulliPerPeriod;
        r.note =
            "continuous degradation: model the probability that degradation materialises as a loss "
            "within the year; severity is the loss when it does";
    } else {
        r.note = "discrete events: Poisson count of events per year";
    }
    if (profile == ImpactProfile::HeavyTailed) {
        r.severity = SeverityFamily::Lognormal;
        r.note += "; heavy-tailed impact: lognormal severity";
    } else {
        r.note += "; bounded impact: PERT severity between expert min and max";
    }
    return r;
}

Recommendation recommend(const taxonomy::SubThreat& sub_threat) {
    return recommend(sub_threat.temporal_pattern, sub_threat.impact_profile);
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const FrequencyModel& model) {
    return std::visit(
        overloaded{
            [](const Poisson& m) { return json{{"family", "Poisson"}, {"rate", m.rate}}; },
            [](const NegativeBinomial& m) {
                return json{{"family", "NegativeBinomial"}, {"mean", m.mean}, {"dispersion", m.dispersion}};
            },
            [](const Bernoulli& m) { return json{{"family", "Bernoulli"}, {"p", m.p}}; },
            [](const EmpiricalCounts& m) {
                json pmf = json::object();
                for (const auto& [k, p] : m.pmf) pmf[std::to_string(k)] = p;
                return json{{"family", "EmpiricalCounts"}, {"pmf", pmf}};
            },
        },
        model);
}

json to_json(const SeverityModel& model) {
    return std::visit(
        overloaded{
            [](const Lognormal& m) { return json{{"family", "Lognormal"}, {"mu", m.mu}, {"sigma", m.sigma}}; },
            [](const Pert& m) {
                return json{{"family", "PERT"}, {"min", m.min}, {"mode", m.mode}, {"max", m.max}};
            },
            [](const Uniform& m) { return json{{"family", "Uniform"}, {"lo", m.lo}, {"hi", m.hi}}; },
            [](const PointMass& m) { return json{{"family", "PointMass"}, {"value", m.value}}; },
            [](const EmpiricalSamples& m) {
                return json{{"family", "EmpiricalSamples"}, {"values", m.values}};
            },
        },
        model);
}

FrequencyModel frequency_from_json(const json& j, const std::string& path) {
    using namespace detail;
    require_object(j, path);
    const auto family = get_string(j, "family", path);
    if (family == "Poisson") {
        reject_unknown_keys(j, {"family", "rate"}, path);
        return Poisson{get_number(j, "rate", path)};
    }
    if (family == "NegativeBinomial") {
        reject_unknown_keys(j, {"family", "mean", "dispersion"}, path);
        return NegativeBinomial{get_number(j, "mean", path), get_number(j, "dispersion", path)};
    }
    if (family == "Bernoulli") {
        reject_unknown_keys(j, {"family", "p"}, path);
        return Bernoulli{get_number(j, "p", path)};
    }
    if (family == "EmpiricalCounts") {
        reject_unknown_keys(j, {"family", "pmf"}, path);
        const auto& pmf = require_object(field(j, "pmf", path), path + "/pmf");
        EmpiricalCounts out;
        for (const auto& [key, value] : pmf.items()) {
            const auto p = path + "/pmf/" + key;
            std::size_t used = 0;
            unsigned long long k = 0;
            try {
                k = std::stoull(key, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != key.size() || key.empty() || key[0] == '-' ||
                k > std::numeric_limits<std::uint32_t>::max())
                throw SchemaError(p + ": pmf keys must be non-negative integer counts");
            if (!value.is_number()) throw SchemaError(p + ": expected number");
            out.pmf[static_cast<std::uint32_t>(k)] = value.get<double>();
        }
        return out;
    }
    throw SchemaError(path + "/family: unknown frequency family '" + family + "'");
}

SeverityModel severity_from_json(const json& j, const std::string& path) {
    using namespace detail;
    require_object(j, path);
    const auto family = get_string(j, "family", path);
    if (family == "Lognormal") {
        reject_unknown_keys(j, {"family", "mu", "sigma"}, path);
        return Lognormal{get_number(j, "mu", path), get_number(j, "sigma", path)};
    }
    if (family == "PERT") {
        reject_unknown_keys(j, {"family", "min", "mode", "max"}, path);
        return Pert{get_number(j, "min", path), get_number(j, "mode", path), get_number(j, "max", path)};
    }
    if (family == "Uniform") {
        reject_unknown_keys(j, {"family", "lo", "hi"}, path);
        return Uniform{get_number(j, "lo", path), get_number(j, "hi", path)};
    }
    if (family == "PointMass") {
        reject_unknown_keys(j, {"family", "value"}, path);
        return PointMass{get_number(j, "value", path)};
    }
    if (family == "EmpiricalSamples") {
        reject_unknown_keys(j, {"family", "values"}, path);
        const auto& vals = require_array(field(j, "values", path), path + "/values");
        EmpiricalSamples out;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (!vals[i].is_number()) throw SchemaError(fmt::format("{}/values/{}: expected number", path, i));
            out.values.push_back(vals[i].get<double>());
        }
        return out;
    }
    throw SchemaError(path + "/family: unknown severity family '" + family + "'");
}

}  // namespace airisk::calibration
