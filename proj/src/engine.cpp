#include "airisk/engine.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "airisk/controls.hpp"
#include "airisk/random.hpp"

namespace airisk::engine {

namespace {

constexpr std::size_t kCategoryCount = taxonomy::kAllLossCategories.size();
using CategorySums = std::array<double, kCategoryCount>;

std::size_t resolve_threads(std::size_t requested, std::size_t blocks) {
    std::size_t t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
    return std::max<std::size_t>(1, std::min(t, blocks));
}

}  // namespace

TrialSet simulate_scenario(const RiskScenario& scenario, std::size_t n_trials, std::uint64_t seed,
                           const SimulationOptions& options) {
    if (n_trials == 0) throw InvalidTrialCount("n_trials must be >= 1");

    const RiskScenario eff = controls::effective(scenario);
    std::vector<std::pair<std::size_t, calibration::SeverityModel>> severities;
    for (const auto& [cat, model] : eff.severities)
        severities.emplace_back(static_cast<std::size_t>(cat), model);

    TrialSet out;
    out.losses.assign(n_trials, 0.0);
    out.n_trials = n_trials;
    out.seed = seed;
    out.scenario_ids = {scenario.id};

    const std::size_t blocks = (n_trials + kTrialBlockSize - 1) / kTrialBlockSize;
    std::vector<CategorySums> block_sums(blocks, CategorySums{});
    std::atomic<std::size_t> next_block{0};
    std::atomic<bool> expired{false};

    auto worker = [&] {
        for (std::size_t b = next_block++; b < blocks; b = next_block++) {
            if (options.deadline && std::chrono::steady_clock::now() >= *options.deadline) {
                expired = true;
                return;
            }
            auto& sums = block_sums[b];
            const std::size_t end = std::min(n_trials, (b + 1) * kTrialBlockSize);
            for (std::size_t t = b * kTrialBlockSize; t < end; ++t) {
                RngState count_rng(derive_seed(seed, t, 0));
                const std::uint64_t events = calibration::sample(eff.frequency, count_rng);
                double loss = 0.0;
                for (std::uint64_t e = 0; e < events; ++e) {
                    RngState event_rng(derive_seed(seed, t, e + 1));
                    for (const auto& [cat, model] : severities) {
                        const double x = calibration::sample(model, event_rng);
                        sums[cat] += x;
                        loss += x;
                    }
                }
                out.losses[t] = loss;
            }
        }
    };

    const std::size_t threads = resolve_threads(options.threads, blocks);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    if (expired) throw DeadlineExceeded(fmt::format("simulation of {} stopped at its deadline", scenario.id));

    for (const auto& [cat, _] : severities) {
        double total = 0.0;
        for (const auto& s : block_sums) total += s[cat];
        out.category_totals[static_cast<LossCategory>(cat)] = total;
    }
    return out;
}

TrialSet aggregate(std::span<const TrialSet> portfolio) {
    if (portfolio.empty()) throw EmptyPortfolio("cannot aggregate an empty portfolio");
    const std::size_t n = portfolio.front().n_trials;
    for (const auto& ts : portfolio)
        if (ts.n_trials != n || ts.losses.size() != n)
            throw TrialCountMismatch(
                fmt::format("trial counts differ ({} vs {})", n, ts.losses.size()));

    TrialSet out = portfolio.front();
    for (std::size_t i = 1; i < portfolio.size(); ++i) {
        const auto& ts = portfolio[i];
        for (std::size_t t = 0; t < n; ++t) out.losses[t] += ts.losses[t];
        out.scenario_ids.insert(out.scenario_ids.end(), ts.scenario_ids.begin(),
                                ts.scenario_ids.end());
        for (const auto& [cat, total] : ts.category_totals) out.category_totals[cat] += total;
    }
    return out;
}

std::size_t var_rank(double alpha, std::size_t n) {
    const double x = alpha * static_cast<double>(n);
    const double r = std::round(x);
    double k = std::abs(x - r) <= 1e-9 * std::max(1.0, x) ? r : std::ceil(x);
    k = std::clamp(k, 1.0, static_cast<double>(n));
    return static_cast<std::size_t>(k);
}

RiskMetrics metrics(const TrialSet& trials, std::span<const double> confidences) {
    const std::size_t n = trials.losses.size();
    if (n == 0) throw InvalidTrialCount("metrics need at least one trial");
    for (double a : confidences)
        if (!(a > 0.0 && a < 1.0))
            throw InvalidConfidence(fmt::format("confidence must be in (0, 1) (got {})", a));

    RiskMetrics m;
    m.n_trials = n;
    const double dn = static_cast<double>(n);

    double sum = 0.0;
    for (double x : trials.losses) sum += x;
    m.eal = sum / dn;

    std::vector<double> sorted = trials.losses;
    std::sort(sorted.begin(), sorted.end());

    for (double a : confidences) {
        const std::size_t k = var_rank(a, n);
        const double var = sorted[k - 1];
        // VaR plus the mean excess: every term is >= 0, so TVaR >= VaR survives rounding.
        double tvar = var;
        if (k < n) {
            double excess = 0.0;
            for (std::size_t i = k; i < n; ++i) excess += sorted[i] - var;
            tvar = var + excess / static_cast<double>(n - k);
        }
        m.var[a] = var;
        m.tvar[a] = tvar;
    }

    const auto first_positive = std::upper_bound(sorted.begin(), sorted.end(), 0.0);
    m.zero_loss_probability = static_cast<double>(first_positive - sorted.begin()) / dn;

    if (first_positive != sorted.end()) {
        const double lo = *first_positive;
        const double hi = sorted.back();
        auto exceed = [&](double t) {
            auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
            return static_cast<double>(sorted.end() - it) / dn;
        };
        if (lo == hi) {
            m.exceedance_curve.push_back({lo, exceed(lo)});
        } else {
            const double llo = std::log(lo), lhi = std::log(hi);
            m.exceedance_curve.reserve(kExceedanceGridPoints);
            for (std::size_t i = 0; i < kExceedanceGridPoints; ++i) {
                double t = i == 0 ? lo
                           : i + 1 == kExceedanceGridPoints
                               ? hi
                               : std::exp(llo + (lhi - llo) * static_cast<double>(i) /
                                                    static_cast<double>(kExceedanceGridPoints - 1));
                m.exceedance_curve.push_back({t, exceed(t)});
            }
        }
    }

    for (const auto& [cat, total] : trials.category_totals) m.per_category_eal[cat] = total / dn;
    return m;
}

void write_csv(const TrialSet& trials, std::ostream& out) {
    out << "# seed=" << trials.seed << '\n';
    out << "# n_trials=" << trials.n_trials << '\n';
    out << "# scenario_ids=";
    for (std::size_t i = 0; i < trials.scenario_ids.size(); ++i)
        out << (i ? ";" : "") << trials.scenario_ids[i];
    out << "\nloss\n";
    fmt::memory_buffer buf;
    for (double x : trials.losses) fmt::format_to(std::back_inserter(buf), "{}\n", x);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::string to_csv(const TrialSet& trials) {
    std::ostringstream os;
    write_csv(trials, os);
    return os.str();
}

}  // namespace airisk::engine
