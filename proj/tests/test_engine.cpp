#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "airisk/engine.hpp"
#include "airisk/error.hpp"
#include "support.hpp"

using namespace airisk;
using namespace airisk::engine;
using namespace airisk::calibration;

namespace {

constexpr double kExpTenPointFive = 36315.5026742466377;  // exp(10.5), mpmath
constexpr double kLognormalSecondMoment = 3584912846.13159;  // exp(22)

const std::vector<double> kConf{0.5, 0.9, 0.95, 0.99};

TrialSet from_losses(std::vector<double> losses) {
    TrialSet t;
    t.n_trials = losses.size();
    t.losses = std::move(losses);
    return t;
}

// A random scenario drawn from all frequency and severity families.
RiskScenario random_scenario(std::mt19937_64& gen, const std::string& id) {
    std::uniform_int_distribution<int> pick(0, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FrequencyModel f;
    switch (pick(gen)) {
        case 0: f = Poisson{5 * u(gen)}; break;
        case 1: f = NegativeBinomial{4 * u(gen) + 0.1, 0.5 + 3 * u(gen)}; break;
        case 2: f = Bernoulli{u(gen)}; break;
        default: {
            const double a = u(gen);
            f = EmpiricalCounts{{{0, 1 - a}, {3, a}}};
        }
    }
    auto sev = [&]() -> SeverityModel {
        switch (pick(gen)) {
            case 0: return Lognormal{6 + 4 * u(gen), 0.2 + 1.5 * u(gen)};
            case 1: {
                const double lo = 100 * u(gen), mode = lo + 500 * u(gen);
                return Pert{lo, mode, mode + 1000 * u(gen)};
            }
            case 2: return Uniform{0, 1000 * u(gen)};
            default: return EmpiricalSamples{{10 * u(gen), 100 * u(gen), 1000 * u(gen)}};
        }
    };
    // privacy maps {Confidentiality, Legal}
    return test::scenario(id, "membership_inference", f,
                          {{LossCategory::Confidentiality, sev()}, {LossCategory::Legal, sev()}});
}

}  // namespace

TEST_CASE("VaR rank uses the ceiling order statistic") {
    CHECK(var_rank(0.95, 100) == 95);
    CHECK(var_rank(0.07, 100) == 7);  // 0.07 * 100 is 7.000000000000001 in binary
    CHECK(var_rank(0.5, 1) == 1);
    CHECK(var_rank(0.99, 1000) == 990);
    CHECK(var_rank(0.991, 1000) == 991);
    CHECK(var_rank(0.9901, 1000) == 991);
    CHECK(var_rank(0.001, 10) == 1);
    CHECK(var_rank(0.999999, 10) == 10);
    CHECK(var_rank(0.95, 100000) == 95000);
}

TEST_CASE("metrics on a hand-computed trial set") {
    auto t = from_losses({30, 0, 80, 10, 0, 50, 70, 20, 60, 40});
    auto m = metrics(t, std::vector<double>{0.5, 0.9, 0.95});
    CHECK(m.eal == 36.0);
    CHECK(m.var.at(0.5) == 30.0);
    CHECK(m.tvar.at(0.5) == 60.0);
    CHECK(m.var.at(0.9) == 70.0);
    CHECK(m.tvar.at(0.9) == 80.0);
    CHECK(m.var.at(0.95) == 80.0);
    CHECK(m.tvar.at(0.95) == 80.0);
    CHECK(m.zero_loss_probability == 0.2);
    REQUIRE(m.exceedance_curve.size() == kExceedanceGridPoints);
    CHECK(m.exceedance_curve.front().threshold == 10.0);
    CHECK(m.exceedance_curve.front().probability == doctest::Approx(0.7));
    CHECK(m.exceedance_curve.back().threshold == 80.0);
    CHECK(m.exceedance_curve.back().probability == 0.0);
}

TEST_CASE("exceedance curve matches brute-force counting") {
    std::mt19937_64 gen(5);
    std::lognormal_distribution<double> d(5, 2);
    std::vector<double> losses(3000);
    for (auto& x : losses) x = gen() % 4 == 0 ? 0.0 : d(gen);
    auto m = metrics(from_losses(losses), kConf);
    REQUIRE(m.exceedance_curve.size() == kExceedanceGridPoints);
    double prev_t = 0, prev_p = 1;
    for (const auto& p : m.exceedance_curve) {
        const auto above = std::count_if(losses.begin(), losses.end(), [&](double x) { return x > p.threshold; });
        CHECK(p.probability == static_cast<double>(above) / 3000.0);
        CHECK(p.threshold > prev_t);
        CHECK(p.probability <= prev_p);
        prev_t = p.threshold;
        prev_p = p.probability;
    }
    // log spacing: constant ratio between interior grid points
    const double r1 = m.exceedance_curve[2].threshold / m.exceedance_curve[1].threshold;
    const double r2 = m.exceedance_curve[150].threshold / m.exceedance_curve[149].threshold;
    CHECK(r1 == doctest::Approx(r2).epsilon(1e-9));
}

TEST_CASE("all-zero and single-value trial sets") {
    auto zero = metrics(from_losses({0, 0, 0}), kConf);
    CHECK(zero.eal == 0.0);
    CHECK(zero.zero_loss_probability == 1.0);
    CHECK(zero.exceedance_curve.empty());
    for (const auto& [a, v] : zero.var) CHECK(v == 0.0);

    auto flat = metrics(from_losses({5, 5}), kConf);
    REQUIRE(flat.exceedance_curve.size() == 1);
    CHECK(flat.exceedance_curve[0].probability == 0.0);
}

TEST_CASE("metric errors") {
    auto t = from_losses({1, 2, 3});
    CHECK_THROWS_AS(metrics(t, std::vector<double>{0.0}), InvalidConfidence);
    CHECK_THROWS_AS(metrics(t, std::vector<double>{1.0}), InvalidConfidence);
    CHECK_THROWS_AS(metrics(t, std::vector<double>{NAN}), InvalidConfidence);
    CHECK_THROWS_AS(metrics(from_losses({}), kConf), InvalidTrialCount);
    CHECK_THROWS_AS(simulate_scenario(test::compound("a", 1, 1, 1), 0, 1), InvalidTrialCount);
}

TEST_CASE("compound Poisson-lognormal mean and variance") {
    const std::size_t n = 200000;
    auto t = simulate_scenario(test::compound("c", 2.0, 10.0, 1.0), n, 7);
    auto m = metrics(t, kConf);
    const double expected = 2.0 * kExpTenPointFive;
    const double variance = 2.0 * kLognormalSecondMoment;  // compound Poisson: lambda * E[X^2]
    CHECK(std::abs(m.eal - expected) < 4.0 * std::sqrt(variance / n));
    double ss = 0;
    for (double x : t.losses) ss += (x - m.eal) * (x - m.eal);
    CHECK(ss / n == doctest::Approx(variance).epsilon(0.08));
    CHECK(m.zero_loss_probability == doctest::Approx(std::exp(-2.0)).epsilon(0.02));
}

TEST_CASE("empirical counts times point mass convolves exactly") {
    const std::size_t n = 100000;
    auto s = test::scenario("e", "prompt_injection", EmpiricalCounts{{{0, 0.5}, {1, 0.3}, {2, 0.2}}},
                            {{LossCategory::Legal, PointMass{100}}});
    auto t = simulate_scenario(s, n, 3);
    std::map<double, std::size_t> counts;
    for (double x : t.losses) ++counts[x];
    REQUIRE(counts.size() == 3);
    for (auto [v, p] : std::vector<std::pair<double, double>>{{0, 0.5}, {100, 0.3}, {200, 0.2}}) {
        const double sd = std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(static_cast<double>(counts[v]) / n - p) < 3.0 * sd);
    }
    CHECK(metrics(t, kConf).eal == doctest::Approx(70.0).epsilon(0.01));
}

TEST_CASE("Poisson rate zero yields zero loss everywhere") {
    auto t = simulate_scenario(test::compound("z", 0.0, 10, 1), 1000, 1);
    auto m = metrics(t, kConf);
    CHECK(m.eal == 0.0);
    CHECK(m.zero_loss_probability == 1.0);
    for (const auto& [a, v] : m.var) CHECK(v == 0.0);
}

TEST_CASE("metric properties on random scenarios") {
    std::mt19937_64 gen(424242);
    std::vector<double> grid;
    for (int i = 1; i < 100; ++i) grid.push_back(i / 100.0);
    grid.push_back(0.995);
    grid.push_back(0.999);
    for (int i = 0; i < 40; ++i) {
        auto s = random_scenario(gen, "s" + std::to_string(i));
        auto t = simulate_scenario(s, 2000 + 97 * i, gen());
        auto m = metrics(t, grid);
        double prev = -1;
        for (double a : grid) {
            CHECK(m.var.at(a) >= prev);
            CHECK(m.tvar.at(a) >= m.var.at(a));
            prev = m.var.at(a);
        }
        double cat_sum = 0;
        for (const auto& [c, v] : m.per_category_eal) cat_sum += v;
        if (m.eal > 0)
            CHECK(std::abs(cat_sum - m.eal) <= 1e-9 * m.eal);
        else
            CHECK(cat_sum == 0.0);
    }
}

TEST_CASE("simulation is a pure function of (scenario, n, seed)") {
    auto s = test::scenario("d", "factual_hallucination", NegativeBinomial{3, 1.2},
                            {{LossCategory::Integrity, Lognormal{8, 1.1}}, {LossCategory::Reputation, Pert{10, 200, 900}}});
    const std::size_t n = 3 * kTrialBlockSize + 17;
    auto one = simulate_scenario(s, n, 99, {1});
    auto four = simulate_scenario(s, n, 99, {4});
    auto again = simulate_scenario(s, n, 99, {0});
    CHECK(to_csv(one) == to_csv(four));
    CHECK(one == again);
    CHECK(one.category_totals == four.category_totals);
    CHECK_FALSE(simulate_scenario(s, n, 100, {1}).losses == one.losses);

    // Each trial has its own streams, so a shorter run is a prefix of a longer one.
    auto shorter = simulate_scenario(s, 1000, 99, {3});
    CHECK(std::equal(shorter.losses.begin(), shorter.losses.end(), one.losses.begin()));
}

TEST_CASE("aggregate sums trial by trial") {
    auto a = simulate_scenario(test::compound("a", 1, 5, 1), 500, 1);
    auto b = simulate_scenario(test::compound("b", 2, 4, 1), 500, 2);
    std::vector<TrialSet> both{a, b};
    auto sum = aggregate(both);
    for (std::size_t i = 0; i < 500; ++i) CHECK(sum.losses[i] == a.losses[i] + b.losses[i]);
    CHECK(sum.scenario_ids == std::vector<std::string>{"a", "b"});
    CHECK(sum.category_totals.at(LossCategory::Legal) ==
          doctest::Approx(a.category_totals.at(LossCategory::Legal) + b.category_totals.at(LossCategory::Legal)));

    std::vector<TrialSet> mismatch{a, simulate_scenario(test::compound("c", 1, 1, 1), 400, 3)};
    CHECK_THROWS_AS(aggregate(mismatch), TrialCountMismatch);
    CHECK_THROWS_AS(aggregate(std::vector<TrialSet>{}), EmptyPortfolio);
}

TEST_CASE("csv export round trips exactly") {
    auto t = simulate_scenario(test::compound("x", 3, 9, 1.5), 2000, 11);
    std::istringstream in(to_csv(t));
    std::string line;
    std::getline(in, line);
    CHECK(line == "# seed=11");
    std::getline(in, line);
    CHECK(line == "# n_trials=2000");
    std::getline(in, line);
    CHECK(line == "# scenario_ids=x");
    std::getline(in, line);
    CHECK(line == "loss");
    std::vector<double> back;
    while (std::getline(in, line)) back.push_back(std::stod(line));
    CHECK(back == t.losses);
}

TEST_CASE("a passed deadline stops the simulation") {
    SimulationOptions o;
    o.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
    CHECK_THROWS_AS(simulate_scenario(test::compound("late", 2, 10, 1), 10, 1, o), DeadlineExceeded);
    o.deadline = std::chrono::steady_clock::now() + std::chrono::hours(1);
    CHECK(simulate_scenario(test::compound("late", 2, 10, 1), 10, 1, o) ==
          simulate_scenario(test::compound("late", 2, 10, 1), 10, 1));
}
