#include "advdiff/metrics.hpp"

#include "../oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace advdiff;

namespace {

NetworkDataset toy_network() {
    return NetworkDataset({AgentDataset::from_samples(std::vector<Sample>{{{1.0, 2.0}, 1}, {{-1.0, 0.5}, -1}}),
                           AgentDataset::from_samples(std::vector<Sample>{{{0.5, -1.0}, 1}, {{2.0, 2.0}, -1}})});
}

TrainConfig config(std::size_t T, double mu, double eps, std::uint64_t seed) {
    TrainConfig c;
    c.iterations = T;
    c.schedule = StepSchedule::constant(mu);
    c.epsilon = eps;
    c.seed = seed;
    return c;
}

LipschitzConstants constants(double L_w, double L_ww, double L_wx) {
    LipschitzConstants c;
    c.L_w = L_w;
    c.L_ww = L_ww;
    c.L_wx = L_wx;
    return c;
}

}  // namespace

TEST_CASE("empirical robust risk") {
    const auto data = generate_network_dataset(3, 6, 4, 0.1, 12);
    SUBCASE("zero model gives ln 2 everywhere") {
        const std::vector<double> w(4, 0.0);
        for (double eps : {0.0, 0.3, 2.0}) {
            const auto r = empirical_robust_risk(w, data, eps);
            CHECK(r.global == doctest::Approx(std::log(2.0)).epsilon(1e-15));
            for (double v : r.per_agent) CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-15));
        }
    }
    SUBCASE("eps = 0 equals the mean clean loss") {
        const std::vector<double> w{0.3, -0.1, 0.7, 0.2};
        const auto r = empirical_robust_risk(w, data, 0.0);
        for (std::size_t k = 0; k < 3; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < 6; ++i) {
                const auto smp = data.agent(k).sample(i);
                const std::vector<double> x(smp.x.begin(), smp.x.end());
                s += oracle::logistic_ld(-smp.y * oracle::naive_dot(x, w));
            }
            CHECK(r.per_agent[k] == doctest::Approx(s / 6.0).epsilon(1e-14));
        }
    }
    SUBCASE("hand-summed two-agent toy") {
        const auto toy = toy_network();
        const std::vector<double> w{0.3, -0.2};
        const auto r = empirical_robust_risk(w, toy, 0.1);
        CHECK(r.per_agent[0] == doctest::Approx(0.64556417464016915193).epsilon(1e-14));
        CHECK(r.per_agent[1] == doctest::Approx(0.68328445747837017228).epsilon(1e-14));
        CHECK(r.global == doctest::Approx(0.66442431605926966211).epsilon(1e-14));
        const std::vector<double> pi{0.25, 0.75};
        CHECK(empirical_robust_risk(w, toy, 0.1, pi).global == doctest::Approx(0.67385438676881991719).epsilon(1e-14));
    }
    SUBCASE("identical agents: global equals the per-agent value") {
        const auto one = data.agent(1);
        const NetworkDataset copies({one, one, one});
        const std::vector<double> w{0.1, 0.2, -0.3, 0.4};
        const auto r = empirical_robust_risk(w, copies, 0.2);
        CHECK(r.global == doctest::Approx(r.per_agent[0]).epsilon(1e-15));
    }
    SUBCASE("shape errors") {
        CHECK_THROWS_AS(empirical_robust_risk(std::vector<double>(3, 0.0), data, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(empirical_robust_risk(std::vector<double>(4, 0.0), data, 0.1, std::vector<double>{1.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("population robust risk") {
    const auto holdout = generate_holdout(20000, 5, 0.1, 77);
    const std::vector<double> w{0.4, 0.1, -0.2, 0.3, 0.05};

    SUBCASE("zero model has zero variance") {
        const auto r = population_robust_risk(std::vector<double>(5, 0.0), holdout, 0.5);
        CHECK(r.mean == doctest::Approx(std::log(2.0)).epsilon(1e-15));
        CHECK(r.std_error == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("standard error is sample std over sqrt(M)") {
        const std::vector<ModelVector> models{w};
        const auto losses = adversarial_losses(models, holdout, 0.2)[0];
        const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / losses.size();
        double ss = 0.0;
        for (double v : losses) ss += (v - mean) * (v - mean);
        const double se = std::sqrt(ss / (losses.size() - 1)) / std::sqrt(static_cast<double>(losses.size()));
        const auto r = population_robust_risk(w, holdout, 0.2);
        CHECK(r.mean == doctest::Approx(mean).epsilon(1e-12));
        CHECK(r.std_error == doctest::Approx(se).epsilon(1e-10));
    }
    SUBCASE("disjoint halves agree within their standard errors") {
        std::vector<Sample> first, second;
        for (std::size_t i = 0; i < holdout.size(); ++i) {
            const auto s = holdout.sample(i);
            (i < holdout.size() / 2 ? first : second).push_back({{s.x.begin(), s.x.end()}, s.y});
        }
        const auto a = population_robust_risk(w, AgentDataset::from_samples(first), 0.2);
        const auto b = population_robust_risk(w, AgentDataset::from_samples(second), 0.2);
        CHECK(std::abs(a.mean - b.mean) <= 4.0 * std::hypot(a.std_error, b.std_error));
    }
    SUBCASE("monotone in eps") {
        double prev = -1.0;
        for (double eps : {0.0, 0.05, 0.1, 0.5, 1.0}) {
            const double v = population_robust_risk(w, holdout, eps).mean;
            CHECK(v >= prev);
            prev = v;
        }
    }
    SUBCASE("empty holdout") {
        CHECK_THROWS_AS(population_robust_risk(w, AgentDataset{}, 0.1), std::invalid_argument);
    }
}

TEST_CASE("generalization gap") {
    SUBCASE("holdout identical to the training set gives exactly zero") {
        const auto data = generate_network_dataset(1, 50, 6, 0.1, 321);
        const auto holdout = generate_holdout(50, 6, 0.1, 321);
        const auto run = train(data, build_topology(TopologyKind::isolated, 1), config(200, 0.05, 0.2, 3));
        const auto report = generalization_gap(run, data, holdout, 0.2);
        CHECK(report.agents[0].gap == 0.0);
        CHECK(report.weighted_gap == 0.0);
    }
    SUBCASE("T = 0 gives zero gap at ln 2") {
        const auto data = generate_network_dataset(4, 5, 3, 0.1, 8);
        const auto holdout = generate_holdout(1000, 3, 0.1, 9);
        const auto run = train(data, build_topology(TopologyKind::ring, 4), config(0, 0.03, 0.1, 1));
        const auto report = generalization_gap(run, data, holdout, 0.1);
        for (const auto& a : report.agents) {
            CHECK(a.empirical == doctest::Approx(std::log(2.0)).epsilon(1e-15));
            CHECK(a.gap == doctest::Approx(0.0).epsilon(1e-15));
        }
    }
    SUBCASE("weighted and uniform averages") {
        const auto data = generate_network_dataset(3, 5, 3, 0.1, 18);
        const auto holdout = generate_holdout(500, 3, 0.1, 19);
        const auto run = train(data, build_topology(TopologyKind::isolated, 3), config(50, 0.05, 0.1, 2));
        const std::vector<double> pi{0.5, 0.3, 0.2};
        const auto report = generalization_gap(run, data, holdout, 0.1, pi);
        double weighted = 0.0, uniform = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const auto& a = report.agents[k];
            CHECK(a.gap == doctest::Approx(a.population - a.empirical).epsilon(1e-15));
            weighted += pi[k] * a.gap;
            uniform += a.gap / 3.0;
        }
        CHECK(report.weighted_gap == doctest::Approx(weighted).epsilon(1e-13));
        CHECK(report.uniform_gap == doctest::Approx(uniform).epsilon(1e-13));
    }
}

TEST_CASE("replacement pair selection") {
    const auto all = all_replacement_pairs(3, 4);
    REQUIRE(all.size() == 12);
    CHECK(all[5].agent == 1);
    CHECK(all[5].sample == 1);
    CHECK(select_replacement_pairs(3, 4, 12, 1).size() == 12);
    CHECK(select_replacement_pairs(3, 4, 100, 1).size() == 12);
    const auto some = select_replacement_pairs(3, 4, 5, 9);
    REQUIRE(some.size() == 5);
    for (std::size_t i = 1; i < some.size(); ++i) {
        const bool ordered = some[i - 1].agent < some[i].agent ||
                             (some[i - 1].agent == some[i].agent && some[i - 1].sample < some[i].sample);
        CHECK(ordered);
    }
    CHECK(some.size() == select_replacement_pairs(3, 4, 5, 9).size());
}

TEST_CASE("on-average stability") {
    const auto s = generate_network_dataset(2, 2, 3, 0.1, 61);
    const auto ghost = generate_network_dataset(2, 2, 3, 0.1, 62);
    const auto a = build_topology(TopologyKind::complete, 2);
    const auto cfg = config(20, 0.05, 0.2, 7);

    SUBCASE("ghost equal to the data gives zero") {
        CHECK(on_average_stability(s, s, a, cfg).eta == 0.0);
    }
    SUBCASE("T = 0 gives zero") {
        CHECK(on_average_stability(s, ghost, a, config(0, 0.05, 0.2, 7)).eta == 0.0);
    }
    SUBCASE("equals explicit enumeration of all coupled runs") {
        double per_agent_sum[2] = {0.0, 0.0};
        double all_sum = 0.0;
        for (std::size_t j = 0; j < 2; ++j) {
            for (std::size_t i = 0; i < 2; ++i) {
                const auto [base, other] = train_coupled(s, replace_sample(s, ghost, {j, i}), a, cfg);
                double mean_over_agents = 0.0;
                for (std::size_t k = 0; k < 2; ++k) {
                    std::vector<double> diff(3);
                    for (std::size_t i2 = 0; i2 < 3; ++i2)
                        diff[i2] = base.final_iterates[k][i2] - other.final_iterates[k][i2];
                    const double dist = oracle::naive_norm(diff);
                    per_agent_sum[k] += dist;
                    mean_over_agents += dist / 2.0;
                }
                all_sum += mean_over_agents;
            }
        }
        const auto all = on_average_stability(s, ghost, a, cfg);
        CHECK(all.pairs == 4);
        CHECK(std::abs(all.eta - all_sum / 4.0) <= 1e-15);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(std::abs(on_average_stability(s, ghost, a, cfg, {}, k).eta - per_agent_sum[k] / 4.0) <= 1e-15);
        }
        CHECK(all.eta > 0.0);
    }
    SUBCASE("profile checkpoints agree with separate estimates") {
        auto traced = cfg;
        traced.checkpoints = {5, 20};
        const auto profile = stability_profile(s, ghost, a, traced);
        REQUIRE(profile.iterations == std::vector<std::size_t>{5, 20});
        const auto at5 = on_average_stability(s, ghost, a, config(5, 0.05, 0.2, 7));
        CHECK(profile.all_agents[0].eta == doctest::Approx(at5.eta).epsilon(1e-15));
        CHECK(profile.all_agents[1].eta == doctest::Approx(on_average_stability(s, ghost, a, cfg).eta).epsilon(1e-15));
        CHECK(profile.per_agent[1].size() == 2);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(on_average_stability(s, generate_network_dataset(2, 3, 3, 0.1, 1), a, cfg),
                        std::invalid_argument);
    }
}

TEST_CASE("stability bound arithmetic") {
    const auto c = constants(2.0, 1.0, 3.0);
    SUBCASE("worked example") {
        const auto r = stability_bound(c, 0.1, StepSchedule::constant(0.03), 100, 10, 10);
        CHECK(r.value == doctest::Approx(3.84).epsilon(1e-12));
        REQUIRE(r.constant_step_value.has_value());
        CHECK(*r.constant_step_value == doctest::Approx(r.value).epsilon(1e-12));
        CHECK(r.precondition_met);
    }
    SUBCASE("clean single-agent shape") {
        const auto r = stability_bound(c, 0.0, StepSchedule::constant(0.03), 50, 1, 1);
        CHECK(r.value == doctest::Approx(2.0 * 4.0 * 1.5).epsilon(1e-12));
    }
    SUBCASE("empty horizon") {
        CHECK(stability_bound(c, 0.4, StepSchedule::constant(0.03), 0, 10, 10).value == 0.0);
    }
    SUBCASE("decaying schedule uses the step sum") {
        const auto sched = StepSchedule::decaying(0.1, 5.0);
        const auto r = stability_bound(c, 0.2, sched, 30, 4, 5);
        CHECK(r.value == doctest::Approx(2.0 * 2.0 * (3.0 * 0.2 + 2.0 / 20.0) * sched.total(30)).epsilon(1e-12));
        CHECK_FALSE(r.constant_step_value.has_value());
    }
    SUBCASE("monotone over a parameter grid") {
        auto value = [&](double eps, std::size_t T, double mu, std::size_t K, std::size_t N) {
            return stability_bound(c, eps, StepSchedule::constant(mu), T, K, N).value;
        };
        for (double eps : {0.0, 0.1, 0.3}) {
            for (std::size_t T : {10u, 100u}) {
                for (double mu : {0.01, 0.1}) {
                    for (std::size_t K : {1u, 5u}) {
                        for (std::size_t N : {1u, 10u}) {
                            const double v = value(eps, T, mu, K, N);
                            CHECK(value(eps + 0.1, T, mu, K, N) >= v);
                            CHECK(value(eps, T + 10, mu, K, N) >= v);
                            CHECK(value(eps, T, mu * 2.0, K, N) >= v);
                            CHECK(value(eps, T, mu, K + 1, N) <= v);
                            CHECK(value(eps, T, mu, K, N + 1) <= v);
                        }
                    }
                }
            }
        }
    }
    SUBCASE("step precondition") {
        const auto steep = constants(2.0, 50.0, 3.0);
        CHECK_THROWS_WITH(stability_bound(steep, 0.1, StepSchedule::decaying(0.05, 1.0), 10, 2, 2),
                          doctest::Contains("mu_1 "));
        CHECK_NOTHROW(stability_bound(steep, 0.1, StepSchedule::decaying(0.025, 1.0), 10, 2, 2));
        const auto exact = constants(2.0, 4.0, 3.0);
        CHECK_THROWS_WITH(stability_bound(exact, 0.1, StepSchedule::constant(0.25), 10, 2, 2),
                          doctest::Contains("mu_1 "));
        CHECK_NOTHROW(stability_bound(exact, 0.1, StepSchedule::constant(0.2499), 10, 2, 2));
        const auto loose = stability_bound(steep, 0.1, StepSchedule::constant(0.03), 10, 2, 2, BoundMode::uncertified);
        CHECK_FALSE(loose.precondition_met);
        CHECK(loose.first_violation == std::optional<std::size_t>(1));
        CHECK(loose.value > 0.0);
    }
}

TEST_CASE("excess risk decomposition") {
    const auto data = generate_network_dataset(3, 5, 4, 0.1, 90);
    const auto holdout = generate_holdout(2000, 4, 0.1, 91);
    const auto c = estimate_lipschitz_constants(data, holdout, 1.0, 0.1);
    const auto best = batch_minimizer(data, 0.1, {}, 20000, 0.9 / c.L_ww);

    SUBCASE("minimizer as every agent's model gives zero optimization error") {
        const std::vector<ModelVector> models(3, best.w);
        const auto r = excess_risk_report(models, data, holdout, best.w, 0.1);
        for (const auto& a : r.agents) {
            CHECK(a.optimization == 0.0);
            CHECK(a.total == doctest::Approx(a.generalization).epsilon(1e-15));
        }
    }
    SUBCASE("zero initializer is suboptimal") {
        const auto run = train(data, build_topology(TopologyKind::ring, 3), config(0, 0.03, 0.1, 4));
        const auto r = excess_risk_report(run, data, holdout, best.w, 0.1, {}, 1.5);
        for (const auto& a : r.agents) CHECK(a.optimization >= 0.0);
        CHECK(r.weighted.optimization == doctest::Approx(std::log(2.0) - r.minimizer_objective).epsilon(1e-12));
        CHECK(r.bound == std::optional<double>(1.5));
        CHECK_FALSE(r.generalization_order.empty());
    }
}
