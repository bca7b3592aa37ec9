#include "advdiff/metrics.hpp"

#include "advdiff/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace advdiff {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double mean_of(std::span<const double> v) {
    CompensatedSum s;
    for (double x : v) s.add(x);
    return s.value() / static_cast<double>(v.size());
}

}  // namespace

std::vector<std::vector<double>> adversarial_losses(std::span<const ModelVector> models, const AgentDataset& data,
                                                    double epsilon) {
    if (epsilon < 0.0) throw std::invalid_argument("perturbation radius must be >= 0");
    const auto rows = static_cast<Eigen::Index>(data.size());
    const auto dim = static_cast<Eigen::Index>(data.dim());
    const auto cols = static_cast<Eigen::Index>(models.size());
    std::vector<std::vector<double>> out(models.size());
    if (models.empty() || rows == 0) return out;

    Eigen::MatrixXd w(dim, cols);
    for (Eigen::Index m = 0; m < cols; ++m) {
        const auto& model = models[static_cast<std::size_t>(m)];
        require_same_size(model.size(), data.dim(), "adversarial_losses");
        for (Eigen::Index j = 0; j < dim; ++j) w(j, m) = model[static_cast<std::size_t>(j)];
    }
    const Eigen::Map<const RowMatrix> x(data.features().data(), rows, dim);
    const Eigen::MatrixXd scores = x * w;

    const auto labels = data.labels();
    for (Eigen::Index m = 0; m < cols; ++m) {
        const double shift = epsilon * norm2(models[static_cast<std::size_t>(m)]);
        auto& losses = out[static_cast<std::size_t>(m)];
        losses.resize(data.size());
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double y = static_cast<double>(labels[static_cast<std::size_t>(i)]);
            losses[static_cast<std::size_t>(i)] = softplus(-y * scores(i, m) + shift);
        }
    }
    return out;
}

EmpiricalRisk empirical_robust_risk(std::span<const double> w, const NetworkDataset& data, double epsilon,
                                    std::span<const double> agent_weights) {
    const auto weights = resolve_agent_weights(agent_weights, data.agents());
    const std::vector<ModelVector> model{ModelVector(w.begin(), w.end())};
    EmpiricalRisk risk;
    risk.per_agent.reserve(data.agents());
    CompensatedSum global;
    for (std::size_t k = 0; k < data.agents(); ++k) {
        const auto losses = adversarial_losses(model, data.agent(k), epsilon);
        const double r = mean_of(losses.front());
        risk.per_agent.push_back(r);
        global.add(weights[k] * r);
    }
    risk.global = global.value();
    return risk;
}

PopulationRisk population_robust_risk(std::span<const double> w, const AgentDataset& holdout, double epsilon) {
    if (holdout.empty()) throw std::invalid_argument("population risk needs a nonempty holdout set");
    const std::vector<ModelVector> model{ModelVector(w.begin(), w.end())};
    const auto losses = adversarial_losses(model, holdout, epsilon);
    const auto stat = mean_stat(losses.front());
    return {stat.mean, stat.std_error};
}

RiskReport risk_report(std::span<const ModelVector> iterates, const NetworkDataset& data,
                       const AgentDataset& holdout, double epsilon, std::span<const double> agent_weights) {
    if (iterates.size() != data.agents()) {
        throw std::invalid_argument("risk_report: expected one model per agent");
    }
    if (holdout.empty()) throw std::invalid_argument("population risk needs a nonempty holdout set");
    const auto weights = resolve_agent_weights(agent_weights, data.agents());
    const auto population = adversarial_losses(iterates, holdout, epsilon);

    RiskReport report;
    report.agents.resize(data.agents());
    CompensatedSum weighted_gap, uniform_gap, weighted_emp, weighted_pop;
    for (std::size_t k = 0; k < data.agents(); ++k) {
        auto& r = report.agents[k];
        const std::span<const ModelVector> one(&iterates[k], 1);
        CompensatedSum global;
        for (std::size_t j = 0; j < data.agents(); ++j) {
            const double local = mean_of(adversarial_losses(one, data.agent(j), epsilon).front());
            if (j == k) r.empirical = local;
            global.add(weights[j] * local);
        }
        r.empirical_global = global.value();
        const auto pop = mean_stat(population[k]);
        r.population = pop.mean;
        r.population_se = pop.std_error;
        r.gap = r.population - r.empirical;

        weighted_gap.add(weights[k] * r.gap);
        uniform_gap.add(r.gap);
        weighted_emp.add(weights[k] * r.empirical);
        weighted_pop.add(weights[k] * r.population);
    }
    report.weighted_gap = weighted_gap.value();
    report.uniform_gap = uniform_gap.value() / static_cast<double>(data.agents());
    report.weighted_empirical = weighted_emp.value();
    report.weighted_population = weighted_pop.value();
    return report;
}

RiskReport generalization_gap(const TrainRun& run, const NetworkDataset& data, const AgentDataset& holdout,
                              double epsilon, std::span<const double> agent_weights) {
    return risk_report(run.final_iterates, data, holdout, epsilon, agent_weights);
}

std::vector<ReplacementIndex> all_replacement_pairs(std::size_t agents, std::size_t samples_per_agent) {
    std::vector<ReplacementIndex> out;
    out.reserve(agents * samples_per_agent);
    for (std::size_t j = 0; j < agents; ++j) {
        for (std::size_t i = 0; i < samples_per_agent; ++i) out.push_back({j, i});
    }
    return out;
}

std::vector<ReplacementIndex> select_replacement_pairs(std::size_t agents, std::size_t samples_per_agent,
                                                       std::size_t budget, std::uint64_t seed) {
    auto pairs = all_replacement_pairs(agents, samples_per_agent);
    if (budget >= pairs.size()) return pairs;
    // Partial Fisher-Yates with our own uniform draws.
    RandomStream stream(derive_seed(seed, StreamTag::pair_subsample));
    for (std::size_t t = 0; t < budget; ++t) {
        const std::size_t remaining = pairs.size() - t;
        auto pick = static_cast<std::size_t>(stream.uniform01() * static_cast<double>(remaining));
        pick = std::min(pick, remaining - 1);
        std::swap(pairs[t], pairs[t + pick]);
    }
    pairs.resize(budget);
    std::sort(pairs.begin(), pairs.end(), [](const ReplacementIndex& a, const ReplacementIndex& b) {
        return a.agent != b.agent ? a.agent < b.agent : a.sample < b.sample;
    });
    return pairs;
}

StabilityProfile stability_profile(const NetworkDataset& data, const NetworkDataset& ghost,
                                   const CombinationMatrix& a, const TrainConfig& cfg,
                                   std::span<const ReplacementIndex> pairs) {
    if (!data.same_shape(ghost)) throw std::invalid_argument("stability: datasets differ in shape");
    std::vector<ReplacementIndex> owned;
    if (pairs.empty()) {
        owned = all_replacement_pairs(data.agents(), data.samples_per_agent());
        pairs = owned;
    }

    TrainConfig run_cfg = cfg;
    if (run_cfg.checkpoints.empty()) run_cfg.checkpoints = {cfg.iterations};
    std::sort(run_cfg.checkpoints.begin(), run_cfg.checkpoints.end());
    run_cfg.checkpoints.erase(std::unique(run_cfg.checkpoints.begin(), run_cfg.checkpoints.end()),
                              run_cfg.checkpoints.end());
    run_cfg.record_trajectory = false;

    const std::size_t agents = data.agents();
    const std::size_t n_checkpoints = run_cfg.checkpoints.size();
    const auto base = train(data, a, run_cfg);

    // distances[c][k][p]
    std::vector<std::vector<std::vector<double>>> distances(
        n_checkpoints, std::vector<std::vector<double>>(agents, std::vector<double>(pairs.size())));
    std::vector<std::vector<double>> pair_means(n_checkpoints, std::vector<double>(pairs.size()));

    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto replaced = replace_sample(data, ghost, pairs[p]);
        const auto other = train(replaced, a, run_cfg);
        if (other.sample_log != base.sample_log) {
            throw std::logic_error("stability: coupled runs drew different sample sequences");
        }
        for (std::size_t c = 0; c < n_checkpoints; ++c) {
            const auto& lhs = base.checkpoints[c].iterates;
            const auto& rhs = other.checkpoints[c].iterates;
            CompensatedSum over_agents;
            for (std::size_t k = 0; k < agents; ++k) {
                const double dist = distance(lhs[k], rhs[k]);
                distances[c][k][p] = dist;
                over_agents.add(dist);
            }
            pair_means[c][p] = over_agents.value() / static_cast<double>(agents);
        }
    }

    StabilityProfile profile;
    profile.iterations = run_cfg.checkpoints;
    profile.per_agent.resize(n_checkpoints);
    for (std::size_t c = 0; c < n_checkpoints; ++c) {
        for (std::size_t k = 0; k < agents; ++k) {
            const auto stat = mean_stat(distances[c][k]);
            profile.per_agent[c].push_back({stat.mean, pairs.size(), stat.std_error});
        }
        const auto stat = mean_stat(pair_means[c]);
        profile.all_agents.push_back({stat.mean, pairs.size(), stat.std_error});
    }
    return profile;
}

StabilityEstimate on_average_stability(const NetworkDataset& data, const NetworkDataset& ghost,
                                       const CombinationMatrix& a, const TrainConfig& cfg,
                                       std::span<const ReplacementIndex> pairs,
                                       std::optional<std::size_t> target_agent) {
    if (target_agent && *target_agent >= data.agents()) {
        throw std::out_of_range("stability: target agent out of range");
    }
    TrainConfig run_cfg = cfg;
    run_cfg.checkpoints = {cfg.iterations};
    const auto profile = stability_profile(data, ghost, a, run_cfg, pairs);
    if (target_agent) return profile.per_agent.front()[*target_agent];
    return profile.all_agents.front();
}

BoundReport stability_bound(const LipschitzConstants& constants, double epsilon, const StepSchedule& schedule,
                           std::size_t iterations, std::size_t agents, std::size_t samples_per_agent,
                           BoundMode mode) {
    if (epsilon < 0.0) throw std::invalid_argument("bound: epsilon must be >= 0");
    if (agents == 0 || samples_per_agent == 0) throw std::invalid_argument("bound: K and N must be >= 1");
    if (!(constants.L_w > 0.0 && constants.L_ww > 0.0 && constants.L_wx > 0.0)) {
        throw std::invalid_argument("bound: Lipschitz constants must be strictly positive");
    }
    BoundReport report;
    report.constants = constants;
    report.epsilon = epsilon;
    report.first_violation = schedule.first_uncertified(iterations, constants.L_ww);
    report.precondition_met = !report.first_violation.has_value();
    if (mode == BoundMode::certified && report.first_violation) {
        throw std::invalid_argument("bound: step size mu_" + std::to_string(*report.first_violation) + " = " +
                                    std::to_string(schedule.at(*report.first_violation)) +
                                    " is not below 1/L_ww = " + std::to_string(1.0 / constants.L_ww));
    }
    const double kn = static_cast<double>(agents) * static_cast<double>(samples_per_agent);
    const double rate = constants.L_wx * epsilon + constants.L_w / kn;
    report.step_sum = schedule.total(iterations);
    report.value = 2.0 * constants.L_w * rate * report.step_sum;
    if (schedule.kind() == StepSchedule::Kind::constant) {
        const double special = 2.0 * constants.L_w * schedule.base() * static_cast<double>(iterations) * rate;
        if (std::abs(special - report.value) > 1e-12 * std::max(1.0, std::abs(special))) {
            throw std::logic_error("bound: constant-step form disagrees with the general form");
        }
        report.constant_step_value = special;
    }
    return report;
}

ExcessRiskReport excess_risk_report(std::span<const ModelVector> iterates, const NetworkDataset& data,
                                    const AgentDataset& holdout, std::span<const double> minimizer, double epsilon,
                                    std::span<const double> agent_weights, std::optional<double> bound) {
    const auto weights = resolve_agent_weights(agent_weights, data.agents());
    const auto risks = risk_report(iterates, data, holdout, epsilon, weights);
    ExcessRiskReport report;
    report.minimizer_objective = empirical_robust_risk(minimizer, data, epsilon, weights).global;
    report.bound = bound;
    CompensatedSum gen, opt;
    for (std::size_t k = 0; k < data.agents(); ++k) {
        ExcessRiskTerms t;
        t.generalization = risks.agents[k].population - risks.agents[k].empirical_global;
        t.optimization = risks.agents[k].empirical_global - report.minimizer_objective;
        t.total = t.generalization + t.optimization;
        report.agents.push_back(t);
        gen.add(weights[k] * t.generalization);
        opt.add(weights[k] * t.optimization);
    }
    report.weighted.generalization = gen.value();
    report.weighted.optimization = opt.value();
    report.weighted.total = report.weighted.generalization + report.weighted.optimization;
    return report;
}

ExcessRiskReport excess_risk_report(const TrainRun& run, const NetworkDataset& data, const AgentDataset& holdout,
                                    std::span<const double> minimizer, double epsilon,
                                    std::span<const double> agent_weights, std::optional<double> bound) {
    return excess_risk_report(run.final_iterates, data, holdout, minimizer, epsilon, agent_weights, bound);
}

}  // namespace advdiff
