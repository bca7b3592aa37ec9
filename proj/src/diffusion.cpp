#include "advdiff/diffusion.hpp"

#include "advdiff/format.hpp"
#include "advdiff/rng.hpp"
#include "advdiff/robust_loss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace advdiff {

StepSchedule StepSchedule::constant(double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("step size mu must be > 0");
    return {Kind::constant, mu, 0.0};
}

StepSchedule StepSchedule::decaying(double mu0, double n0) {
    if (!(mu0 > 0.0) || !std::isfinite(mu0)) throw std::invalid_argument("step size mu0 must be > 0");
    if (!(n0 > 0.0) || !std::isfinite(n0)) throw std::invalid_argument("decay horizon n0 must be > 0");
    return {Kind::decaying, mu0, n0};
}

double StepSchedule::at(std::size_t n) const {
    if (kind_ == Kind::constant) return mu0_;
    return mu0_ / (1.0 + static_cast<double>(n) / n0_);
}

double StepSchedule::total(std::size_t iterations) const {
    if (kind_ == Kind::constant) return mu0_ * static_cast<double>(iterations);
    CompensatedSum s;
    for (std::size_t n = 1; n <= iterations; ++n) s.add(at(n));
    return s.value();
}

std::optional<std::size_t> StepSchedule::first_uncertified(std::size_t iterations, double L_ww) const {
    for (std::size_t n = 1; n <= iterations; ++n) {
        if (!(at(n) * L_ww < 1.0)) return n;
    }
    return std::nullopt;
}

std::vector<double> resolve_agent_weights(std::span<const double> weights, std::size_t agents) {
    if (weights.empty()) return std::vector<double>(agents, 1.0 / static_cast<double>(agents));
    if (weights.size() != agents) {
        throw std::invalid_argument("agent weights: expected " + std::to_string(agents) + " entries");
    }
    double total = 0.0;
    for (double p : weights) {
        if (!(p >= 0.0)) throw std::invalid_argument("agent weights must be >= 0");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("agent weights must sum to 1");
    return {weights.begin(), weights.end()};
}

const Checkpoint& TrainRun::checkpoint(std::size_t iteration) const {
    for (const auto& c : checkpoints) {
        if (c.iteration == iteration) return c;
    }
    throw std::out_of_range("no checkpoint recorded at iteration " + std::to_string(iteration));
}

DivergenceError::DivergenceError(std::size_t agent, std::size_t iteration)
    : std::runtime_error("diffusion diverged: non-finite iterate at agent " + std::to_string(agent) +
                         ", iteration " + std::to_string(iteration)),
      agent_(agent),
      iteration_(iteration) {}

ModelVector adapt_step(std::span<const double> w, SampleView s, double mu, double epsilon, std::size_t agent,
                       std::size_t iteration) {
    if (!(mu > 0.0)) throw std::invalid_argument("adapt_step: mu must be > 0");
    ModelVector phi(w.size());
    adversarial_gradient_into(w, s, epsilon, phi);
    for (std::size_t i = 0; i < w.size(); ++i) phi[i] = w[i] - mu * phi[i];
    if (!all_finite(phi)) throw DivergenceError(agent, iteration);
    return phi;
}

namespace {

void combine_into(std::span<const ModelVector> phi, const CombinationMatrix& a, std::vector<ModelVector>& out) {
    const std::size_t agents = a.agents();
    if (phi.size() != agents) throw std::invalid_argument("combine_step: expected one vector per agent");
    const std::size_t dim = phi.front().size();
    for (const auto& v : phi) require_same_size(v.size(), dim, "combine_step");
    out.resize(agents);
    for (std::size_t k = 0; k < agents; ++k) {
        auto& wk = out[k];
        wk.assign(dim, 0.0);
        for (std::size_t l = 0; l < agents; ++l) {
            const double weight = a(l, k);
            if (weight == 0.0) continue;
            const auto& src = phi[l];
            for (std::size_t i = 0; i < dim; ++i) wk[i] += weight * src[i];
        }
    }
}

void validate_run_inputs(const NetworkDataset& data, const CombinationMatrix& a, const TrainConfig& cfg) {
    if (data.agents() != a.agents()) {
        throw std::invalid_argument("train: dataset has " + std::to_string(data.agents()) +
                                    " agents but the combination matrix has " + std::to_string(a.agents()));
    }
    if (cfg.epsilon < 0.0) throw std::invalid_argument("train: epsilon must be >= 0");
    for (std::size_t c : cfg.checkpoints) {
        if (c > cfg.iterations) {
            throw std::invalid_argument("train: checkpoint " + std::to_string(c) + " exceeds horizon T = " +
                                        std::to_string(cfg.iterations));
        }
    }
    if (cfg.certify_smoothness) {
        if (auto n = cfg.schedule.first_uncertified(cfg.iterations, *cfg.certify_smoothness)) {
            throw std::invalid_argument("train: step size at iteration " + std::to_string(*n) +
                                        " is not below 1/L_ww");
        }
    }
    resolve_agent_weights(cfg.agent_weights, data.agents());
}

}  // namespace

std::vector<ModelVector> combine_step(std::span<const ModelVector> phi, const CombinationMatrix& a) {
    std::vector<ModelVector> out;
    combine_into(phi, a, out);
    return out;
}

TrainRun train(const NetworkDataset& data, const CombinationMatrix& a, const TrainConfig& cfg) {
    validate_run_inputs(data, a, cfg);
    const std::size_t agents = data.agents();
    const std::size_t dim = data.dim();
    const std::size_t local = data.samples_per_agent();

    TrainRun run;
    run.config = cfg;
    run.topology = a.name();
    run.dataset_fingerprint = data.fingerprint();
    run.sample_log.reserve(cfg.iterations * agents);

    std::vector<std::size_t> wanted = cfg.checkpoints;
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
    auto next_checkpoint = wanted.begin();

    std::vector<ModelVector> w(agents, ModelVector(dim, 0.0));
    std::vector<ModelVector> phi(agents, ModelVector(dim));
    Vector grad(dim);
    double max_norm = 0.0;

    auto snapshot = [&](std::size_t n) {
        while (next_checkpoint != wanted.end() && *next_checkpoint == n) {
            run.checkpoints.push_back({n, w, max_norm});
            ++next_checkpoint;
        }
    };
    snapshot(0);

    for (std::size_t n = 1; n <= cfg.iterations; ++n) {
        const double mu = cfg.schedule.at(n);
        for (std::size_t k = 0; k < agents; ++k) {
            const std::size_t idx = sample_index(cfg.seed, k, n, local);
            run.sample_log.push_back(static_cast<std::uint32_t>(idx));
            const auto s = data.agent(k).sample(idx);
            adversarial_gradient_into(w[k], s, cfg.epsilon, grad);
            auto& out = phi[k];
            for (std::size_t i = 0; i < dim; ++i) out[i] = w[k][i] - mu * grad[i];
            if (!all_finite(out)) throw DivergenceError(k, n);
        }
        combine_into(phi, a, w);
        for (std::size_t k = 0; k < agents; ++k) {
            const double norm = norm2(w[k]);
            if (!std::isfinite(norm)) throw DivergenceError(k, n);
            max_norm = std::max(max_norm, norm);
            if (cfg.record_trajectory) {
                run.trajectory.push_back({n, k, norm, run.sample_log[(n - 1) * agents + k]});
            }
        }
        snapshot(n);
    }

    run.final_iterates = std::move(w);
    run.max_iterate_norm = max_norm;
    return run;
}

std::pair<TrainRun, TrainRun> train_coupled(const NetworkDataset& data, const NetworkDataset& other,
                                            const CombinationMatrix& a, const TrainConfig& cfg) {
    if (!data.same_shape(other)) throw std::invalid_argument("train_coupled: datasets differ in shape");
    auto first = train(data, a, cfg);
    auto second = train(other, a, cfg);
    if (first.sample_log != second.sample_log) {
        throw std::logic_error("train_coupled: sampling sequences diverged");
    }
    return {std::move(first), std::move(second)};
}

namespace {

double batch_objective_and_gradient(const NetworkDataset& data, double epsilon, std::span<const double> weights,
                                    std::span<const double> w, std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    Vector sample_grad(w.size());
    CompensatedSum objective;
    const double inv_n = 1.0 / static_cast<double>(data.samples_per_agent());
    for (std::size_t k = 0; k < data.agents(); ++k) {
        const auto& shard = data.agent(k);
        const double scale = weights[k] * inv_n;
        if (scale == 0.0) continue;
        for (std::size_t i = 0; i < shard.size(); ++i) {
            const auto s = shard.sample(i);
            objective.add(scale * adversarial_loss(w, s, epsilon));
            adversarial_gradient_into(w, s, epsilon, sample_grad);
            for (std::size_t j = 0; j < w.size(); ++j) grad[j] += scale * sample_grad[j];
        }
    }
    return objective.value();
}

}  // namespace

BatchResult batch_minimizer(const NetworkDataset& data, double epsilon, std::span<const double> agent_weights,
                            std::size_t max_iterations, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("batch_minimizer: step must be > 0");
    if (epsilon < 0.0) throw std::invalid_argument("batch_minimizer: epsilon must be >= 0");
    const auto weights = resolve_agent_weights(agent_weights, data.agents());
    constexpr double kGradientTolerance = 1e-8;

    BatchResult result;
    result.w.assign(data.dim(), 0.0);
    Vector grad(data.dim());
    result.objective.push_back(batch_objective_and_gradient(data, epsilon, weights, result.w, grad));
    result.gradient_norm = norm2(grad);
    while (result.iterations < max_iterations && result.gradient_norm >= kGradientTolerance) {
        for (std::size_t j = 0; j < grad.size(); ++j) result.w[j] -= step * grad[j];
        if (!all_finite(result.w)) throw DivergenceError(0, result.iterations + 1);
        ++result.iterations;
        result.objective.push_back(batch_objective_and_gradient(data, epsilon, weights, result.w, grad));
        result.gradient_norm = norm2(grad);
    }
    result.converged = result.gradient_norm < kGradientTolerance;
    return result;
}

void write_trajectory_csv(const TrainRun& run, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "iteration,agent,iterate_norm,sample\n";
    for (const auto& p : run.trajectory) {
        out << p.iteration << ',' << p.agent << ',' << format_double(p.iterate_norm) << ',' << p.sample << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace advdiff
