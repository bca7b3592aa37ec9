// Adapt-then-combine adversarial diffusion.
//
//   phi_k = w_k - mu_n * grad g(w_k; x_{k,n}, y_{k,n})      (adapt, every agent)
//   w_k   = sum_l a(l, k) * phi_l                          (combine, once per iteration)
//
// All agents start at w = 0. At iteration n agent k trains on local sample
// sample_index(seed, k, n, N), drawn uniformly with replacement. The index
// depends only on (seed, k, n), so two runs with the same seed on datasets of
// the same shape see identical index sequences, and a run to horizon T is a
// prefix of any longer run.
#pragma once

#include "advdiff/dataset.hpp"
#include "advdiff/linalg.hpp"
#include "advdiff/topology.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace advdiff {

class StepSchedule {
public:
    enum class Kind { constant, decaying };

    static StepSchedule constant(double mu);
    /// mu_n = mu0 / (1 + n / n0)
    static StepSchedule decaying(double mu0, double n0);

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double base() const { return mu0_; }
    [[nodiscard]] double decay_horizon() const { return n0_; }

    /// Step size of iteration n (1-based).
    [[nodiscard]] double at(std::size_t n) const;

    /// Sum of mu_n for n = 1..T, compensated.
    [[nodiscard]] double total(std::size_t iterations) const;

    /// First n in 1..T with mu_n >= 1/L_ww, if any.
    [[nodiscard]] std::optional<std::size_t> first_uncertified(std::size_t iterations, double L_ww) const;

private:
    StepSchedule(Kind kind, double mu0, double n0) : kind_(kind), mu0_(mu0), n0_(n0) {}

    Kind kind_;
    double mu0_;
    double n0_;
};

struct TrainConfig {
    std::size_t iterations = 0;
    StepSchedule schedule = StepSchedule::constant(0.03);
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    /// Agent weights pi; empty means uniform. Consumed by the risk metrics.
    std::vector<double> agent_weights;
    bool record_trajectory = false;
    /// Iterations (<= iterations) at which to snapshot every agent's iterate.
    std::vector<std::size_t> checkpoints;
    /// When set, every mu_n must be strictly below 1/L_ww.
    std::optional<double> certify_smoothness;
};

/// Resolves empty weights to uniform and checks the simplex constraint.
std::vector<double> resolve_agent_weights(std::span<const double> weights, std::size_t agents);

struct Checkpoint {
    std::size_t iteration = 0;
    std::vector<ModelVector> iterates;
    /// Largest ||w_{k,n}|| over all agents and n <= iteration.
    double max_iterate_norm = 0.0;
};

struct TrajectoryPoint {
    std::size_t iteration = 0;
    std::size_t agent = 0;
    double iterate_norm = 0.0;
    std::size_t sample = 0;
};

struct TrainRun {
    TrainConfig config;
    std::string topology;
    std::uint64_t dataset_fingerprint = 0;
    /// F_k(S) = w_{k,T}
    std::vector<ModelVector> final_iterates;
    /// Sample drawn by agent k at iteration n stored at (n-1)*K + k.
    std::vector<std::uint32_t> sample_log;
    double max_iterate_norm = 0.0;
    std::vector<Checkpoint> checkpoints;
    std::vector<TrajectoryPoint> trajectory;

    [[nodiscard]] const Checkpoint& checkpoint(std::size_t iteration) const;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t agent, std::size_t iteration);
    [[nodiscard]] std::size_t agent() const { return agent_; }
    [[nodiscard]] std::size_t iteration() const { return iteration_; }

private:
    std::size_t agent_;
    std::size_t iteration_;
};

/// phi = w - mu * grad g(w; s). Throws DivergenceError(agent, iteration) on a
/// non-finite result.
ModelVector adapt_step(std::span<const double> w, SampleView s, double mu, double epsilon,
                       std::size_t agent = 0, std::size_t iteration = 0);

/// w_k = sum_l a(l, k) phi_l for every k.
std::vector<ModelVector> combine_step(std::span<const ModelVector> phi, const CombinationMatrix& a);

TrainRun train(const NetworkDataset& data, const CombinationMatrix& a, const TrainConfig& cfg);

/// Runs on `data` and `other` with one shared sampling sequence.
std::pair<TrainRun, TrainRun> train_coupled(const NetworkDataset& data, const NetworkDataset& other,
                                            const CombinationMatrix& a, const TrainConfig& cfg);

struct BatchResult {
    ModelVector w;
    double gradient_norm = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// R_S at every visited point, starting from w = 0.
    std::vector<double> objective;
};

/// Full-batch gradient descent on R_S(w) = sum_k pi_k mean_i g(w; x_ki, y_ki)
/// from w = 0. Stops when ||grad|| < 1e-8 or the budget is spent; running
/// out of budget is reported through `converged`, not thrown.
BatchResult batch_minimizer(const NetworkDataset& data, double epsilon, std::span<const double> agent_weights,
                            std::size_t max_iterations, double step);

/// Writes `iteration,agent,iterate_norm,sample` for a run recorded with
/// record_trajectory.
void write_trajectory_csv(const TrainRun& run, const std::filesystem::path& path);

}  // namespace advdiff
