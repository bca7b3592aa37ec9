// Risks, generalization gap, on-average model stability and the
// stability-based generalization bound for adversarial diffusion.
#pragma once

#include "advdiff/dataset.hpp"
#include "advdiff/diffusion.hpp"
#include "advdiff/linalg.hpp"
#include "advdiff/robust_loss.hpp"
#include "advdiff/topology.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace advdiff {

/// Adversarial loss of every sample in `data` at each model in `models`;
/// result[m][i]. One shared kernel serves empirical and population risks so
/// both sides of a gap are evaluated identically.
std::vector<std::vector<double>> adversarial_losses(std::span<const ModelVector> models, const AgentDataset& data,
                                                    double epsilon);

struct EmpiricalRisk {
    /// R_S(w) = sum_k pi_k R_k_hat(w)
    double global = 0.0;
    /// R_k_hat(w), mean adversarial loss over agent k's samples.
    std::vector<double> per_agent;
};

EmpiricalRisk empirical_robust_risk(std::span<const double> w, const NetworkDataset& data, double epsilon,
                                    std::span<const double> agent_weights = {});

struct PopulationRisk {
    double mean = 0.0;
    /// sample std / sqrt(M)
    double std_error = 0.0;
};

PopulationRisk population_robust_risk(std::span<const double> w, const AgentDataset& holdout, double epsilon);

struct AgentRisk {
    /// Empirical robust risk on agent k's own samples.
    double empirical = 0.0;
    /// R_S(F_k) over the whole network dataset.
    double empirical_global = 0.0;
    double population = 0.0;
    double population_se = 0.0;
    /// population - empirical
    double gap = 0.0;
};

struct RiskReport {
    std::vector<AgentRisk> agents;
    double weighted_gap = 0.0;
    double uniform_gap = 0.0;
    double weighted_empirical = 0.0;
    double weighted_population = 0.0;
};

/// Risks of one model per agent (iterates[k] is evaluated on agent k's data).
RiskReport risk_report(std::span<const ModelVector> iterates, const NetworkDataset& data,
                       const AgentDataset& holdout, double epsilon, std::span<const double> agent_weights = {});

RiskReport generalization_gap(const TrainRun& run, const NetworkDataset& data, const AgentDataset& holdout,
                              double epsilon, std::span<const double> agent_weights = {});

struct StabilityEstimate {
    double eta = 0.0;
    std::size_t pairs = 0;
    /// Standard error of the per-pair distances.
    double std_error = 0.0;
};

/// Every (agent, sample) position, agent-major.
std::vector<ReplacementIndex> all_replacement_pairs(std::size_t agents, std::size_t samples_per_agent);

/// All pairs when budget >= K*N, otherwise `budget` distinct pairs drawn
/// without replacement from a stream derived from `seed`, sorted.
std::vector<ReplacementIndex> select_replacement_pairs(std::size_t agents, std::size_t samples_per_agent,
                                                       std::size_t budget, std::uint64_t seed);

/// mean over pairs (j, i) of ||F_k(S) - F_k(S^(ij))||, with the sampling
/// sequence shared between the runs. `pairs` empty means all K*N pairs;
/// `target_agent` empty averages the distance over agents.
StabilityEstimate on_average_stability(const NetworkDataset& data, const NetworkDataset& ghost,
                                       const CombinationMatrix& a, const TrainConfig& cfg,
                                       std::span<const ReplacementIndex> pairs = {},
                                       std::optional<std::size_t> target_agent = std::nullopt);

struct StabilityProfile {
    std::vector<std::size_t> iterations;
    /// per_agent[c][k]: estimate for agent k at iterations[c].
    std::vector<std::vector<StabilityEstimate>> per_agent;
    /// all_agents[c]: distance averaged over agents, then over pairs.
    std::vector<StabilityEstimate> all_agents;
};

/// Stability at every checkpoint of cfg (or at cfg.iterations when none are
/// set) from one set of coupled runs.
StabilityProfile stability_profile(const NetworkDataset& data, const NetworkDataset& ghost,
                                   const CombinationMatrix& a, const TrainConfig& cfg,
                                   std::span<const ReplacementIndex> pairs = {});

enum class BoundMode {
    /// Throw if some mu_n is not below 1/L_ww.
    certified,
    /// Evaluate the formula regardless; the report records the violation.
    uncertified,
};

struct BoundReport {
    LipschitzConstants constants;
    double epsilon = 0.0;
    double step_sum = 0.0;
    /// 2 L_w (L_wx eps + L_w/(KN)) sum_n mu_n
    double value = 0.0;
    /// 2 L_w mu T (L_wx eps + L_w/(KN)); set for constant schedules only.
    std::optional<double> constant_step_value;
    bool precondition_met = true;
    std::optional<std::size_t> first_violation;
};

BoundReport stability_bound(const LipschitzConstants& constants, double epsilon, const StepSchedule& schedule,
                           std::size_t iterations, std::size_t agents, std::size_t samples_per_agent,
                           BoundMode mode = BoundMode::certified);

struct ExcessRiskTerms {
    /// R(F_k) - R_S(F_k)
    double generalization = 0.0;
    /// R_S(F_k) - R_S(w_hat)
    double optimization = 0.0;
    double total = 0.0;
};

struct ExcessRiskReport {
    std::vector<ExcessRiskTerms> agents;
    /// pi-weighted average of the per-agent terms.
    ExcessRiskTerms weighted;
    double minimizer_objective = 0.0;
    std::optional<double> bound;
    /// Reference orders for constant steps; reported, never asserted.
    std::string generalization_order = "O(mu*T*(eps + 1/(K*N)))";
    std::string optimization_order = "O(1/(mu*T)) + O(mu)";
};

ExcessRiskReport excess_risk_report(const TrainRun& run, const NetworkDataset& data, const AgentDataset& holdout,
                                    std::span<const double> minimizer, double epsilon,
                                    std::span<const double> agent_weights = {},
                                    std::optional<double> bound = std::nullopt);

/// Same decomposition for explicit per-agent models (e.g. a checkpoint).
ExcessRiskReport excess_risk_report(std::span<const ModelVector> iterates, const NetworkDataset& data,
                                    const AgentDataset& holdout, std::span<const double> minimizer, double epsilon,
                                    std::span<const double> agent_weights = {},
                                    std::optional<double> bound = std::nullopt);

}  // namespace advdiff
