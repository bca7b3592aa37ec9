// Experiment sweeps over topology x epsilon x horizon x trial.
//
// Config files are flat `key = value` text; `#` starts a comment and lists are
// comma separated. Recognised keys (defaults in brackets):
//
//   K [10]  N [10]  d [200]  flip_rate [0.1]
//   schedule [constant|decaying]  mu [0.03]  decay_n0 [100]
//   epsilon [0,0.05,0.1,0.2,0.4]  iters [50,100,200,400,800]
//   topology [complete,isolated,ring,starlike]
//   trials [15]  seed [1]  holdout [10000]
//   stability [off]  stability_pairs [100]  iterate_norm_cap [observed]
//   threads [hardware concurrency]  out [results]
#pragma once

#include "advdiff/diffusion.hpp"
#include "advdiff/robust_loss.hpp"
#include "advdiff/topology.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace advdiff {

struct SweepConfig {
    std::size_t agents = 10;
    std::size_t samples_per_agent = 10;
    std::size_t dim = 200;
    double flip_rate = 0.1;
    StepSchedule::Kind schedule = StepSchedule::Kind::constant;
    double mu = 0.03;
    double decay_n0 = 100.0;
    std::vector<double> epsilons{0.0, 0.05, 0.1, 0.2, 0.4};
    std::vector<std::size_t> iterations{50, 100, 200, 400, 800};
    std::vector<TopologyKind> topologies{TopologyKind::complete, TopologyKind::isolated, TopologyKind::ring,
                                         TopologyKind::starlike};
    std::size_t trials = 15;
    std::uint64_t seed = 1;
    std::size_t holdout = 10000;
    bool stability = false;
    std::size_t stability_pairs = 100;
    /// Overrides the observed max iterate norm when certifying L_wx.
    std::optional<double> iterate_norm_cap;
    std::size_t threads = 0;  // 0: hardware concurrency
    std::filesystem::path out = "results";

    [[nodiscard]] StepSchedule step_schedule() const;
};

class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& key, const std::string& message)
        : std::invalid_argument("config key '" + key + "': " + message), key_(key) {}
    [[nodiscard]] const std::string& key() const { return key_; }

private:
    std::string key_;
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Parses config text. Unknown keys and malformed values throw ConfigError.
SweepConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides = {});

/// Reads `path` when given, applies `overrides` (later wins), validates.
SweepConfig parse_config(const std::optional<std::filesystem::path>& path, const ConfigOverrides& overrides = {});

void validate_config(const SweepConfig& cfg);

/// Renders a config back to `key = value` text that parses to the same value.
std::string to_config_text(const SweepConfig& cfg);

struct SweepRow {
    std::string topology;
    double epsilon = 0.0;
    std::size_t iterations = 0;
    std::size_t trial = 0;
    std::size_t agent = 0;
    double emp_risk = 0.0;
    double pop_risk = 0.0;
    double pop_se = 0.0;
    double gap = 0.0;
    double bound = 0.0;
    std::optional<double> eta_hat;
    std::optional<double> eta_se;
    double max_iterate_norm = 0.0;
    double slem = 0.0;
    bool diverged = false;
};

struct SummaryRow {
    std::string topology;
    double epsilon = 0.0;
    std::size_t iterations = 0;
    double gap_mean = 0.0;
    double gap_std = 0.0;
    double bound_mean = 0.0;
    std::size_t rows_used = 0;
};

/// Constants and bound inputs behind every (topology, eps, T, trial) cell.
struct CellConstants {
    std::string topology;
    double epsilon = 0.0;
    std::size_t iterations = 0;
    std::size_t trial = 0;
    LipschitzConstants constants;
    double step_sum = 0.0;
    bool precondition_met = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SummaryRow> summary;
    std::vector<CellConstants> constants;
    std::size_t diverged_runs = 0;
};

SweepResult run_sweep(const SweepConfig& cfg);

/// Rebuilds the summary table from rows, skipping diverged rows.
std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows);

/// Writes rows.csv, summary.csv and constants.csv into `dir` (created if
/// missing).
void emit_csv(const SweepResult& result, const std::filesystem::path& dir);

}  // namespace advdiff
