// advdiff: run adversarial diffusion generalization sweeps.
//
//   advdiff [--config PATH] [--topology LIST] [--epsilon LIST] [--iters LIST] [--trials INT]
//           [--seed INT] [--mu FLOAT] [--stability on|off] [--holdout INT] [--out DIR]
//   advdiff dataset --trial I --file PATH [sweep flags]    export one trial's training data
//   advdiff trace --trial I --file PATH [sweep flags]      dump one run's trajectory
//
// `dataset` and `trace` use the first topology/epsilon and the largest horizon
// of the resolved config, with the same seeds the sweep would use.
#include "advdiff/dataset.hpp"
#include "advdiff/diffusion.hpp"
#include "advdiff/rng.hpp"
#include "advdiff/sweep.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <iostream>

namespace {

struct Flags {
    std::string config;
    std::string topology, epsilon, iters, trials, seed, mu, stability, holdout, out, threads;
};

advdiff::SweepConfig resolve(const Flags& f) {
    advdiff::ConfigOverrides overrides;
    auto add = [&](const char* key, const std::string& v) {
        if (!v.empty()) overrides.emplace_back(key, v);
    };
    add("topology", f.topology);
    add("epsilon", f.epsilon);
    add("iters", f.iters);
    add("trials", f.trials);
    add("seed", f.seed);
    add("mu", f.mu);
    add("stability", f.stability);
    add("holdout", f.holdout);
    add("out", f.out);
    add("threads", f.threads);
    std::optional<std::filesystem::path> path;
    if (!f.config.empty()) path = f.config;
    return advdiff::parse_config(path, overrides);
}

struct TrialSeeds {
    std::uint64_t data;
    std::uint64_t sampling;
};

TrialSeeds trial_seeds(const advdiff::SweepConfig& cfg, std::size_t trial) {
    const auto t = advdiff::derive_seed(cfg.seed, advdiff::StreamTag::trial, trial);
    return {t, advdiff::derive_seed(t, advdiff::StreamTag::sampling)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial diffusion training: generalization gap and stability sweeps"};
    app.require_subcommand(0, 1);
    Flags flags;
    app.add_option("--config", flags.config, "key = value config file");
    app.add_option("--topology", flags.topology, "comma list of complete|isolated|ring|starlike");
    app.add_option("--epsilon", flags.epsilon, "comma list of perturbation radii");
    app.add_option("--iters", flags.iters, "comma list of horizons T");
    app.add_option("--trials", flags.trials, "number of independent trials");
    app.add_option("--seed", flags.seed, "root seed");
    app.add_option("--mu", flags.mu, "step size");
    app.add_option("--stability", flags.stability, "on|off: estimate on-average model stability");
    app.add_option("--holdout", flags.holdout, "holdout size for population risk");
    app.add_option("--out", flags.out, "output directory");
    app.add_option("--threads", flags.threads, "worker threads (0 = hardware concurrency)");

    std::size_t trial = 0;
    std::string file;
    auto* dataset_cmd = app.add_subcommand("dataset", "export a trial's generated training data as CSV");
    dataset_cmd->add_option("--trial", trial, "trial index")->capture_default_str();
    dataset_cmd->add_option("--file", file, "output CSV path")->required();
    auto* trace_cmd = app.add_subcommand("trace", "dump iteration,agent,iterate_norm,sample for one run");
    trace_cmd->add_option("--trial", trial, "trial index")->capture_default_str();
    trace_cmd->add_option("--file", file, "output CSV path")->required();
    for (auto* sub : {dataset_cmd, trace_cmd}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = resolve(flags);
        if (trial >= cfg.trials && (dataset_cmd->parsed() || trace_cmd->parsed())) {
            throw advdiff::ConfigError("trials", "trial index " + std::to_string(trial) + " is out of range");
        }
        if (dataset_cmd->parsed()) {
            const auto seeds = trial_seeds(cfg, trial);
            const auto data = advdiff::generate_network_dataset(cfg.agents, cfg.samples_per_agent, cfg.dim,
                                                                cfg.flip_rate, seeds.data);
            advdiff::write_dataset_csv(data, file);
            return 0;
        }
        if (trace_cmd->parsed()) {
            const auto seeds = trial_seeds(cfg, trial);
            const auto data = advdiff::generate_network_dataset(cfg.agents, cfg.samples_per_agent, cfg.dim,
                                                                cfg.flip_rate, seeds.data);
            advdiff::TrainConfig tc;
            tc.iterations = *std::max_element(cfg.iterations.begin(), cfg.iterations.end());
            tc.schedule = cfg.step_schedule();
            tc.epsilon = cfg.epsilons.front();
            tc.seed = seeds.sampling;
            tc.record_trajectory = true;
            const auto run = advdiff::train(data, advdiff::build_topology(cfg.topologies.front(), cfg.agents), tc);
            advdiff::write_trajectory_csv(run, file);
            return 0;
        }

        const auto start = std::chrono::steady_clock::now();
        const auto result = advdiff::run_sweep(cfg);
        advdiff::emit_csv(result, cfg.out);
        const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cerr << "wrote " << result.rows.size() << " rows and " << result.summary.size() << " summary rows to "
                  << cfg.out.string() << " in " << secs << " s";
        if (result.diverged_runs > 0) std::cerr << " (" << result.diverged_runs << " diverged runs excluded)";
        std::cerr << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
