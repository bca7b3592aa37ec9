#include "advdiff/sweep.hpp"

#include "advdiff/dataset.hpp"
#include "advdiff/format.hpp"
#include "advdiff/metrics.hpp"
#include "advdiff/rng.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace advdiff {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
    std::vector<std::string> out;
    std::string_view rest(value);
    while (true) {
        const auto pos = rest.find(',');
        auto item = trim(rest.substr(0, pos));
        if (item.empty()) throw ConfigError(key, "empty list element in '" + value + "'");
        out.push_back(std::move(item));
        if (pos == std::string_view::npos) break;
        rest.remove_prefix(pos + 1);
    }
    return out;
}

double parse_real(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ConfigError(key, "expected a real number, got '" + s + "'");
    }
    return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ConfigError(key, "expected a nonnegative integer, got '" + s + "'");
    }
    return v;
}

bool parse_switch(const std::string& key, const std::string& s) {
    if (s == "on" || s == "true" || s == "1") return true;
    if (s == "off" || s == "false" || s == "0") return false;
    throw ConfigError(key, "expected on|off, got '" + s + "'");
}

template <class T>
void reject_duplicates(const std::string& key, const std::vector<T>& values) {
    std::set<T> seen(values.begin(), values.end());
    if (seen.size() != values.size()) throw ConfigError(key, "list contains duplicates");
}

using Setter = std::function<void(SweepConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"K", [](SweepConfig& c, const std::string& v) { c.agents = parse_unsigned("K", v); }},
        {"N", [](SweepConfig& c, const std::string& v) { c.samples_per_agent = parse_unsigned("N", v); }},
        {"d", [](SweepConfig& c, const std::string& v) { c.dim = parse_unsigned("d", v); }},
        {"flip_rate", [](SweepConfig& c, const std::string& v) { c.flip_rate = parse_real("flip_rate", v); }},
        {"schedule",
         [](SweepConfig& c, const std::string& v) {
             if (v == "constant") {
                 c.schedule = StepSchedule::Kind::constant;
             } else if (v == "decaying") {
                 c.schedule = StepSchedule::Kind::decaying;
             } else {
                 throw ConfigError("schedule", "expected constant|decaying, got '" + v + "'");
             }
         }},
        {"mu", [](SweepConfig& c, const std::string& v) { c.mu = parse_real("mu", v); }},
        {"decay_n0", [](SweepConfig& c, const std::string& v) { c.decay_n0 = parse_real("decay_n0", v); }},
        {"epsilon",
         [](SweepConfig& c, const std::string& v) {
             c.epsilons.clear();
             for (const auto& item : split_list("epsilon", v)) c.epsilons.push_back(parse_real("epsilon", item));
         }},
        {"iters",
         [](SweepConfig& c, const std::string& v) {
             c.iterations.clear();
             for (const auto& item : split_list("iters", v)) c.iterations.push_back(parse_unsigned("iters", item));
         }},
        {"topology",
         [](SweepConfig& c, const std::string& v) {
             c.topologies.clear();
             for (const auto& item : split_list("topology", v)) {
                 try {
                     c.topologies.push_back(parse_topology_kind(item));
                 } catch (const std::invalid_argument& e) {
                     throw ConfigError("topology", e.what());
                 }
             }
         }},
        {"trials", [](SweepConfig& c, const std::string& v) { c.trials = parse_unsigned("trials", v); }},
        {"seed", [](SweepConfig& c, const std::string& v) { c.seed = parse_unsigned("seed", v); }},
        {"holdout", [](SweepConfig& c, const std::string& v) { c.holdout = parse_unsigned("holdout", v); }},
        {"stability", [](SweepConfig& c, const std::string& v) { c.stability = parse_switch("stability", v); }},
        {"stability_pairs",
         [](SweepConfig& c, const std::string& v) { c.stability_pairs = parse_unsigned("stability_pairs", v); }},
        {"iterate_norm_cap",
         [](SweepConfig& c, const std::string& v) { c.iterate_norm_cap = parse_real("iterate_norm_cap", v); }},
        {"threads", [](SweepConfig& c, const std::string& v) { c.threads = parse_unsigned("threads", v); }},
        {"out", [](SweepConfig& c, const std::string& v) { c.out = v; }},
    };
    return table;
}

void apply(SweepConfig& cfg, const std::string& key, const std::string& value) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(key, "unknown key");
    if (value.empty()) throw ConfigError(key, "missing value");
    it->second(cfg, value);
}

}  // namespace

StepSchedule SweepConfig::step_schedule() const {
    return schedule == StepSchedule::Kind::constant ? StepSchedule::constant(mu)
                                                    : StepSchedule::decaying(mu, decay_n0);
}

void validate_config(const SweepConfig& cfg) {
    if (cfg.agents < 1) throw ConfigError("K", "must be >= 1");
    if (cfg.samples_per_agent < 1) throw ConfigError("N", "must be >= 1");
    if (cfg.dim < 1) throw ConfigError("d", "must be >= 1");
    if (!(cfg.flip_rate >= 0.0 && cfg.flip_rate <= 1.0)) throw ConfigError("flip_rate", "must lie in [0, 1]");
    if (!(cfg.mu > 0.0)) throw ConfigError("mu", "must be > 0");
    if (!(cfg.decay_n0 > 0.0)) throw ConfigError("decay_n0", "must be > 0");
    if (cfg.epsilons.empty()) throw ConfigError("epsilon", "list must be nonempty");
    for (double e : cfg.epsilons) {
        if (!(e >= 0.0)) throw ConfigError("epsilon", "radii must be >= 0");
    }
    reject_duplicates("epsilon", cfg.epsilons);
    if (cfg.iterations.empty()) throw ConfigError("iters", "list must be nonempty");
    reject_duplicates("iters", cfg.iterations);
    if (cfg.topologies.empty()) throw ConfigError("topology", "list must be nonempty");
    reject_duplicates("topology", cfg.topologies);
    for (auto kind : cfg.topologies) {
        try {
            (void)build_topology(kind, cfg.agents);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("topology", e.what());
        }
    }
    if (cfg.trials < 1) throw ConfigError("trials", "must be >= 1");
    if (cfg.holdout < 1) throw ConfigError("holdout", "must be >= 1");
    if (cfg.stability && cfg.stability_pairs < 1) throw ConfigError("stability_pairs", "must be >= 1");
    if (cfg.iterate_norm_cap && !(*cfg.iterate_norm_cap > 0.0)) {
        throw ConfigError("iterate_norm_cap", "must be > 0");
    }
    if (cfg.out.empty()) throw ConfigError("out", "must be a path");
}

SweepConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides) {
    SweepConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(body, "line " + std::to_string(line_no) + " is not of the form key = value");
        }
        const auto key = trim(std::string_view(body).substr(0, eq));
        const auto value = trim(std::string_view(body).substr(eq + 1));
        if (!seen.insert(key).second) throw ConfigError(key, "given more than once");
        apply(cfg, key, value);
    }
    for (const auto& [key, value] : overrides) apply(cfg, key, trim(value));
    validate_config(cfg);
    return cfg;
}

SweepConfig parse_config(const std::optional<std::filesystem::path>& path, const ConfigOverrides& overrides) {
    std::string text;
    if (path) {
        std::ifstream in(*path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read config file " + path->string());
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    return parse_config_text(text, overrides);
}

std::string to_config_text(const SweepConfig& cfg) {
    auto join = [](const auto& values, auto&& fmt) {
        std::string s;
        for (const auto& v : values) {
            if (!s.empty()) s += ',';
            s += fmt(v);
        }
        return s;
    };
    std::ostringstream out;
    out << "K = " << cfg.agents << '\n'
        << "N = " << cfg.samples_per_agent << '\n'
        << "d = " << cfg.dim << '\n'
        << "flip_rate = " << format_double(cfg.flip_rate) << '\n'
        << "schedule = " << (cfg.schedule == StepSchedule::Kind::constant ? "constant" : "decaying") << '\n'
        << "mu = " << format_double(cfg.mu) << '\n'
        << "decay_n0 = " << format_double(cfg.decay_n0) << '\n'
        << "epsilon = " << join(cfg.epsilons, format_double) << '\n'
        << "iters = " << join(cfg.iterations, [](std::size_t v) { return std::to_string(v); }) << '\n'
        << "topology = " << join(cfg.topologies, [](TopologyKind k) { return to_string(k); }) << '\n'
        << "trials = " << cfg.trials << '\n'
        << "seed = " << cfg.seed << '\n'
        << "holdout = " << cfg.holdout << '\n'
        << "stability = " << (cfg.stability ? "on" : "off") << '\n'
        << "stability_pairs = " << cfg.stability_pairs << '\n';
    if (cfg.iterate_norm_cap) out << "iterate_norm_cap = " << format_double(*cfg.iterate_norm_cap) << '\n';
    out << "threads = " << cfg.threads << '\n' << "out = " << cfg.out.string() << '\n';
    return out.str();
}

namespace {

struct TrialData {
    NetworkDataset data;
    NetworkDataset ghost;
    AgentDataset holdout;
    std::uint64_t train_seed = 0;
    std::uint64_t trial_seed = 0;
};

struct CellOutput {
    std::vector<SweepRow> rows;
    std::vector<CellConstants> constants;
    bool diverged = false;
};

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = next++; i < count; i = next++) body(i);
            } catch (...) {
                errors[t] = std::current_exception();
                next = count;
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

CellOutput run_cell(const SweepConfig& cfg, const TrialData& trial, std::size_t trial_index,
                    const CombinationMatrix& a, double slem, double epsilon, const std::vector<std::size_t>& horizons) {
    const std::size_t agents = cfg.agents;
    const std::size_t max_t = *std::max_element(horizons.begin(), horizons.end());
    const auto schedule = cfg.step_schedule();

    TrainConfig tc;
    tc.iterations = max_t;
    tc.schedule = schedule;
    tc.epsilon = epsilon;
    tc.seed = trial.train_seed;
    tc.checkpoints = horizons;

    CellOutput out;
    auto blank_rows = [&](std::size_t horizon) {
        for (std::size_t k = 0; k < agents; ++k) {
            SweepRow row;
            row.topology = a.name();
            row.epsilon = epsilon;
            row.iterations = horizon;
            row.trial = trial_index;
            row.agent = k;
            row.slem = slem;
            row.emp_risk = row.pop_risk = row.pop_se = row.gap = row.bound = row.max_iterate_norm = NAN;
            row.diverged = true;
            out.rows.push_back(row);
        }
    };

    TrainRun run;
    std::optional<StabilityProfile> stability;
    try {
        run = train(trial.data, a, tc);
        if (cfg.stability) {
            const auto pairs = select_replacement_pairs(agents, cfg.samples_per_agent, cfg.stability_pairs,
                                                        trial.trial_seed);
            stability = stability_profile(trial.data, trial.ghost, a, tc, pairs);
        }
    } catch (const DivergenceError&) {
        out.diverged = true;
        for (auto h : horizons) blank_rows(h);
        return out;
    }

    for (auto horizon : horizons) {
        const auto& cp = run.checkpoint(horizon);
        const auto risks = risk_report(cp.iterates, trial.data, trial.holdout, epsilon);
        const double cap = cfg.iterate_norm_cap.value_or(std::max(cp.max_iterate_norm, kDegenerateNorm));
        const auto constants = estimate_lipschitz_constants(trial.data, trial.holdout, cap, epsilon);
        const auto bound =
            stability_bound(constants, epsilon, schedule, horizon, agents, cfg.samples_per_agent, BoundMode::uncertified);
        out.constants.push_back(
            {a.name(), epsilon, horizon, trial_index, constants, bound.step_sum, bound.precondition_met});

        std::size_t stab_index = 0;
        if (stability) {
            stab_index = static_cast<std::size_t>(
                std::find(stability->iterations.begin(), stability->iterations.end(), horizon) -
                stability->iterations.begin());
        }
        for (std::size_t k = 0; k < agents; ++k) {
            SweepRow row;
            row.topology = a.name();
            row.epsilon = epsilon;
            row.iterations = horizon;
            row.trial = trial_index;
            row.agent = k;
            row.emp_risk = risks.agents[k].empirical;
            row.pop_risk = risks.agents[k].population;
            row.pop_se = risks.agents[k].population_se;
            row.gap = risks.agents[k].gap;
            row.bound = bound.value;
            if (stability) {
                row.eta_hat = stability->per_agent[stab_index][k].eta;
                row.eta_se = stability->per_agent[stab_index][k].std_error;
            }
            row.max_iterate_norm = cp.max_iterate_norm;
            row.slem = slem;
            out.rows.push_back(row);
        }
    }
    return out;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg) {
    validate_config(cfg);

    std::vector<CombinationMatrix> matrices;
    std::vector<double> slems;
    for (auto kind : cfg.topologies) {
        matrices.push_back(build_topology(kind, cfg.agents));
        slems.push_back(second_largest_eigenvalue_magnitude(matrices.back()));
    }

    std::vector<TrialData> trials(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
        const auto trial_seed = derive_seed(cfg.seed, StreamTag::trial, t);
        auto& td = trials[t];
        td.trial_seed = trial_seed;
        td.data = generate_network_dataset(cfg.agents, cfg.samples_per_agent, cfg.dim, cfg.flip_rate, trial_seed);
        td.holdout = generate_holdout(cfg.holdout, cfg.dim, cfg.flip_rate, derive_seed(trial_seed, StreamTag::holdout));
        if (cfg.stability) {
            td.ghost = generate_network_dataset(cfg.agents, cfg.samples_per_agent, cfg.dim, cfg.flip_rate,
                                                derive_seed(trial_seed, StreamTag::ghost));
        }
        td.train_seed = derive_seed(trial_seed, StreamTag::sampling);
    });

    // Cell index = ((topology * |eps|) + eps) * trials + trial.
    const std::size_t n_eps = cfg.epsilons.size();
    const std::size_t n_cells = cfg.topologies.size() * n_eps * cfg.trials;
    std::vector<CellOutput> cells(n_cells);
    parallel_for(n_cells, cfg.threads, [&](std::size_t c) {
        const std::size_t trial = c % cfg.trials;
        const std::size_t e = (c / cfg.trials) % n_eps;
        const std::size_t topo = c / (cfg.trials * n_eps);
        cells[c] = run_cell(cfg, trials[trial], trial, matrices[topo], slems[topo], cfg.epsilons[e], cfg.iterations);
    });

    // Order rows by (topology, eps, T, trial, agent) in config order.
    SweepResult result;
    const std::size_t n_t = cfg.iterations.size();
    for (std::size_t topo = 0; topo < cfg.topologies.size(); ++topo) {
        for (std::size_t e = 0; e < n_eps; ++e) {
            for (std::size_t h = 0; h < n_t; ++h) {
                for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
                    const auto& cell = cells[(topo * n_eps + e) * cfg.trials + trial];
                    const auto first = cell.rows.begin() + static_cast<std::ptrdiff_t>(h * cfg.agents);
                    result.rows.insert(result.rows.end(), first, first + static_cast<std::ptrdiff_t>(cfg.agents));
                    if (!cell.diverged) result.constants.push_back(cell.constants[h]);
                }
            }
        }
    }
    for (const auto& cell : cells) result.diverged_runs += cell.diverged ? 1 : 0;
    result.summary = summarize(result.rows);
    return result;
}

std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows) {
    struct Accumulator {
        SummaryRow head;
        std::vector<double> gaps;
        std::vector<double> bounds;
    };
    std::vector<Accumulator> groups;
    std::map<std::tuple<std::string, double, std::size_t>, std::size_t> index;
    for (const auto& row : rows) {
        const auto key = std::make_tuple(row.topology, row.epsilon, row.iterations);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, groups.size()).first;
            Accumulator acc;
            acc.head.topology = row.topology;
            acc.head.epsilon = row.epsilon;
            acc.head.iterations = row.iterations;
            groups.push_back(std::move(acc));
        }
        if (row.diverged) continue;
        groups[it->second].gaps.push_back(row.gap);
        groups[it->second].bounds.push_back(row.bound);
    }
    std::vector<SummaryRow> out;
    out.reserve(groups.size());
    for (auto& g : groups) {
        auto head = g.head;
        const auto gap = mean_stat(g.gaps);
        head.gap_mean = g.gaps.empty() ? NAN : gap.mean;
        head.gap_std = g.gaps.empty() ? NAN : gap.std_dev;
        head.bound_mean = g.bounds.empty() ? NAN : mean_stat(g.bounds).mean;
        head.rows_used = g.gaps.size();
        out.push_back(head);
    }
    return out;
}

void emit_csv(const SweepResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + (dir / name).string() + " for writing");
        return f;
    };
    auto optional_cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };

    {
        auto f = open("rows.csv");
        f << "topology,epsilon,T,trial,agent,emp_risk,pop_risk,pop_se,gap,bound,eta_hat,eta_se,max_iterate_norm,slem\n";
        for (const auto& r : result.rows) {
            f << r.topology << ',' << format_double(r.epsilon) << ',' << r.iterations << ',' << r.trial << ','
              << r.agent << ',' << format_double(r.emp_risk) << ',' << format_double(r.pop_risk) << ','
              << format_double(r.pop_se) << ',' << format_double(r.gap) << ',' << format_double(r.bound) << ','
              << optional_cell(r.eta_hat) << ',' << optional_cell(r.eta_se) << ','
              << format_double(r.max_iterate_norm) << ',' << format_double(r.slem) << '\n';
        }
        if (!f) throw std::runtime_error("write failed: rows.csv");
    }
    {
        auto f = open("summary.csv");
        f << "topology,epsilon,T,gap_mean,gap_std,bound_mean\n";
        for (const auto& s : result.summary) {
            f << s.topology << ',' << format_double(s.epsilon) << ',' << s.iterations << ','
              << format_double(s.gap_mean) << ',' << format_double(s.gap_std) << ',' << format_double(s.bound_mean)
              << '\n';
        }
        if (!f) throw std::runtime_error("write failed: summary.csv");
    }
    {
        auto f = open("constants.csv");
        f << "topology,epsilon,T,trial,L_w,L_ww,L_wx,step_sum,step_certified\n";
        for (const auto& c : result.constants) {
            f << c.topology << ',' << format_double(c.epsilon) << ',' << c.iterations << ',' << c.trial << ','
              << format_double(c.constants.L_w) << ',' << format_double(c.constants.L_ww) << ','
              << format_double(c.constants.L_wx) << ',' << format_double(c.step_sum) << ','
              << (c.precondition_met ? 1 : 0) << '\n';
        }
        if (!f) throw std::runtime_error("write failed: constants.csv");
    }
}

}  // namespace advdiff
