// ktree: batch front end for the tree trap-model / K-process toolkit.
//
// Subcommands: simulate-coin, simulate-mark, simulate-k, grem-experiment,
// check-conditions, compare, distance, expected-theta.
//
// Exit codes: 0 success, 1 runtime or statistical-gate failure, 2 config
// error. A master seed fans out to per-replica streams; outputs are merged
// by replica index, so results are byte-identical across worker-pool sizes.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ktree/coin_sim.hpp"
#include "ktree/conditions.hpp"
#include "ktree/config.hpp"
#include "ktree/env_io.hpp"
#include "ktree/grem.hpp"
#include "ktree/kproc.hpp"
#include "ktree/mark_sim.hpp"
#include "ktree/skorohod.hpp"
#include "ktree/stats.hpp"
#include "ktree/trajectory.hpp"

namespace {

using namespace ktree;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct ReplicaResult {
    std::uint64_t seed = 0;
    std::uint64_t jumps = 0;
    double theta = 0.0;
    double error_bound = 0.0;
    std::string csv;
    std::string extra_stats; // preformatted JSON object body, may be empty
};

std::string summary_row(std::size_t replica, const ReplicaResult& r) {
    std::ostringstream os;
    os << "{\"replica\":" << replica << ",\"seed\":" << r.seed << ",\"jumps\":" << r.jumps
       << ",\"theta\":" << fmt17(r.theta) << ",\"error_bound\":" << fmt17(r.error_bound)
       << ",\"test_stats\":{" << r.extra_stats << "}}\n";
    return os.str();
}

template <class Fn>
void run_replicas(std::uint64_t replicas, unsigned threads, Fn&& fn) {
    if (threads <= 1) {
        for (std::uint64_t i = 0; i < replicas; ++i) fn(i);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
        for (std::uint64_t i; (i = next.fetch_add(1)) < replicas;) fn(i);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads && t < replicas; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

void write_outputs(const ExperimentConfig& cfg, const std::vector<ReplicaResult>& results) {
    std::ostringstream summary;
    for (std::size_t i = 0; i < results.size(); ++i) summary << summary_row(i, results[i]);
    if (cfg.out_prefix.empty()) {
        if (results.size() == 1 && !results[0].csv.empty()) std::cout << results[0].csv;
        std::cout << summary.str();
        return;
    }
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].csv.empty()) continue;
        std::ofstream out(cfg.out_prefix + ".r" + std::to_string(i) + ".csv");
        if (!out) throw SpecError("cannot write trajectory csv under prefix " + cfg.out_prefix);
        out << results[i].csv;
    }
    std::ofstream out(cfg.out_prefix + ".summary.ndjson");
    if (!out) throw SpecError("cannot write summary under prefix " + cfg.out_prefix);
    out << summary.str();
}

ExperimentConfig load_and_override(const CLI::App* sub, const std::string& config_path,
                                   std::uint64_t seed, std::uint64_t replicas, double horizon,
                                   std::uint64_t jumps, unsigned threads,
                                   const std::string& out_prefix) {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--replicas")) cfg.replicas = replicas;
    if (sub->count("--horizon")) cfg.horizon = horizon;
    if (sub->count("--jumps")) cfg.jumps = jumps;
    if (sub->count("--threads")) cfg.threads = threads;
    if (sub->count("--out")) cfg.out_prefix = out_prefix;
    if (cfg.replicas < 1) throw SpecError("replicas must be >= 1");
    if (cfg.jumps == 0 && !(cfg.horizon > 0.0)) throw SpecError("horizon must be positive");
    return cfg;
}

int cmd_simulate(const ExperimentConfig& cfg) {
    Environment env = make_environment(cfg);
    std::size_t k = env.levels();
    double error_bound = 0.0;
    if (cfg.model == ExperimentConfig::Model::kprocess) {
        std::vector<std::uint64_t> cutoffs = env.working_volumes();
        error_bound = env.tail_mass(cutoffs);
    }

    std::vector<ReplicaResult> results(cfg.replicas);
    std::atomic<bool> failed{false};
    std::string error_text;
    std::mutex error_mutex;
    run_replicas(cfg.replicas, cfg.threads, [&](std::uint64_t i) {
        if (failed.load()) return;
        try {
            std::uint64_t seed = derive_seed(cfg.seed, {i});
            Trajectory traj;
            double theta = 0.0;
            switch (cfg.model) {
                case ExperimentConfig::Model::coin: {
                    VertexAddress start{cfg.start.empty() ? std::vector<Coord>(k, 1) : cfg.start};
                    Rng rng(seed);
                    traj = cfg.jumps ? simulate_coin_jumps(env, start, cfg.jumps, rng)
                                     : simulate_coin(env, start, cfg.horizon, rng);
                    theta = traj.horizon();
                    break;
                }
                case ExperimentConfig::Model::mark:
                case ExperimentConfig::Model::grem: {
                    MarkHierarchy h(env, seed);
                    traj = cfg.jumps ? h.trajectory_jumps(cfg.jumps) : h.trajectory(cfg.horizon);
                    theta = h.clock(k).total();
                    break;
                }
                case ExperimentConfig::Model::kprocess: {
                    MarkHierarchy h(env, seed, {.extra_marks = false});
                    traj = cfg.jumps ? h.trajectory_jumps(cfg.jumps) : h.trajectory(cfg.horizon);
                    theta = h.clock(k).total();
                    break;
                }
            }
            results[i] = {seed, traj.jump_count(), theta, error_bound, to_csv(traj), ""};
        } catch (const std::exception& e) {
            std::scoped_lock lock(error_mutex);
            failed = true;
            error_text = e.what();
        }
    });
    if (failed) throw DivergenceError(error_text);
    write_outputs(cfg, results);
    return 0;
}

Environment seeded_uniform_env(std::span<const std::uint64_t> volumes, std::uint64_t seed) {
    // gamma values i.i.d. uniform on (0.5, 2), one stream per level.
    TreeSpec tree = make_tree(volumes);
    std::vector<std::vector<double>> gamma(volumes.size());
    std::uint64_t count = 1;
    for (std::size_t j = 0; j < volumes.size(); ++j) {
        count *= volumes[j];
        Rng rng(derive_seed(seed, {0xecafULL, j + 1}));
        gamma[j].resize(count);
        for (double& g : gamma[j]) g = 0.5 + 1.5 * rng.uniform01();
    }
    return Environment::make_dense(std::move(tree), std::move(gamma));
}

Matrix transition_counts(const Trajectory& traj, std::uint64_t leaves, const TreeSpec& tree) {
    Matrix counts(leaves, std::vector<double>(leaves, 0.0));
    std::uint64_t prev = 0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        auto st = traj.state(i);
        std::uint64_t flat = flat_index(tree, VertexAddress{{st.begin(), st.end()}});
        if (i > 0) counts[prev][flat] += 1.0;
        prev = flat;
    }
    return counts;
}

int cmd_compare(const std::vector<std::uint64_t>& volumes, std::uint64_t seed, std::uint64_t jumps,
                double gate, const std::string& config_path, const std::string& out_path) {
    Environment env =
        config_path.empty() ? seeded_uniform_env(volumes, seed) : make_environment(load_config(config_path));
    const TreeSpec& tree = env.tree();
    std::uint64_t leaves = tree.leaf_count();
    if (leaves > 4096) throw SpecError("compare: leaf count too large for transition counting");

    VertexAddress start{std::vector<Coord>(tree.levels(), 1)};
    Rng coin_rng(derive_seed(seed, {1}));
    Trajectory coin = simulate_coin_jumps(env, start, jumps, coin_rng);
    Trajectory mark = simulate_mark_jumps(env, jumps, derive_seed(seed, {2}));

    auto chi = chi_square_transitions(transition_counts(coin, leaves, tree),
                                      transition_counts(mark, leaves, tree));

    // Per-leaf holding times of both simulators against exp(gamma_k(x)).
    double min_ks_p = 1.0;
    for (const Trajectory* traj : {&coin, &mark}) {
        std::vector<std::vector<double>> holds(leaves);
        for (std::size_t i = 0; i + 1 < traj->size(); ++i) {
            auto st = traj->state(i);
            std::uint64_t flat = flat_index(tree, VertexAddress{{st.begin(), st.end()}});
            holds[flat].push_back(traj->time(i + 1) - traj->time(i));
        }
        for (std::uint64_t leaf = 0; leaf < leaves; ++leaf) {
            if (holds[leaf].size() < 8) continue;
            std::uint64_t parent = leaf / tree.volumes.back();
            Coord label = static_cast<Coord>(leaf % tree.volumes.back() + 1);
            double mean = env.gamma(tree.levels(), parent, label);
            auto ks = ks_test(holds[leaf], [mean](double t) { return -std::expm1(-t / mean); });
            min_ks_p = std::min(min_ks_p, ks.p_value);
        }
    }

    std::ostringstream os;
    os << "{\"jumps\":" << jumps << ",\"chi2\":" << fmt17(chi.statistic)
       << ",\"chi2_p\":" << fmt17(chi.p_value) << ",\"min_holding_ks_p\":" << fmt17(min_ks_p)
       << ",\"gate\":" << fmt17(gate) << "}\n";
    if (out_path.empty()) {
        std::cout << os.str();
    } else {
        std::ofstream out(out_path);
        if (!out) throw SpecError("cannot write " + out_path);
        out << os.str();
    }
    bool pass = chi.p_value > gate && min_ks_p > gate;
    if (!pass) std::cerr << "compare: statistical gate failed\n";
    return pass ? 0 : 1;
}

int cmd_grem(std::uint64_t n, const std::vector<double>& alphas, std::uint64_t seed,
             const std::string& mode, std::size_t top, double horizon, std::uint64_t replicas,
             unsigned threads, const std::string& out_prefix) {
    std::vector<TailSpec> specs;
    for (double a : alphas) specs.push_back(pareto_tail(a));
    if (mode == "virtual") {
        VirtualGremEnv v = build_grem_env_virtual(n, specs, seed, top);
        std::ostringstream os;
        for (std::size_t j = 0; j < v.levels.size(); ++j) {
            const auto& lv = v.levels[j];
            os << "{\"n\":" << n << ",\"level\":" << (j + 1) << ",\"volume\":" << lv.volume
               << ",\"c\":" << fmt17(lv.c) << ",\"gamma_sum\":" << fmt17(lv.level_gamma_sum())
               << ",\"max_gamma\":" << fmt17(lv.c * lv.top_tau[0])
               << ",\"exact_aggregates\":" << (lv.exact_aggregates ? "true" : "false") << "}\n";
        }
        if (out_prefix.empty()) {
            std::cout << os.str();
        } else {
            std::ofstream out(out_prefix + ".summary.ndjson");
            if (!out) throw SpecError("cannot write under prefix " + out_prefix);
            out << os.str();
        }
        return 0;
    }
    if (mode != "dense") throw SpecError("grem-experiment: mode must be dense or virtual");

    GremEnv g = build_grem_env(n, specs, seed);
    if (!out_prefix.empty()) {
        std::ofstream env_out(out_prefix + ".env.csv");
        if (!env_out) throw SpecError("cannot write under prefix " + out_prefix);
        write_env_csv(g.env, env_out);
    }
    ExperimentConfig cfg;
    cfg.model = ExperimentConfig::Model::grem;
    cfg.horizon = horizon;
    cfg.replicas = replicas;
    cfg.seed = seed;
    cfg.threads = threads;
    cfg.out_prefix = out_prefix;

    std::vector<ReplicaResult> results(cfg.replicas);
    run_replicas(cfg.replicas, cfg.threads, [&](std::uint64_t i) {
        std::uint64_t rseed = derive_seed(seed, {i});
        MarkHierarchy h(g.env, rseed);
        Trajectory traj = h.trajectory(horizon);
        ReplicaResult r{rseed, traj.jump_count(), h.clock(g.env.levels()).total(), 0.0,
                        to_csv(traj), ""};
        r.extra_stats = "\"speed_factor\":" + fmt17(g.speed_factor);
        results[i] = std::move(r);
    });
    write_outputs(cfg, results);
    return 0;
}

int cmd_conditions(const std::string& config_path, const std::string& limit_path, std::uint64_t n) {
    ExperimentConfig cfg = load_config(config_path);
    Environment env = make_environment(cfg);
    if (env.kind() != Environment::Kind::dense)
        throw SpecError("check-conditions: a dense environment is required");
    ConditionReport report;
    if (!limit_path.empty()) {
        Environment limit = make_environment(load_config(limit_path));
        report = condition_values(env, &limit);
    } else {
        report = condition_values(env);
    }
    std::cout << to_ndjson(report, n);
    return 0;
}

int cmd_distance(const std::string& f_path, const std::string& g_path, double horizon,
                 const std::vector<std::uint64_t>& grid) {
    auto load = [horizon](const std::string& p) {
        std::ifstream in(p);
        if (!in) throw SpecError("cannot read trajectory " + p);
        return read_csv(in, horizon);
    };
    Trajectory f = load(f_path);
    Trajectory g = load(g_path);
    if (horizon <= 0.0) {
        double h = std::max(f.time(f.size() - 1), g.time(g.size() - 1));
        f.set_horizon(h);
        g.set_horizon(h);
    }
    std::vector<Coord> ranks(grid.begin(), grid.end());
    SkorohodBound b = best_skorohod_bound(f, g, ranks);
    std::cout << "{\"bound\":" << fmt17(b.value) << ",\"badness\":" << fmt17(b.badness)
              << ",\"time_integral\":" << fmt17(b.time_integral)
              << ",\"tail_cap\":" << fmt17(b.tail_cap) << "}\n";
    return 0;
}

int cmd_expected_theta(const std::string& config_path, double r) {
    ExperimentConfig cfg = load_config(config_path);
    Environment env = make_environment(cfg);
    double v = expected_theta(env, r <= 0.0 ? cfg.theta_r : r);
    std::cout << fmt17(v) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"trap models on finite trees and their K-process scaling limits"};
    app.require_subcommand(1);

    std::string config_path, limit_path, out_prefix, f_path, g_path, mode = "dense";
    std::uint64_t seed = 1, replicas = 0, jumps = 0, n = 100;
    double horizon = 0.0, gate = 0.001, r = 0.0;
    unsigned threads = 0;
    std::size_t top = 64;
    std::vector<std::uint64_t> volumes, grid;
    std::vector<double> alphas;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config file");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--replicas", replicas, "replica count");
        sub->add_option("--horizon", horizon, "time horizon");
        sub->add_option("--jumps", jumps, "stop after this many jumps instead of a horizon");
        sub->add_option("--threads", threads, "worker pool size");
        sub->add_option("--out", out_prefix, "output path prefix");
    };

    auto* sc = app.add_subcommand("simulate-coin", "coin-tossing trap model");
    add_common(sc);
    auto* sm = app.add_subcommand("simulate-mark", "Poisson-mark trap model");
    add_common(sm);
    auto* sk = app.add_subcommand("simulate-k", "truncated K-process");
    add_common(sk);

    auto* ge = app.add_subcommand("grem-experiment", "fine-tuned GREM-like environment and run");
    ge->add_option("--n", n, "fine-tuning parameter (M_1 = n)");
    ge->add_option("--alphas", alphas, "per-level tail indices")->delimiter(',');
    ge->add_option("--seed", seed, "master seed");
    ge->add_option("--mode", mode, "dense | virtual");
    ge->add_option("--top", top, "materialized order statistics per parent (virtual mode)");
    ge->add_option("--horizon", horizon, "simulation horizon (dense mode)");
    ge->add_option("--replicas", replicas, "replica count (dense mode)");
    ge->add_option("--threads", threads, "worker pool size");
    ge->add_option("--out", out_prefix, "output path prefix");

    auto* cc = app.add_subcommand("check-conditions", "convergence-condition values");
    cc->add_option("--config", config_path, "dense environment config")->required();
    cc->add_option("--limit-config", limit_path, "closed-form limit environment config");
    cc->add_option("--n", n, "tag for the NDJSON rows");

    std::uint64_t depth = 0;
    auto* cp = app.add_subcommand("compare", "coin vs mark jump-chain equivalence");
    cp->add_option("--volumes", volumes, "tree volumes")->delimiter(',');
    cp->add_option("--k", depth, "tree depth (must match the volume count)");
    cp->add_option("--seed", seed, "master seed");
    cp->add_option("--jumps", jumps, "jumps per simulator")->required();
    cp->add_option("--gate", gate, "p-value gate");
    cp->add_option("--config", config_path, "environment config (default: seeded uniforms)");
    cp->add_option("--out", out_prefix, "stats output file");

    auto* di = app.add_subcommand("distance", "Skorohod upper bound between trajectory CSVs");
    di->add_option("--f", f_path, "first trajectory csv")->required();
    di->add_option("--g", g_path, "second trajectory csv")->required();
    di->add_option("--horizon", horizon, "common horizon (default: last event time)");
    di->add_option("--grid", grid, "rank thresholds for matched distortions")->delimiter(',');

    auto* et = app.add_subcommand("expected-theta", "closed-form E[Theta_k(r)]");
    et->add_option("--config", config_path, "environment config")->required();
    et->add_option("--r", r, "internal time argument");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (sc->parsed() || sm->parsed() || sk->parsed()) {
            const CLI::App* sub = sc->parsed() ? sc : sm->parsed() ? sm : sk;
            ExperimentConfig cfg = load_and_override(sub, config_path, seed, replicas, horizon,
                                                     jumps, threads, out_prefix);
            cfg.model = sc->parsed() ? ExperimentConfig::Model::coin
                        : sm->parsed() ? ExperimentConfig::Model::mark
                                       : ExperimentConfig::Model::kprocess;
            return cmd_simulate(cfg);
        }
        if (ge->parsed()) {
            if (alphas.empty()) throw SpecError("grem-experiment: --alphas is required");
            return cmd_grem(n, alphas, seed, mode, top, horizon, replicas ? replicas : 1,
                            threads ? threads : 1, out_prefix);
        }
        if (cc->parsed()) return cmd_conditions(config_path, limit_path, n);
        if (cp->parsed()) {
            if (volumes.empty() && config_path.empty())
                throw SpecError("compare: --volumes or --config required");
            if (depth != 0 && depth != volumes.size())
                throw SpecError("compare: --k does not match the volume count");
            return cmd_compare(volumes, seed, jumps, gate, config_path, out_prefix);
        }
        if (di->parsed()) return cmd_distance(f_path, g_path, horizon, grid);
        if (et->parsed()) return cmd_expected_theta(config_path, r);
        return 2;
    } catch (const SpecError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
