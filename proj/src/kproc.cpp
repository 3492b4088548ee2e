#include "ktree/kproc.hpp"

#include <algorithm>
#include <cmath>

#include "ktree/rng.hpp"

namespace ktree {

namespace {

std::vector<std::uint64_t> env_cutoffs(const Environment& env) {
    std::vector<std::uint64_t> c(env.levels());
    for (std::size_t j = 1; j <= env.levels(); ++j) c[j - 1] = env.form(j).cutoff;
    return c;
}

} // namespace

KRun simulate_k(const TruncatedKConfig& config, std::uint64_t seed) {
    if (config.env.kind() != Environment::Kind::closed_form)
        throw SpecError("simulate_k: a closed-form environment is required");
    auto cutoffs = env_cutoffs(config.env);
    double bound = config.env.tail_mass(cutoffs); // throws DivergenceError when infinite
    MarkHierarchy h(config.env, seed, {.extra_marks = false});
    return KRun{h.trajectory(config.horizon), bound};
}

double expected_theta(const Environment& env, double r) {
    if (r < 0.0) throw SpecError("expected_theta: r must be nonnegative");
    if (env.kind() == Environment::Kind::closed_form) {
        // Force the summability check even for truncated sums.
        env.sum_gamma_bar_full();
    }
    return r * env.sum_gamma_bar_truncated();
}

std::pair<double, double> mc_theta(const TruncatedKConfig& config, double r,
                                   std::size_t replicas, std::uint64_t seed) {
    if (replicas < 2) throw SpecError("mc_theta: at least 2 replicas required");
    if (r < 0.0) throw SpecError("mc_theta: r must be nonnegative");
    if (config.env.kind() == Environment::Kind::closed_form)
        config.env.tail_mass(env_cutoffs(config.env)); // divergence check
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < replicas; ++i) {
        MarkHierarchy h(config.env, derive_seed(seed, {i}), {.extra_marks = false});
        double v = h.theta(r);
        sum += v;
        sumsq += v * v;
    }
    double n = static_cast<double>(replicas);
    double mean = sum / n;
    double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

std::vector<HypercubeLevel> hypercube_scan(const Trajectory& traj, double horizon, Coord m) {
    std::size_t k = traj.dims();
    std::vector<HypercubeLevel> report;
    if (k < 2) return report;
    report.resize(k - 1);
    for (std::size_t i = 1; i <= k - 1; ++i) report[i - 1] = {i, 1};
    for (std::size_t row = 0; row < traj.size(); ++row) {
        if (traj.time(row) > horizon) break;
        auto x = traj.state(row);
        for (std::size_t i = 1; i <= k - 1; ++i) {
            bool low_above = false;
            for (std::size_t j = i + 1; j <= k; ++j)
                if (x[j - 1] <= m) { low_above = true; break; }
            // A state violating "X_i > m_tilde implies all higher > m" forces
            // m_tilde up to its i-th coordinate.
            if (low_above && x[i - 1] > report[i - 1].m_tilde)
                report[i - 1].m_tilde = x[i - 1];
        }
    }
    return report;
}

std::vector<std::uint64_t> choose_cutoffs(const std::vector<Environment::Form>& forms, double eps,
                                          std::uint64_t max_cutoff) {
    if (!(eps > 0.0)) throw SpecError("choose_cutoffs: eps must be positive");
    std::size_t k = forms.size();
    std::vector<std::uint64_t> cut(k, 1);
    auto tail = [&](const std::vector<std::uint64_t>& c) {
        auto f = forms;
        for (std::size_t j = 0; j < k; ++j) f[j].cutoff = c[j];
        return Environment::make_closed(f).tail_mass(c);
    };
    double current = tail(cut);
    while (current > eps) {
        std::size_t best = k;
        double best_tail = current;
        for (std::size_t j = 0; j < k; ++j) {
            if (cut[j] >= max_cutoff) continue;
            auto trial = cut;
            ++trial[j];
            double t = tail(trial);
            if (t < best_tail) {
                best_tail = t;
                best = j;
            }
        }
        if (best == k)
            throw DivergenceError("choose_cutoffs: target not reachable under the cutoff cap");
        ++cut[best];
        current = best_tail;
    }
    return cut;
}

} // namespace ktree
