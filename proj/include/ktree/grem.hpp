#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ktree/env.hpp"
#include "ktree/rng.hpp"

namespace ktree {

// Heavy-tailed trap-depth law for one level. The default family is standard
// Pareto, G(t) = t^-alpha for t >= 1, which lies exactly in the alpha-stable
// domain of attraction and keeps every scaling constant closed-form. A custom
// family supplies the tail function G and, optionally, its inverse; without
// one, inversion is bracketed bisection to 1e-12.
struct TailSpec {
    double alpha = 0.5; // in (0,1)
    std::function<double(double)> tail;     // G(t) = P(tau > t); empty = Pareto
    std::function<double(double)> tail_inv; // optional generalized inverse

    bool is_pareto() const { return !tail; }

    // Generalized inverse G^{-1}(u) = inf{ t : G(t) <= u }.
    double ginv(double u) const;

    // G^{-1}(1/m), evaluated without forming 1/m for the Pareto family so the
    // closed forms m^{1/alpha} stay exact where they are exact.
    double ginv_at_reciprocal(double m) const;

    // tau = G^{-1}(u); fast paths for the exponents the Pareto family hits.
    double tau_from_uniform(double u) const;
};

TailSpec pareto_tail(double alpha);

// i.i.d. draws via inverse-CDF.
std::vector<double> sample_tau(const TailSpec& spec, std::size_t count, RandomSource& rng);

// Decreasing order statistics; ties keep the original order.
std::vector<double> order_relabel(std::vector<double> values);

// c = (G^{-1}(1/M))^{-1}; Pareto closed form M^{-1/alpha}.
double scaling_constant(const TailSpec& spec, std::uint64_t volume);

// Fine tuning: M_1 = n, M_{j+1} = floor(1/c_j^{(n)}). Checked; volumes grow
// super-polynomially and overflow is a hard error.
std::vector<std::uint64_t> fine_tune_volumes(std::uint64_t n, std::span<const TailSpec> specs);

// Fully materialized GREM-like environment under fine tuning:
//   gamma_j^(n)(x|_j) = c_j^(n) tau_j^(n)(x|_j)  (tau relabeled decreasing per parent),
//   coin parameters p_j^(n) = 1/(1 + tau_j^(n))  (supplied directly),
// so running the trap model with gamma^(n) is the extreme-time-scale process
// X_k^(n)(t) = X~_k^(n)(t / c_k^(n)).
struct GremEnv {
    Environment env;                      // gamma^(n), explicit p^(n) on interior levels
    std::vector<double> c;                // c_1^(n)..c_k^(n)
    double speed_factor = 1.0;            // c_k^(n)
    std::vector<std::vector<double>> tau; // relabeled tau_j^(n), flattened per level
};

GremEnv build_grem_env(std::uint64_t n, std::span<const TailSpec> specs, std::uint64_t seed,
                       std::uint64_t memory_cap = 20'000'000);

// Virtual-leaf mode for fine-tuned volumes that cannot be materialized: per
// parent, only the top_count deepest traps are stored, together with the
// exact per-parent count and aggregate tau mass of the rest. Levels whose
// total vertex count fits under stream_threshold draw every tau and the
// aggregates are exact sums; above it the top order statistics are still
// sampled exactly (uniform order-statistics recursion) and the bulk below
// them is sampled as one draw matched to its exact conditional mean and
// variance given the smallest materialized order statistic.
struct VirtualGremLevel {
    std::uint64_t volume = 0;       // M_j
    std::uint64_t parents = 1;      // number of level j-1 addresses
    std::size_t top_count = 0;      // materialized order statistics per parent
    double c = 1.0;                 // c_j^(n)
    bool exact_aggregates = true;
    std::vector<double> top_tau;    // parents * top_count, decreasing per parent
    std::vector<double> rest_tau;   // per parent: aggregate tau mass below the top block

    double top(std::uint64_t parent, std::size_t rank) const {
        return top_tau[parent * top_count + rank];
    }
    // Sum of gamma_j^(n) = c * tau over all level-j addresses.
    double level_gamma_sum() const;
};

struct VirtualGremEnv {
    std::uint64_t n = 0;
    std::vector<std::uint64_t> volumes;
    std::vector<VirtualGremLevel> levels;
};

VirtualGremEnv build_grem_env_virtual(std::uint64_t n, std::span<const TailSpec> specs,
                                      std::uint64_t seed, std::size_t top_count = 64,
                                      std::uint64_t stream_threshold = 30'000'000,
                                      std::uint64_t parent_cap = 2'000'000);

// Coupled construction on a shared exponential field E_j(x|_j):
//   S_j(x|_j)     = sum_{i<=x_j} E_j(x|_{j-1}, i),
//   hat gamma_j^(n)(x|_j) = c_j^(n) G_j^{-1}( S_j(x|_j) / S_j(x|_{j-1}, M_j+1) ),
//   hat gamma_j(x|_j)     = S_j(x|_j)^{-1/alpha_j},
// both environments from the same field. Materialized per level for labels
// x_j <= top_labels under the given draw budget.
struct CoupledEnvPair {
    std::vector<std::uint64_t> volumes;            // fine-tuned M_j
    std::size_t top_labels = 0;
    // per level: parents * top_labels entries, label-major within a parent
    std::vector<std::vector<double>> finite_env;   // hat gamma^(n)
    std::vector<std::vector<double>> limit_env;    // hat gamma
    std::vector<std::vector<double>> s_norm;       // per parent: S_j(x|_{j-1}, M_j+1)
    std::vector<std::uint64_t> parents;            // per level
};

CoupledEnvPair coupled_envs(std::uint64_t n, std::span<const TailSpec> specs, std::uint64_t seed,
                            std::size_t top_labels = 10, std::size_t max_levels = SIZE_MAX,
                            std::uint64_t draw_budget = 200'000'000);

} // namespace ktree
