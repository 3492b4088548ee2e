#include "ktree/grem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ktree {

namespace {

void check_specs(std::span<const TailSpec> specs, bool enforce_order) {
    if (specs.empty()) throw SpecError("at least one tail spec required");
    for (const TailSpec& s : specs)
        if (!(s.alpha > 0.0 && s.alpha < 1.0))
            throw SpecError("tail index alpha must lie in (0,1)");
    if (enforce_order)
        for (std::size_t j = 1; j < specs.size(); ++j)
            if (!(specs[j - 1].alpha < specs[j].alpha))
                throw SpecError("tail indices must be strictly increasing across levels");
}

// Box-Muller, fixed draw order (two uniforms per normal).
double standard_normal(Rng& rng) {
    double u1 = rng.uniform01();
    double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

} // namespace

double TailSpec::ginv(double u) const {
    if (!(u > 0.0 && u <= 1.0)) throw SpecError("ginv: u must lie in (0,1]");
    if (is_pareto()) return std::pow(u, -1.0 / alpha);
    if (tail_inv) return tail_inv(u);
    // Bracketed bisection on the decreasing tail: inf{ t : G(t) <= u }.
    double lo = 0.0, hi = 1.0;
    while (tail(hi) > u) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw DivergenceError("ginv: tail never drops to u");
    }
    for (int i = 0; i < 200 && (hi - lo) > 1e-12 * std::max(1.0, hi); ++i) {
        double mid = 0.5 * (lo + hi);
        if (tail(mid) <= u)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

double TailSpec::ginv_at_reciprocal(double m) const {
    if (!(m >= 1.0)) throw SpecError("ginv_at_reciprocal: m must be >= 1");
    if (is_pareto()) return std::pow(m, 1.0 / alpha);
    return ginv(1.0 / m);
}

double TailSpec::tau_from_uniform(double u) const {
    if (is_pareto()) {
        double e = 1.0 / alpha;
        if (std::abs(e - 2.0) < 1e-9) return 1.0 / (u * u);
        if (std::abs(e - 1.5) < 1e-9) return 1.0 / (u * std::sqrt(u));
        return std::pow(u, -e);
    }
    return ginv(u);
}

TailSpec pareto_tail(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw SpecError("pareto_tail: alpha must lie in (0,1)");
    return TailSpec{alpha, nullptr, nullptr};
}

std::vector<double> sample_tau(const TailSpec& spec, std::size_t count, RandomSource& rng) {
    if (count < 1) throw SpecError("sample_tau: count must be >= 1");
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) throw SpecError("sample_tau: invalid spec");
    std::vector<double> out(count);
    for (double& v : out) v = spec.tau_from_uniform(rng.uniform01());
    return out;
}

std::vector<double> order_relabel(std::vector<double> values) {
    if (values.empty()) throw SpecError("order_relabel: empty input");
    std::stable_sort(values.begin(), values.end(), std::greater<>());
    return values;
}

double scaling_constant(const TailSpec& spec, std::uint64_t volume) {
    if (volume < 1) throw SpecError("scaling_constant: volume must be >= 1");
    return 1.0 / spec.ginv_at_reciprocal(static_cast<double>(volume));
}

std::vector<std::uint64_t> fine_tune_volumes(std::uint64_t n, std::span<const TailSpec> specs) {
    if (n < 1) throw SpecError("fine_tune_volumes: n must be >= 1");
    check_specs(specs, false);
    std::vector<std::uint64_t> m(specs.size());
    m[0] = n;
    for (std::size_t j = 0; j + 1 < specs.size(); ++j) {
        double inv_c = specs[j].ginv_at_reciprocal(static_cast<double>(m[j]));
        if (!(inv_c < 9.0e18)) throw OverflowError("fine_tune_volumes: volume overflows 64 bits");
        m[j + 1] = static_cast<std::uint64_t>(std::floor(inv_c));
        if (m[j + 1] < 1) m[j + 1] = 1;
    }
    return m;
}

GremEnv build_grem_env(std::uint64_t n, std::span<const TailSpec> specs, std::uint64_t seed,
                       std::uint64_t memory_cap) {
    check_specs(specs, true);
    std::size_t k = specs.size();
    auto volumes = fine_tune_volumes(n, specs);

    std::uint64_t cells = 0, count = 1;
    for (std::size_t j = 0; j < k; ++j) {
        if (count > memory_cap / volumes[j])
            throw MemoryCapError("build_grem_env: fine-tuned volumes exceed the memory cap; "
                                 "use the virtual-leaf builder");
        count *= volumes[j];
        cells += count;
        if (cells > memory_cap)
            throw MemoryCapError("build_grem_env: fine-tuned volumes exceed the memory cap; "
                                 "use the virtual-leaf builder");
    }

    GremEnv out;
    out.c.resize(k);
    out.tau.resize(k);
    std::vector<std::vector<double>> gamma(k);
    std::vector<std::vector<double>> p(k);

    std::uint64_t parents = 1;
    for (std::size_t j = 0; j < k; ++j) {
        std::uint64_t m = volumes[j];
        out.c[j] = scaling_constant(specs[j], m);
        out.tau[j].resize(parents * m);
        gamma[j].resize(parents * m);
        if (j + 1 < k) p[j].resize(parents * m);
        for (std::uint64_t par = 0; par < parents; ++par) {
            // One stream per (level, parent): deterministic under the master
            // seed and parallelizable per subtree.
            Rng rng(derive_seed(seed, {j + 1, par}));
            std::vector<double> tau(m);
            for (double& t : tau) t = specs[j].tau_from_uniform(rng.uniform01());
            tau = order_relabel(std::move(tau));
            for (std::uint64_t x = 0; x < m; ++x) {
                double t = tau[x];
                out.tau[j][par * m + x] = t;
                gamma[j][par * m + x] = out.c[j] * t;
                if (j + 1 < k) p[j][par * m + x] = 1.0 / (1.0 + t);
            }
        }
        parents *= m;
    }

    TreeSpec tree{volumes};
    out.env = Environment::make_dense(std::move(tree), std::move(gamma));
    for (std::size_t j = 1; j < k; ++j) out.env.set_coin_params(j, std::move(p[j - 1]));
    out.speed_factor = out.c.back();
    return out;
}

double VirtualGremLevel::level_gamma_sum() const {
    double s = 0.0;
    for (double v : top_tau) s += v;
    for (double v : rest_tau) s += v;
    return c * s;
}

VirtualGremEnv build_grem_env_virtual(std::uint64_t n, std::span<const TailSpec> specs,
                                      std::uint64_t seed, std::size_t top_count,
                                      std::uint64_t stream_threshold, std::uint64_t parent_cap) {
    check_specs(specs, true);
    if (top_count < 1) throw SpecError("top_count must be >= 1");
    std::size_t k = specs.size();

    VirtualGremEnv out;
    out.n = n;
    out.volumes = fine_tune_volumes(n, specs);
    out.levels.resize(k);

    std::uint64_t parents = 1;
    for (std::size_t j = 0; j < k; ++j) {
        std::uint64_t m = out.volumes[j];
        if (parents > parent_cap)
            throw MemoryCapError("build_grem_env_virtual: too many parents to materialize");
        VirtualGremLevel& lv = out.levels[j];
        lv.volume = m;
        lv.parents = parents;
        lv.top_count = std::min<std::size_t>(top_count, m);
        lv.c = scaling_constant(specs[j], m);
        lv.top_tau.resize(parents * lv.top_count);
        lv.rest_tau.assign(parents, 0.0);
        bool exact = parents <= stream_threshold / m; // parents * m <= threshold
        lv.exact_aggregates = exact;
        double inv_alpha = 1.0 / specs[j].alpha;

        for (std::uint64_t par = 0; par < parents; ++par) {
            Rng rng(derive_seed(seed, {j + 1, par}));
            double* top = lv.top_tau.data() + par * lv.top_count;
            std::size_t L = lv.top_count;
            if (exact) {
                // Stream all m draws: total sum plus a min-heap of the top L.
                double sum = 0.0, comp = 0.0;
                std::size_t filled = 0;
                for (std::uint64_t i = 0; i < m; ++i) {
                    double tau = specs[j].tau_from_uniform(rng.uniform01());
                    double t = sum + tau;
                    if (std::abs(sum) >= std::abs(tau))
                        comp += (sum - t) + tau;
                    else
                        comp += (tau - t) + sum;
                    sum = t;
                    if (filled < L) {
                        top[filled++] = tau;
                        if (filled == L)
                            std::make_heap(top, top + L, std::greater<>());
                    } else if (tau > top[0]) {
                        std::pop_heap(top, top + L, std::greater<>());
                        top[L - 1] = tau;
                        std::push_heap(top, top + L, std::greater<>());
                    }
                }
                std::sort(top, top + L, std::greater<>());
                double total = sum + comp;
                double top_sum = 0.0;
                for (std::size_t i = 0; i < L; ++i) top_sum += top[i];
                lv.rest_tau[par] = std::max(0.0, total - top_sum);
            } else {
                if (!specs[j].is_pareto())
                    throw SpecError("virtual aggregates above the stream threshold support "
                                    "the Pareto family only");
                // Smallest L uniforms via the order-statistics recursion, in
                // log space: ln(1 - U_(i)) = sum_{q<=i} ln(W_q) / (m - q + 1).
                double lnb = 0.0;
                double u_last = 0.0;
                for (std::size_t i = 0; i < L; ++i) {
                    lnb += std::log(rng.uniform01()) / static_cast<double>(m - i);
                    u_last = -std::expm1(lnb);
                    top[i] = specs[j].tau_from_uniform(u_last);
                }
                // Bulk below the top block: m - L values of tau conditioned
                // on U > u_last, drawn as one normal matched to the exact
                // conditional mean and variance.
                double rest = static_cast<double>(m - L);
                double q1 = 1.0 - inv_alpha;  // exponent of the first moment integral
                double q2 = 1.0 - 2.0 * inv_alpha;
                double denom = 1.0 - u_last;
                double m1 = (std::pow(u_last, q1) - 1.0) / ((inv_alpha - 1.0) * denom);
                double m2 = (std::pow(u_last, q2) - 1.0) / ((2.0 * inv_alpha - 1.0) * denom);
                double var = std::max(0.0, m2 - m1 * m1);
                double draw = rest * m1 + std::sqrt(rest * var) * standard_normal(rng);
                double lo = rest * 1.0;           // tau >= 1 on the whole support
                double hi = rest * top[L - 1];    // each bulk value < tau_(L)
                lv.rest_tau[par] = std::clamp(draw, lo, hi);
            }
        }
        if (parents > std::numeric_limits<std::uint64_t>::max() / m)
            throw OverflowError("build_grem_env_virtual: parent count overflow");
        parents *= m;
    }
    return out;
}

CoupledEnvPair coupled_envs(std::uint64_t n, std::span<const TailSpec> specs, std::uint64_t seed,
                            std::size_t top_labels, std::size_t max_levels,
                            std::uint64_t draw_budget) {
    check_specs(specs, true);
    if (top_labels < 1) throw SpecError("coupled_envs: top_labels must be >= 1");
    std::size_t k = std::min(specs.size(), max_levels);
    if (k == 0) throw SpecError("coupled_envs: no levels requested");

    CoupledEnvPair out;
    out.volumes = fine_tune_volumes(n, specs);
    out.top_labels = top_labels;
    out.finite_env.resize(k);
    out.limit_env.resize(k);
    out.s_norm.resize(k);
    out.parents.resize(k);

    std::uint64_t parents = 1;
    for (std::size_t j = 0; j < k; ++j) {
        std::uint64_t m = out.volumes[j];
        if (parents > draw_budget / (m + 1))
            throw MemoryCapError("coupled_envs: draw budget exceeded; restrict max_levels");
        double c = scaling_constant(specs[j], m);
        std::size_t lab = std::min<std::uint64_t>(top_labels, m);
        out.parents[j] = parents;
        out.finite_env[j].resize(parents * lab);
        out.limit_env[j].resize(parents * lab);
        out.s_norm[j].resize(parents);

        for (std::uint64_t par = 0; par < parents; ++par) {
            Rng rng(derive_seed(seed, {0x600d, j + 1, par}));
            // Partial sums of the shared exponential field, streamed to M_j+1.
            std::vector<double> s_top(lab);
            double s = 0.0;
            for (std::uint64_t x = 1; x <= m + 1; ++x) {
                s += rng.exponential(1.0);
                if (x <= lab) s_top[x - 1] = s;
            }
            out.s_norm[j][par] = s;
            for (std::size_t x = 0; x < lab; ++x) {
                out.finite_env[j][par * lab + x] = c * specs[j].ginv(s_top[x] / s);
                out.limit_env[j][par * lab + x] =
                    std::pow(s_top[x], -1.0 / specs[j].alpha);
            }
        }
        if (parents > std::numeric_limits<std::uint64_t>::max() / std::max<std::uint64_t>(lab, 1))
            throw OverflowError("coupled_envs: parent count overflow");
        parents *= lab; // materialized subtree only
    }
    return out;
}

} // namespace ktree
