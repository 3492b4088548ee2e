#include "ktree/conditions.hpp"

#include <cmath>
#include <cstdio>

namespace ktree {

namespace {

// Single pass over the tree levels accumulating, per prefix x|_p,
//   prod_{q<=p} f_q(x|_q)
// where f_q is the em4/em3 factor at level q for a fixed inner index l:
//   q <  l : M_{q+1} gamma_q(x|_q)
//   q == l : 1
//   q >  l : 1 + M_{q+1} gamma_q(x|_q)
// and, for em3 only, a final level j with factor gamma_j(x|_j).
double factored_sum(const Environment& env, std::size_t j, std::size_t l, bool with_gamma_j) {
    const TreeSpec& tree = env.tree();
    std::size_t last = with_gamma_j ? j : j - 1;
    std::vector<double> acc{1.0};
    for (std::size_t p = 1; p <= last; ++p) {
        std::uint64_t m = tree.volumes[p - 1];
        std::vector<double> next(acc.size() * m);
        for (std::size_t par = 0; par < acc.size(); ++par) {
            for (std::uint64_t x = 0; x < m; ++x) {
                double g = env.gamma(p, par, static_cast<Coord>(x + 1));
                double f;
                if (with_gamma_j && p == j)
                    f = g;
                else if (p < l)
                    f = static_cast<double>(tree.volumes[p]) * g;
                else if (p == l)
                    f = 1.0;
                else
                    f = 1.0 + static_cast<double>(tree.volumes[p]) * g;
                next[par * m + x] = acc[par] * f;
            }
        }
        acc = std::move(next);
    }
    double s = 0.0;
    for (double v : acc) s += v;
    return s;
}

double volume_product(const TreeSpec& tree, std::size_t j) {
    double prod = 1.0;
    for (std::size_t p = 2; p <= j; ++p) prod *= static_cast<double>(tree.volumes[p - 1]);
    return prod;
}

void check_dense(const Environment& env) {
    if (env.kind() != Environment::Kind::dense)
        throw SpecError("condition values require a dense environment");
    if (env.tree().leaf_count() > 10'000'000ULL)
        throw SpecError("condition values: tree too large to sum densely");
}

} // namespace

double em4_value(const Environment& env_n, std::size_t j) {
    check_dense(env_n);
    if (j < 2 || j > env_n.levels()) throw SpecError("em4 is defined for j = 2..k");
    double s = 0.0;
    for (std::size_t l = 1; l <= j - 1; ++l) s += factored_sum(env_n, j, l, false);
    return s / volume_product(env_n.tree(), j);
}

double em3_value(const Environment& env_n, std::size_t j) {
    check_dense(env_n);
    if (j < 2 || j > env_n.levels()) throw SpecError("em3 is defined for j = 2..k");
    double s = 0.0;
    for (std::size_t l = 1; l <= j - 1; ++l) s += factored_sum(env_n, j, l, true);
    return s / volume_product(env_n.tree(), j);
}

K2Conditions condition_values_k2(std::uint64_t m1, std::uint64_t m2, double sum_gamma2) {
    if (m1 < 1 || m2 < 1) throw SpecError("condition_values_k2: volumes must be >= 1");
    return {static_cast<double>(m1) / static_cast<double>(m2),
            sum_gamma2 / static_cast<double>(m2)};
}

ConditionReport condition_values(const Environment& env_n, const Environment* limit_env) {
    check_dense(env_n);
    if (limit_env) {
        if (limit_env->kind() != Environment::Kind::closed_form)
            throw SpecError("limit environment must be closed-form");
        if (limit_env->levels() != env_n.levels())
            throw SpecError("limit environment level-count mismatch");
    }
    const TreeSpec& tree = env_n.tree();
    std::size_t k = env_n.levels();
    ConditionReport report;
    report.rows.resize(k);
    for (std::size_t j = 1; j <= k; ++j) {
        LevelCondition& row = report.rows[j - 1];
        row.level = j;
        if (j >= 2) {
            row.em4 = em4_value(env_n, j);
            row.em3 = em3_value(env_n, j);
        }
        if (limit_env) {
            row.has_em2 = true;
            // pointwise gap over the finite tree (gamma^(n) vanishes outside it)
            double sup = 0.0;
            std::uint64_t count = 1;
            for (std::size_t p = 1; p < j; ++p) count *= tree.volumes[p - 1];
            std::uint64_t m = tree.volumes[j - 1];
            for (std::uint64_t par = 0; par < count; ++par)
                for (std::uint64_t x = 0; x < m; ++x) {
                    Coord label = static_cast<Coord>(x + 1);
                    double gn = env_n.gamma(j, par, label);
                    double gl = limit_env->gamma(j, 0, label);
                    sup = std::max(sup, std::abs(gn - gl));
                }
            row.em2_pointwise = sup;
            row.em2_sum_gap =
                std::abs(env_n.sum_gamma_bar_level(j) - limit_env->sum_gamma_bar_full_level(j));
        }
    }
    return report;
}

std::string to_ndjson(const ConditionReport& report, std::uint64_t n) {
    std::string out;
    char buf[256];
    for (const auto& row : report.rows) {
        if (row.has_em2)
            std::snprintf(buf, sizeof buf,
                          "{\"n\":%llu,\"j\":%zu,\"em4\":%.17g,\"em3\":%.17g,\"em2_sum_gap\":%.17g}\n",
                          static_cast<unsigned long long>(n), row.level, row.em4, row.em3,
                          row.em2_sum_gap);
        else
            std::snprintf(buf, sizeof buf, "{\"n\":%llu,\"j\":%zu,\"em4\":%.17g,\"em3\":%.17g}\n",
                          static_cast<unsigned long long>(n), row.level, row.em4, row.em3);
        out += buf;
    }
    return out;
}

} // namespace ktree
