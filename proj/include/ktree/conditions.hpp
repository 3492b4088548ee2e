#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ktree/env.hpp"

namespace ktree {

// Numeric values of the convergence conditions for one level j:
//   em4: mean extra-mark count per unit r, divided by M_j (dimensionless),
//   em3: mean extra-mark clock contribution per unit r,
// both sums over the finite tree with the usual empty-product conventions;
// em2 gaps are filled when a limit environment is supplied.
struct LevelCondition {
    std::size_t level = 0;       // j = 1..k (em4/em3 are zero at j = 1)
    double em4 = 0.0;
    double em3 = 0.0;
    double em2_pointwise = 0.0;  // sup over tree addresses of |gamma^(n) - gamma|
    double em2_sum_gap = 0.0;    // |sum gamma_bar_j^(n) - full-tree sum gamma_bar_j|
    bool has_em2 = false;
};

struct ConditionReport {
    std::vector<LevelCondition> rows;
};

// Exact finite sums over a dense environment; limit_env, when present, must
// be closed-form on the same number of levels.
ConditionReport condition_values(const Environment& env_n, const Environment* limit_env = nullptr);

double em4_value(const Environment& env_n, std::size_t j);
double em3_value(const Environment& env_n, std::size_t j);

// k = 2 reductions (both products collapse): em4 = M_1 / M_2 and
// em3 = (sum of gamma_2 over all leaves) / M_2. Lets aggregated environments
// that cannot be materialized report condition values; equal to
// condition_values on dense k = 2 trees.
struct K2Conditions {
    double em4 = 0.0;
    double em3 = 0.0;
};
K2Conditions condition_values_k2(std::uint64_t m1, std::uint64_t m2, double sum_gamma2);

// One NDJSON row per level: {"n":..,"j":..,"em4":..,"em3":..,"em2_sum_gap":..}.
std::string to_ndjson(const ConditionReport& report, std::uint64_t n);

} // namespace ktree
