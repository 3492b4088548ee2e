#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ktree/env.hpp"
#include "ktree/mark_sim.hpp"
#include "ktree/trajectory.hpp"

namespace ktree {

// Truncated sampler for the K-process on the infinite tree: the inductive
// mark construction restricted to labels <= L_j, with no extra marks. Times
// the untruncated process would spend at high-label states are compressed
// out; the per-unit-r expected clock time lost is certified by tail_mass.
struct TruncatedKConfig {
    Environment env;  // closed-form with cutoffs L_1..L_k
    double horizon = 1.0;
};

struct KRun {
    Trajectory trajectory;
    double truncation_error_bound = 0.0; // tail_mass(env, cutoffs), per unit r
};

KRun simulate_k(const TruncatedKConfig& config, std::uint64_t seed);

// E[Theta_k(r)] = r * sum of gamma_bar_k over the environment's leaf set
// (truncated when cutoffs are present, full otherwise). Throws
// DivergenceError when the sum diverges.
double expected_theta(const Environment& env, double r);

// Monte Carlo of Theta_k(r) = Gamma_k o ... o Gamma_1 (r) over the truncated
// label set; returns (sample mean, standard error).
std::pair<double, double> mc_theta(const TruncatedKConfig& config, double r,
                                   std::size_t replicas, std::uint64_t seed);

// Per-level threshold diagnostic: the smallest m_tilde such that, along the
// observed path up to the horizon, X_i(t) > m_tilde implies X_j(t) > m for
// all j > i. kInfCoord means no finite threshold works on this path.
struct HypercubeLevel {
    std::size_t level = 0;
    Coord m_tilde = 1;
};
std::vector<HypercubeLevel> hypercube_scan(const Trajectory& traj, double horizon, Coord m);

// Greedy cutoff selection: smallest per-level cutoffs (by repeated best
// marginal tail reduction) with tail_mass <= eps.
std::vector<std::uint64_t> choose_cutoffs(const std::vector<Environment::Form>& forms, double eps,
                                          std::uint64_t max_cutoff = 1'000'000);

} // namespace ktree
