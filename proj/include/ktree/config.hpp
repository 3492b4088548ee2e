#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ktree/env.hpp"

namespace ktree {

// Batch experiment description, loadable from a key = value text file
// ('#' starts a comment). Environment levels are given either as explicit
// arrays (level.J.gamma = a, b, ...) or as closed forms
// (level.J.gamma_formula = geometric|power, level.J.param, level.J.cutoff).
struct ExperimentConfig {
    enum class Model { coin, mark, kprocess, grem };

    Model model = Model::mark;
    std::vector<std::uint64_t> volumes;
    double horizon = 0.0;
    std::uint64_t jumps = 0; // 0 = horizon-driven
    std::uint64_t replicas = 1;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::vector<Coord> start; // coin start leaf; empty = all ones
    std::string out_prefix;

    std::vector<std::vector<double>> gamma_levels; // dense environment
    std::vector<Environment::Form> forms;          // closed-form environment

    std::uint64_t grem_n = 0;
    std::vector<double> alphas;
    double theta_r = 1.0; // expected-theta / mc-theta argument
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path); // SpecError when unreadable

// Dense when gamma arrays are present, closed-form when formulas are; error
// when neither or both.
Environment make_environment(const ExperimentConfig& cfg);

} // namespace ktree
