#include "ktree/coin_sim.hpp"

namespace ktree {

namespace {

void check_leaf(const VertexAddress& current, const Environment& env) {
    if (current.level() != env.levels())
        throw SpecError("coin_sim: current state must be a leaf");
    if (env.kind() == Environment::Kind::dense && !current.valid_in(env.tree()))
        throw SpecError("coin_sim: leaf outside the tree");
}

} // namespace

VertexAddress sample_jump_target(const VertexAddress& current, const Environment& env,
                                 RandomSource& rng, std::size_t* kept_generation) {
    check_leaf(current, env);
    std::size_t k = env.levels();

    // Coin walk: flip at x|_{k-1}, ..., x|_1 until tails; the root coin has
    // heads probability 0, so the walk stops at generation g in {0,..,k-1}.
    std::size_t g = 0;
    VertexAddress prefix = current;
    for (std::size_t j = k; j-- > 1;) {
        prefix.path.pop_back(); // now x|_j
        double p = env.p_at(prefix);
        if (!(rng.uniform01() < p)) { // tails
            g = j;
            break;
        }
    }
    if (kept_generation) *kept_generation = g;

    VertexAddress target{{current.path.begin(), current.path.begin() + static_cast<long>(g)}};
    for (std::size_t j = g + 1; j <= k; ++j)
        target.path.push_back(static_cast<Coord>(1 + rng.uniform_int(env.working_volume(j))));
    return target;
}

Trajectory simulate_coin(const Environment& env, const VertexAddress& start, double horizon,
                         RandomSource& rng) {
    if (!(horizon > 0.0)) throw SpecError("simulate_coin: horizon must be positive");
    check_leaf(start, env);

    Trajectory traj(env.levels(), horizon);
    traj.append(0.0, start.path);
    VertexAddress state = start;
    double t = 0.0;
    for (;;) {
        t += rng.exponential(env.gamma_at(state));
        if (t > horizon) break;
        state = sample_jump_target(state, env, rng);
        traj.append(t, state.path);
    }
    return traj;
}

Trajectory simulate_coin_jumps(const Environment& env, const VertexAddress& start,
                               std::size_t jumps, RandomSource& rng) {
    check_leaf(start, env);
    Trajectory traj(env.levels(), 0.0);
    traj.append(0.0, start.path);
    VertexAddress state = start;
    double t = 0.0;
    for (std::size_t i = 0; i < jumps; ++i) {
        t += rng.exponential(env.gamma_at(state));
        state = sample_jump_target(state, env, rng);
        traj.append(t, state.path);
    }
    traj.set_horizon(t);
    return traj;
}

} // namespace ktree
