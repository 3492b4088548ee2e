#include "ktree/mark_sim.hpp"

#include <algorithm>
#include <cmath>

namespace ktree {

void ClockProcess::append(double position, double weight) {
    if (!(weight > 0.0)) throw SpecError("clock atoms must have positive weight");
    if (!pos_.empty() && position < pos_.back())
        throw SpecError("clock atoms must be appended in position order");
    pos_.push_back(position);
    w_.push_back(weight);
    // Neumaier compensated running sum: Gamma is a long prefix sum and the
    // inverse's correctness depends on it.
    double t = sum_ + weight;
    if (std::abs(sum_) >= std::abs(weight))
        comp_ += (sum_ - t) + weight;
    else
        comp_ += (weight - t) + sum_;
    sum_ = t;
    cum_.push_back(sum_ + comp_);
}

double ClockProcess::value_at(double r) const {
    auto it = std::upper_bound(pos_.begin(), pos_.end(), r);
    if (it == pos_.begin()) return 0.0;
    return cum_[static_cast<std::size_t>(it - pos_.begin()) - 1];
}

std::size_t ClockProcess::atom_covering(double t) const {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), t);
    if (it == cum_.end())
        throw HorizonExhausted("clock queried at t >= generated mass; extend generation");
    return static_cast<std::size_t>(it - cum_.begin());
}

double invert_clock(const ClockProcess& clock, double t) {
    return clock.position(clock.atom_covering(t));
}

namespace {

// Marks inside [left, right): optional extra mark at the left endpoint, then
// Poisson arrivals at total rate `volume`. Uniform labels on {1..volume}.
void emit_interval_marks(double left, double right, std::uint64_t volume, bool extra,
                         RandomSource& rng, std::vector<Mark>& out) {
    if (extra)
        out.push_back({left, static_cast<Coord>(1 + rng.uniform_int(volume)), MarkKind::extra, 0.0});
    double mean_gap = 1.0 / static_cast<double>(volume);
    double pos = left + rng.exponential(mean_gap);
    while (pos < right) {
        out.push_back({pos, static_cast<Coord>(1 + rng.uniform_int(volume)), MarkKind::poisson, 0.0});
        pos += rng.exponential(mean_gap);
    }
}

} // namespace

MarkStream generate_marks_level(std::size_t level, std::span<const ConstancyInterval> intervals,
                                std::uint64_t volume, RandomSource& rng) {
    if (level < 1) throw SpecError("levels start at 1");
    if (volume < 1) throw SpecError("volume must be >= 1");
    MarkStream s;
    s.level = level;
    double prev_right = 0.0;
    bool first = true;
    for (const auto& iv : intervals) {
        if (!(iv.left < iv.right)) throw SpecError("degenerate interval");
        if (!first && iv.left < prev_right) throw SpecError("intervals overlap or are unsorted");
        first = false;
        prev_right = iv.right;
        emit_interval_marks(iv.left, iv.right, volume, level >= 2, rng, s.marks);
    }
    return s;
}

ClockProcess build_clock(MarkStream& stream, const Environment& env,
                         std::span<const std::uint64_t> parent_flat, RandomSource& rng) {
    bool dense = env.kind() == Environment::Kind::dense;
    if (dense && parent_flat.size() != stream.marks.size())
        throw SpecError("build_clock: one state prefix per mark required");
    ClockProcess clock;
    for (std::size_t i = 0; i < stream.marks.size(); ++i) {
        Mark& m = stream.marks[i];
        double g = env.gamma(stream.level, dense ? parent_flat[i] : 0, m.label);
        m.weight = g * rng.exponential(1.0);
        clock.append(m.position, m.weight);
    }
    return clock;
}

std::vector<ConstancyInterval> constancy_intervals(const ClockProcess& clock,
                                                   std::span<const std::vector<Coord>> values) {
    if (!values.empty() && values.size() != clock.size())
        throw SpecError("constancy_intervals: one value per atom required");
    std::vector<ConstancyInterval> out;
    out.reserve(clock.size());
    for (std::size_t i = 0; i < clock.size(); ++i) {
        ConstancyInterval iv;
        iv.left = clock.cum_before(i);
        iv.right = clock.cum(i);
        if (!(iv.left < iv.right)) continue; // weight lost to rounding
        if (!values.empty()) iv.value = values[i];
        out.push_back(std::move(iv));
    }
    return out;
}

MarkHierarchy::MarkHierarchy(const Environment& env, std::uint64_t seed)
    : MarkHierarchy(env, seed, Options{}) {}

MarkHierarchy::MarkHierarchy(const Environment& env, std::uint64_t seed, Options opt)
    : env_(&env),
      volumes_(env.working_volumes()),
      dense_(env.kind() == Environment::Kind::dense),
      opt_(opt) {
    data_.reserve(volumes_.size());
    for (std::size_t l = 1; l <= volumes_.size(); ++l)
        data_.emplace_back(derive_seed(seed, {l}));
}

void MarkHierarchy::extend_axis(double r) {
    if (r <= axis_) return;
    Level& lv = data_[0];
    // Level 1 restarts the arrival chain at each window edge; memorylessness
    // makes the restriction to disjoint windows exact.
    std::vector<Mark> fresh;
    emit_interval_marks(axis_, r, volumes_[0], false, lv.rng, fresh);
    for (const Mark& m : fresh) {
        lv.stream.marks.push_back(m);
        lv.parent.push_back(0);
        lv.flat.push_back(m.label - 1);
    }
    std::size_t start = lv.clock.size();
    for (std::size_t i = start; i < lv.stream.marks.size(); ++i) {
        Mark& m = lv.stream.marks[i];
        m.weight = env_->gamma(1, 0, m.label) * lv.rng.exponential(1.0);
        lv.clock.append(m.position, m.weight);
    }
    axis_ = r;
    cascade();
}

void MarkHierarchy::cascade() {
    for (std::size_t l = 2; l <= levels(); ++l) {
        Level& lv = data_[l - 1];
        const Level& prev = data_[l - 2];
        std::vector<Mark> fresh;
        for (std::size_t i = lv.consumed; i < prev.clock.size(); ++i) {
            double a = prev.clock.cum_before(i);
            double b = prev.clock.cum(i);
            if (!(a < b)) continue;
            fresh.clear();
            emit_interval_marks(a, b, volumes_[l - 1], opt_.extra_marks, lv.rng, fresh);
            std::uint64_t pf = prev.flat[i];
            for (const Mark& m : fresh) {
                lv.stream.marks.push_back(m);
                lv.parent.push_back(i);
                lv.flat.push_back(dense_ ? pf * volumes_[l - 1] + (m.label - 1) : 0);
            }
            std::size_t start = lv.clock.size();
            for (std::size_t q = start; q < lv.stream.marks.size(); ++q) {
                Mark& m = lv.stream.marks[q];
                m.weight = env_->gamma(l, pf, m.label) * lv.rng.exponential(1.0);
                lv.clock.append(m.position, m.weight);
            }
        }
        lv.consumed = prev.clock.size();
    }
}

void MarkHierarchy::ensure_mass(double target) {
    if (clock(levels()).total() > target) return;
    double r = std::max(axis_, opt_.initial_axis);
    for (int tries = 0; tries < 256; ++tries) {
        extend_axis(r);
        if (clock(levels()).total() > target) return;
        r *= opt_.growth;
    }
    throw DivergenceError("clock mass failed to reach the requested horizon");
}

double MarkHierarchy::theta(double r) {
    if (r < 0.0) throw SpecError("theta: r must be nonnegative");
    if (r == 0.0) return 0.0;
    extend_axis(r);
    double v = r;
    for (std::size_t l = 1; l <= levels(); ++l) v = clock(l).value_at(v);
    return v;
}

std::size_t MarkHierarchy::parent_of(std::size_t level, std::size_t i) const {
    if (level < 2) throw SpecError("level-1 atoms have no parent");
    return data_[level - 1].parent[i];
}

std::vector<Coord> MarkHierarchy::state_of(std::size_t level, std::size_t i) const {
    std::vector<Coord> labels(level);
    std::size_t idx = i;
    for (std::size_t l = level; l >= 1; --l) {
        labels[l - 1] = data_[l - 1].stream.marks[idx].label;
        if (l > 1) idx = data_[l - 1].parent[idx];
    }
    return labels;
}

std::vector<ConstancyInterval> MarkHierarchy::intervals(std::size_t level) const {
    const ClockProcess& c = clock(level);
    std::vector<ConstancyInterval> out;
    out.reserve(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        double a = c.cum_before(i), b = c.cum(i);
        if (!(a < b)) continue;
        out.push_back({a, b, state_of(level, i)});
    }
    return out;
}

Trajectory MarkHierarchy::emit(std::size_t rows, double horizon) const {
    const ClockProcess& top = clock(levels());
    Trajectory traj(levels(), horizon);
    for (std::size_t i = 0; i < rows; ++i)
        traj.append(top.cum_before(i), state_of(levels(), i));
    return traj;
}

Trajectory MarkHierarchy::trajectory(double horizon) {
    if (!(horizon > 0.0)) throw SpecError("trajectory: horizon must be positive");
    ensure_mass(horizon);
    const ClockProcess& top = clock(levels());
    std::size_t rows = top.atom_covering(horizon) + 1; // states entered before the horizon
    return emit(rows, horizon);
}

Trajectory MarkHierarchy::trajectory_jumps(std::size_t jumps) {
    double target = 1.0;
    for (int tries = 0; tries < 256; ++tries) {
        ensure_mass(target);
        if (clock(levels()).size() >= jumps + 1) break;
        target = clock(levels()).total() * opt_.growth + 1.0;
    }
    if (clock(levels()).size() < jumps + 1)
        throw DivergenceError("failed to generate the requested number of jumps");
    return emit(jumps + 1, clock(levels()).cum_before(jumps));
}

Trajectory simulate_mark(const Environment& env, double horizon, std::uint64_t seed) {
    MarkHierarchy h(env, seed);
    return h.trajectory(horizon);
}

Trajectory simulate_mark_jumps(const Environment& env, std::size_t jumps, std::uint64_t seed) {
    MarkHierarchy h(env, seed);
    return h.trajectory_jumps(jumps);
}

} // namespace ktree
