#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ktree/env.hpp"
#include "ktree/rng.hpp"
#include "ktree/trajectory.hpp"

namespace ktree {

enum class MarkKind : std::uint8_t { poisson, extra };

// A labeled time mark on the previous level's internal time axis. The weight
// gamma_l(prefix, label) * T (T a fresh mean-one exponential) is attached by
// build_clock and is zero until then.
struct Mark {
    double position = 0.0;
    Coord label = 0;
    MarkKind kind = MarkKind::poisson;
    double weight = 0.0;
};

struct MarkStream {
    std::size_t level = 1;
    std::vector<Mark> marks; // position-sorted; float ties keep generation order
};

// Purely atomic nondecreasing step function Gamma(r) = sum of weights at
// positions <= r, with precomputed compensated prefix sums. Gamma(0-) = 0.
class ClockProcess {
public:
    void append(double position, double weight);

    std::size_t size() const { return pos_.size(); }
    bool empty() const { return pos_.empty(); }
    double position(std::size_t i) const { return pos_[i]; }
    double weight(std::size_t i) const { return w_[i]; }
    // Gamma(position(i)), i.e. the cumulative mass through atom i.
    double cum(std::size_t i) const { return cum_[i]; }
    double cum_before(std::size_t i) const { return i == 0 ? 0.0 : cum_[i - 1]; }
    double total() const { return cum_.empty() ? 0.0 : cum_.back(); }

    // Gamma(r).
    double value_at(double r) const;

    // Index of the atom s with Gamma(s-) <= t < Gamma(s); throws
    // HorizonExhausted when t is at or beyond the generated mass.
    std::size_t atom_covering(double t) const;

private:
    std::vector<double> pos_, w_, cum_;
    double sum_ = 0.0, comp_ = 0.0; // Neumaier running sum
};

// Right-continuous inverse phi(t) = inf{ r >= 0 : Gamma(r) > t }, valid for
// t below the generated mass.
double invert_clock(const ClockProcess& clock, double t);

// Maximal half-open interval [left, right) on which a level's process is
// constant, carrying the state prefix there.
struct ConstancyInterval {
    double left = 0.0;
    double right = 0.0;
    std::vector<Coord> value;
};

// Poisson marks at total rate `volume` with i.i.d. uniform labels inside each
// interval, plus (for levels >= 2) one extra mark at each interval's left
// endpoint with an independent uniform label. Intervals must be disjoint and
// sorted. Draw order per interval: extra label, then alternating gap/label
// pairs until the overshooting gap.
MarkStream generate_marks_level(std::size_t level, std::span<const ConstancyInterval> intervals,
                                std::uint64_t volume, RandomSource& rng);

// One clock atom per mark, weight gamma_level(prefix, label) * T with T a
// fresh mean-one exponential; parent_flat[i] is the flat index of the state
// prefix at mark i (ignored by closed-form environments). Also records the
// weights into the stream.
ClockProcess build_clock(MarkStream& stream, const Environment& env,
                         std::span<const std::uint64_t> parent_flat, RandomSource& rng);

// { [Gamma(s-), Gamma(s)) : s an atom }, sorted, tiling [0, total).
std::vector<ConstancyInterval> constancy_intervals(const ClockProcess& clock,
                                                   std::span<const std::vector<Coord>> values);

// The inductive level stack: level-1 marks on a lazily extended axis, then,
// per level, marks inside the previous level's constancy intervals, clocks,
// and inverses. With extra_marks on this is the finite-volume construction;
// with extra_marks off and closed-form depths it is the truncated K-process.
class MarkHierarchy {
public:
    struct Options {
        bool extra_marks = true;
        double initial_axis = 1.0;
        double growth = 2.0;
    };

    MarkHierarchy(const Environment& env, std::uint64_t seed);
    MarkHierarchy(const Environment& env, std::uint64_t seed, Options opt);

    std::size_t levels() const { return volumes_.size(); }

    // Generate level-1 marks through axis position r and cascade down.
    void extend_axis(double r);

    // Grow the axis until the level-k clock mass strictly exceeds target.
    void ensure_mass(double target);

    // Theta(r) = Gamma_k o ... o Gamma_1 (r); extends the axis as needed.
    double theta(double r);

    const MarkStream& stream(std::size_t level) const { return data_[level - 1].stream; }
    const ClockProcess& clock(std::size_t level) const { return data_[level - 1].clock; }
    std::size_t parent_of(std::size_t level, std::size_t i) const;

    // Full state prefix x|_level of atom i, via the parent chain.
    std::vector<Coord> state_of(std::size_t level, std::size_t i) const;

    std::vector<ConstancyInterval> intervals(std::size_t level) const;

    Trajectory trajectory(double horizon);
    Trajectory trajectory_jumps(std::size_t jumps);

private:
    struct Level {
        MarkStream stream;
        ClockProcess clock;
        std::vector<std::uint64_t> parent; // index into previous level's atoms
        std::vector<std::uint64_t> flat;   // flat prefix index (dense env only)
        std::size_t consumed = 0;          // previous-level atoms already filled
        Rng rng;
        explicit Level(std::uint64_t seed) : rng(seed) {}
    };

    void cascade();
    Trajectory emit(std::size_t rows, double horizon) const;

    const Environment* env_;
    std::vector<std::uint64_t> volumes_;
    bool dense_;
    Options opt_;
    double axis_ = 0.0;
    std::vector<Level> data_;
};

// The finite-volume trap model via the mark representation.
Trajectory simulate_mark(const Environment& env, double horizon, std::uint64_t seed);
Trajectory simulate_mark_jumps(const Environment& env, std::size_t jumps, std::uint64_t seed);

} // namespace ktree
