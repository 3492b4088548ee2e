#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ktree/tree.hpp"

namespace ktree {

// Cadlag leaf-state path. Row i holds the state entered at times[i]; the
// state holds on [times[i], times[i+1]). Row 0 is the start state at t = 0;
// jumps to the same state are recorded as events. Coordinates may be
// kInfCoord (printed as "inf").
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(std::size_t k, double horizon) : k_(k), horizon_(horizon) {}

    std::size_t dims() const { return k_; }
    double horizon() const { return horizon_; }
    void set_horizon(double h) { horizon_ = h; }

    std::size_t size() const { return times_.empty() ? 0 : times_.size(); }
    double time(std::size_t i) const { return times_[i]; }
    std::span<const Coord> state(std::size_t i) const {
        return {coords_.data() + i * k_, k_};
    }

    void append(double t, std::span<const Coord> state);

    // State holding at time t (cadlag convention), t in [0, horizon].
    std::span<const Coord> state_at(double t) const;

    // Event times strictly inside (0, horizon], i.e. the jump epochs.
    std::size_t jump_count() const { return size() > 0 ? size() - 1 : 0; }

    bool operator==(const Trajectory&) const = default;

private:
    std::size_t k_ = 0;
    double horizon_ = 0.0;
    std::vector<double> times_;
    std::vector<Coord> coords_; // size() * k_ entries, row-major
};

// CSV with header "t,x1,...,xk", 17 significant digits, token "inf" for
// compactification points. Round-trips losslessly through read_csv.
void write_csv(const Trajectory& t, std::ostream& out);
std::string to_csv(const Trajectory& t);
Trajectory read_csv(std::istream& in, double horizon);
Trajectory csv_to_trajectory(const std::string& text, double horizon);

} // namespace ktree
