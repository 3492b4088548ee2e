#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ktree/trajectory.hpp"

namespace ktree {

// Metric on the compactified state space: d(x,y) = max_j |1/x_j - 1/y_j|,
// with 1/inf = 0. Bounded by 1.
double state_distance(std::span<const Coord> x, std::span<const Coord> y);

// Increasing piecewise-linear bijection of [0,inf) onto itself: breakpoints
// (t_i, v_i) starting at (0,0), identity slope beyond the last one.
class TimeDistortion {
public:
    static TimeDistortion identity();
    static TimeDistortion from_points(std::vector<std::pair<double, double>> pts);

    double operator()(double t) const;
    double inverse(double v) const;

    // sup |log slope| over chords, exact for piecewise-linear distortions
    // (the trailing identity segment contributes 0).
    double badness() const;

    std::span<const std::pair<double, double>> points() const { return pts_; }

private:
    std::vector<std::pair<double, double>> pts_; // includes (0,0)
};

inline double distortion_badness(const TimeDistortion& lambda) { return lambda.badness(); }

struct SkorohodBound {
    double value = 0.0;         // max(badness, time_integral)
    double time_integral = 0.0; // int_0^inf e^-u sup_t d(f(t^u), g(lambda(t)^u)) du
    double badness = 0.0;
    double tail_cap = 0.0;      // e^{-min horizon}: how much of the integral lies
                                // beyond the common horizon (paths held constant there)
};

// Evaluates the Skorohod functional at one candidate distortion, exactly on
// the piecewise-constant/linear structure. An upper bound for the Skorohod
// distance, which is the infimum over all distortions.
SkorohodBound skorohod_upper_bound(const Trajectory& f, const Trajectory& g,
                                   const TimeDistortion& lambda);

// Piecewise-linear distortion mapping the endpoints of f's rank-m
// constancy intervals (maximal intervals with a constant state whose
// coordinates are all <= rank_threshold) to those of g, identity slope
// beyond the last match. Throws NoMatchError when the interval value
// sequences differ; callers fall back to the identity.
TimeDistortion match_distortion(const Trajectory& f, const Trajectory& g, Coord rank_threshold);

// Best bound over {identity} and match_distortion at each threshold in the
// grid (no-match candidates are skipped).
SkorohodBound best_skorohod_bound(const Trajectory& f, const Trajectory& g,
                                  std::span<const Coord> rank_grid);

} // namespace ktree
