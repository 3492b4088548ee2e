#include "ktree/skorohod.hpp"

#include <algorithm>
#include <cmath>

#include "ktree/errors.hpp"

namespace ktree {

double state_distance(std::span<const Coord> x, std::span<const Coord> y) {
    if (x.size() != y.size()) throw SpecError("state_distance: dimension mismatch");
    double d = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        double xi = x[j] == kInfCoord ? 0.0 : 1.0 / static_cast<double>(x[j]);
        double yi = y[j] == kInfCoord ? 0.0 : 1.0 / static_cast<double>(y[j]);
        d = std::max(d, std::abs(xi - yi));
    }
    return d;
}

TimeDistortion TimeDistortion::identity() {
    TimeDistortion l;
    l.pts_ = {{0.0, 0.0}};
    return l;
}

TimeDistortion TimeDistortion::from_points(std::vector<std::pair<double, double>> pts) {
    if (pts.empty() || pts.front() != std::pair{0.0, 0.0})
        throw SpecError("time distortion must start at (0,0)");
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (!(pts[i].first > pts[i - 1].first && pts[i].second > pts[i - 1].second))
            throw SpecError("time distortion breakpoints must be strictly increasing");
    TimeDistortion l;
    l.pts_ = std::move(pts);
    return l;
}

double TimeDistortion::operator()(double t) const {
    if (t <= 0.0) return 0.0;
    auto it = std::upper_bound(pts_.begin(), pts_.end(), t,
                               [](double v, const auto& p) { return v < p.first; });
    if (it == pts_.end()) return pts_.back().second + (t - pts_.back().first);
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    double w = (t - lo.first) / (hi.first - lo.first);
    return lo.second + w * (hi.second - lo.second);
}

double TimeDistortion::inverse(double v) const {
    if (v <= 0.0) return 0.0;
    auto it = std::upper_bound(pts_.begin(), pts_.end(), v,
                               [](double x, const auto& p) { return x < p.second; });
    if (it == pts_.end()) return pts_.back().first + (v - pts_.back().second);
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    double w = (v - lo.second) / (hi.second - lo.second);
    return lo.first + w * (hi.first - lo.first);
}

double TimeDistortion::badness() const {
    double b = 0.0;
    for (std::size_t i = 1; i < pts_.size(); ++i) {
        double slope = (pts_[i].second - pts_[i - 1].second) / (pts_[i].first - pts_[i - 1].first);
        b = std::max(b, std::abs(std::log(slope)));
    }
    return b; // trailing identity segment has |log 1| = 0
}

namespace {

// Breakpoints of u -> sup_t d(f(t^u), g(lambda(t)^u)): the event times of
// either path and their images under lambda / its inverse.
std::vector<double> u_grid(const Trajectory& f, const Trajectory& g, const TimeDistortion& lam) {
    std::vector<double> u;
    for (std::size_t i = 0; i < f.size(); ++i) {
        u.push_back(f.time(i));
        u.push_back(lam(f.time(i)));
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        u.push_back(g.time(i));
        u.push_back(lam.inverse(g.time(i)));
    }
    u.push_back(0.0);
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

// Direct evaluation of the capped sup at one u.
double sup_at(const Trajectory& f, const Trajectory& g, const TimeDistortion& lam, double u) {
    double tmax = std::max(u, lam.inverse(u));
    std::vector<double> ts;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f.time(i) <= tmax) ts.push_back(f.time(i));
    for (std::size_t i = 0; i < g.size(); ++i) {
        double t = lam.inverse(g.time(i));
        if (t <= tmax) ts.push_back(t);
    }
    ts.push_back(0.0);
    ts.push_back(std::min(u, tmax));
    ts.push_back(std::min(lam.inverse(u), tmax));
    ts.push_back(tmax);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

    double d = 0.0;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        double t = 0.5 * (ts[i] + ts[i + 1]); // interior of a constancy cell
        d = std::max(d, state_distance(f.state_at(std::min(t, u)),
                                       g.state_at(std::min(lam(t), u))));
    }
    // corner (u,u): t beyond both caps
    d = std::max(d, state_distance(f.state_at(u), g.state_at(u)));
    return d;
}

} // namespace

SkorohodBound skorohod_upper_bound(const Trajectory& f, const Trajectory& g,
                                   const TimeDistortion& lambda) {
    if (f.dims() != g.dims()) throw SpecError("skorohod_upper_bound: dimension mismatch");
    if (f.size() == 0 || g.size() == 0) throw SpecError("skorohod_upper_bound: empty trajectory");

    auto grid = u_grid(f, g, lambda);
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        double d = sup_at(f, g, lambda, 0.5 * (grid[i] + grid[i + 1]));
        if (d > 0.0) integral += d * (std::exp(-grid[i]) - std::exp(-grid[i + 1]));
    }
    // Beyond the last breakpoint the sup is constant (held extension).
    double d_inf = sup_at(f, g, lambda, grid.back() + 1.0);
    integral += d_inf * std::exp(-grid.back());

    SkorohodBound b;
    b.badness = lambda.badness();
    b.time_integral = integral;
    b.value = std::max(b.badness, b.time_integral);
    b.tail_cap = std::exp(-std::min(f.horizon(), g.horizon()));
    return b;
}

namespace {

struct RankInterval {
    double left, right;
    std::vector<Coord> value;
};

// Maximal constancy intervals of the full state with all coordinates <= m.
std::vector<RankInterval> rank_intervals(const Trajectory& f, Coord m) {
    std::vector<RankInterval> out;
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto st = f.state(i);
        bool low = std::all_of(st.begin(), st.end(), [m](Coord c) { return c <= m; });
        double right = i + 1 < f.size() ? f.time(i + 1) : f.horizon();
        if (!(right > f.time(i))) continue;
        if (low && !out.empty() && out.back().right == f.time(i) &&
            std::equal(st.begin(), st.end(), out.back().value.begin(), out.back().value.end())) {
            out.back().right = right; // merge a self-jump
        } else if (low) {
            out.push_back({f.time(i), right, {st.begin(), st.end()}});
        }
    }
    return out;
}

} // namespace

TimeDistortion match_distortion(const Trajectory& f, const Trajectory& g, Coord rank_threshold) {
    auto fi = rank_intervals(f, rank_threshold);
    auto gi = rank_intervals(g, rank_threshold);
    if (fi.size() != gi.size())
        throw NoMatchError("rank-interval counts differ");
    for (std::size_t i = 0; i < fi.size(); ++i)
        if (fi[i].value != gi[i].value) throw NoMatchError("rank-interval value sequences differ");

    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    auto push = [&pts](double a, double b) {
        if (a == pts.back().first && b == pts.back().second) return;
        if (!(a > pts.back().first) || !(b > pts.back().second))
            throw NoMatchError("matched endpoints do not admit an increasing distortion");
        pts.emplace_back(a, b);
    };
    for (std::size_t i = 0; i < fi.size(); ++i) {
        push(fi[i].left, gi[i].left);
        push(fi[i].right, gi[i].right);
    }
    return TimeDistortion::from_points(std::move(pts));
}

SkorohodBound best_skorohod_bound(const Trajectory& f, const Trajectory& g,
                                  std::span<const Coord> rank_grid) {
    SkorohodBound best = skorohod_upper_bound(f, g, TimeDistortion::identity());
    for (Coord m : rank_grid) {
        try {
            auto b = skorohod_upper_bound(f, g, match_distortion(f, g, m));
            if (b.value < best.value) best = b;
        } catch (const NoMatchError&) {
            // identity fallback already in place
        }
    }
    return best;
}

} // namespace ktree
