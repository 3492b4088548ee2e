#include "ktree/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "ktree/errors.hpp"

namespace ktree {

void Trajectory::append(double t, std::span<const Coord> state) {
    if (state.size() != k_) throw SpecError("trajectory state dimension mismatch");
    if (!times_.empty() && !(t > times_.back()))
        throw SpecError("trajectory jump times must be strictly increasing");
    if (times_.empty() && t != 0.0)
        throw SpecError("trajectory must start at t = 0");
    times_.push_back(t);
    coords_.insert(coords_.end(), state.begin(), state.end());
}

std::span<const Coord> Trajectory::state_at(double t) const {
    if (times_.empty()) throw SpecError("empty trajectory");
    // last row with time <= t
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t i = (it == times_.begin()) ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
    return state(i);
}

void write_csv(const Trajectory& t, std::ostream& out) {
    out << "t";
    for (std::size_t j = 1; j <= t.dims(); ++j) out << ",x" << j;
    out << "\n";
    char buf[64];
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", t.time(i));
        out << buf;
        for (Coord c : t.state(i)) {
            if (c == kInfCoord)
                out << ",inf";
            else
                out << "," << c;
        }
        out << "\n";
    }
}

std::string to_csv(const Trajectory& t) {
    std::ostringstream os;
    write_csv(t, os);
    return os.str();
}

Trajectory read_csv(std::istream& in, double horizon) {
    std::string line;
    if (!std::getline(in, line)) throw SpecError("trajectory csv: missing header");
    std::size_t k = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') );
    if (k == 0 || line.rfind("t,", 0) != 0) throw SpecError("trajectory csv: bad header");
    Trajectory t(k, horizon);
    std::vector<Coord> state(k);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        if (!std::getline(row, cell, ',')) throw SpecError("trajectory csv: bad row");
        double time = std::stod(cell);
        for (std::size_t j = 0; j < k; ++j) {
            if (!std::getline(row, cell, ',')) throw SpecError("trajectory csv: short row");
            state[j] = (cell == "inf") ? kInfCoord : static_cast<Coord>(std::stoull(cell));
        }
        t.append(time, state);
    }
    return t;
}

Trajectory csv_to_trajectory(const std::string& text, double horizon) {
    std::istringstream is(text);
    return read_csv(is, horizon);
}

} // namespace ktree
