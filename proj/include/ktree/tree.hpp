#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ktree/errors.hpp"

namespace ktree {

// Coordinate of a tree vertex on one level. Labels start at 1; kInfCoord is
// the compactification point of each level's label set.
using Coord = std::uint32_t;
inline constexpr Coord kInfCoord = std::numeric_limits<Coord>::max();

// Rooted k-level tree: generation j-1 vertices each have volumes[j-1]
// offspring. The state space of every process here is the leaf set.
struct TreeSpec {
    std::vector<std::uint64_t> volumes; // M_1..M_k

    std::size_t levels() const { return volumes.size(); }

    // Product of all volumes, checked; overflow is a hard error.
    std::uint64_t leaf_count() const {
        std::uint64_t n = 1;
        for (std::uint64_t m : volumes) {
            if (m != 0 && n > std::numeric_limits<std::uint64_t>::max() / m)
                throw OverflowError("leaf count overflows 64 bits");
            n *= m;
        }
        return n;
    }
};

inline TreeSpec make_tree(std::span<const std::uint64_t> volumes) {
    if (volumes.empty()) throw SpecError("make_tree: volume list is empty");
    for (std::uint64_t m : volumes)
        if (m < 1) throw SpecError("make_tree: every volume must be >= 1");
    TreeSpec t{{volumes.begin(), volumes.end()}};
    t.leaf_count(); // force the overflow check now
    return t;
}

inline TreeSpec make_tree(std::initializer_list<std::uint64_t> volumes) {
    return make_tree(std::span<const std::uint64_t>(volumes.begin(), volumes.size()));
}

// Path-style address x|_j = x_1 ... x_j; the empty path is the root.
struct VertexAddress {
    std::vector<Coord> path;

    std::size_t level() const { return path.size(); }

    VertexAddress parent() const {
        if (path.empty()) throw SpecError("root has no parent");
        return VertexAddress{{path.begin(), path.end() - 1}};
    }

    bool valid_in(const TreeSpec& tree) const {
        if (path.size() > tree.levels()) return false;
        for (std::size_t i = 0; i < path.size(); ++i)
            if (path[i] < 1 || path[i] > tree.volumes[i]) return false;
        return true;
    }

    bool operator==(const VertexAddress&) const = default;
};

// Row-major flat index of an address within its level:
// flat(x|_j) = flat(x|_{j-1}) * M_j + (x_j - 1).
inline std::uint64_t flat_index(const TreeSpec& tree, const VertexAddress& addr) {
    std::uint64_t idx = 0;
    for (std::size_t i = 0; i < addr.path.size(); ++i)
        idx = idx * tree.volumes[i] + (addr.path[i] - 1);
    return idx;
}

} // namespace ktree
