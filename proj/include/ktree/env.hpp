#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ktree/errors.hpp"
#include "ktree/tree.hpp"

namespace ktree {

inline constexpr std::uint64_t kUnbounded = std::numeric_limits<std::uint64_t>::max();

// Closed-form per-level trap-depth maps, depending on the last coordinate
// only: geometric(b) is x -> b^-x, power(p) is x -> x^-p.
enum class FormKind { geometric, power };

// Per-level trap depths gamma_j : addresses of length j -> (0, inf).
//
// Two storage schemes, never mixed within one environment:
//   - dense: one flattened array per level, for finite trees (GREM needs this);
//   - closed_form: per-level formulas plus truncation cutoffs, for the
//     infinite-tree K-process samplers.
//
// Coin parameters p_j are derived from gamma via p = 1/(1 + M_{j+1} gamma)
// unless a level carries explicit values (GREM mode); the two sources are
// never mixed within one level.
class Environment {
public:
    enum class Kind { dense, closed_form };

    struct Form {
        FormKind kind = FormKind::geometric;
        double param = 2.0;
        std::uint64_t cutoff = kUnbounded; // label truncation; kUnbounded = none
    };

    static Environment make_dense(TreeSpec tree, std::vector<std::vector<double>> gamma_levels);
    static Environment make_closed(std::vector<Form> forms);

    // GREM mode: supply coin parameters directly for one interior level.
    void set_coin_params(std::size_t level, std::vector<double> p);

    Kind kind() const { return kind_; }
    std::size_t levels() const { return k_; }
    const TreeSpec& tree() const; // dense only
    const Form& form(std::size_t level) const;

    // Label-set size the samplers operate on: M_j for dense levels, the
    // truncation cutoff for closed-form levels.
    std::uint64_t working_volume(std::size_t level) const;
    std::vector<std::uint64_t> working_volumes() const;

    bool has_explicit_p(std::size_t level) const;

    // gamma_j(x|_{j-1}, label); parent_flat is the row-major index of the
    // parent address (ignored by closed-form levels).
    double gamma(std::size_t level, std::uint64_t parent_flat, Coord label) const;
    double gamma_at(const VertexAddress& addr) const;

    // Coin parameter of an interior vertex (level < k).
    double p_value(std::size_t level, std::uint64_t parent_flat, Coord label) const;
    double p_at(const VertexAddress& addr) const;

    // Product of trap depths along the ancestral path of addr.
    double gamma_bar(const VertexAddress& addr) const;

    // Sum of gamma_bar_j over all level-j addresses of the working
    // (truncated) tree.
    double sum_gamma_bar_level(std::size_t level) const;
    double sum_gamma_bar_truncated() const { return sum_gamma_bar_level(k_); }

    // Same sum over the full infinite tree (closed-form only); throws
    // DivergenceError when a level sum diverges.
    double sum_gamma_bar_full_level(std::size_t level) const;
    double sum_gamma_bar_full() const { return sum_gamma_bar_full_level(k_); }

    // Expected clock time per unit r lost to truncating each level at the
    // given cutoff: sum of gamma_bar_k over leaves with some coordinate
    // beyond its cutoff.
    double tail_mass(std::span<const std::uint64_t> cutoffs) const;

    // Closed-form univariate sums (exposed for tests and cutoff selection).
    double form_sum_full(std::size_t level) const;
    double form_sum_truncated(std::size_t level, std::uint64_t cutoff) const;

private:
    Kind kind_ = Kind::dense;
    std::size_t k_ = 0;
    // dense storage
    TreeSpec tree_;
    std::vector<std::vector<double>> gamma_;     // gamma_[j]: flattened level j+1 values
    std::vector<std::vector<double>> explicit_p_; // empty vector = derive from gamma
    // closed-form storage
    std::vector<Form> forms_;
};

// Coin parameter of a trap depth: 1/(1 + M_{j+1} gamma),
// strictly inside (0,1).
inline double gamma_to_p(double gamma, std::uint64_t next_volume) {
    if (!(gamma > 0.0)) throw SpecError("gamma_to_p: gamma must be positive");
    if (next_volume < 1) throw SpecError("gamma_to_p: volume must be >= 1");
    return 1.0 / (1.0 + static_cast<double>(next_volume) * gamma);
}

// Law of the kept-generation variable g_x of a leaf: the process keeps the
// first g coordinates of x and redraws the rest uniformly.
struct GxDistribution {
    std::vector<double> pmf; // index i = generation kept, i in {0,..,k-1}
};

GxDistribution gx_pmf(const VertexAddress& leaf, const Environment& env);

} // namespace ktree
