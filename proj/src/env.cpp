#include "ktree/env.hpp"

#include <cmath>
#include <numeric>

namespace ktree {

namespace {

double form_eval(const Environment::Form& f, Coord label) {
    switch (f.kind) {
        case FormKind::geometric: return std::pow(f.param, -static_cast<double>(label));
        case FormKind::power: return std::pow(static_cast<double>(label), -f.param);
    }
    throw SpecError("unknown closed form");
}

// Euler-Maclaurin remainder for sum_{x>N} x^-p, used when the truncated
// range is too long to add term by term.
double power_tail(double p, double n) {
    double a = std::pow(n, 1.0 - p) / (p - 1.0);
    double b = -0.5 * std::pow(n, -p);
    double c = p / 12.0 * std::pow(n, -p - 1.0);
    return a + b + c;
}

} // namespace

Environment Environment::make_dense(TreeSpec tree, std::vector<std::vector<double>> gamma_levels) {
    if (gamma_levels.size() != tree.levels())
        throw SpecError("make_dense: one gamma array per level required");
    Environment e;
    e.kind_ = Kind::dense;
    e.k_ = tree.levels();
    std::uint64_t count = 1;
    for (std::size_t j = 0; j < e.k_; ++j) {
        count *= tree.volumes[j];
        if (gamma_levels[j].size() != count)
            throw SpecError("make_dense: gamma array size mismatch at level " + std::to_string(j + 1));
        for (double g : gamma_levels[j])
            if (!(g > 0.0)) throw SpecError("make_dense: all gamma values must be positive");
    }
    e.tree_ = std::move(tree);
    e.gamma_ = std::move(gamma_levels);
    e.explicit_p_.resize(e.k_);
    return e;
}

Environment Environment::make_closed(std::vector<Form> forms) {
    if (forms.empty()) throw SpecError("make_closed: at least one level required");
    for (const Form& f : forms) {
        if (!(f.param > 0.0)) throw SpecError("make_closed: form parameter must be positive");
        if (f.cutoff < 1) throw SpecError("make_closed: cutoff must be >= 1");
    }
    Environment e;
    e.kind_ = Kind::closed_form;
    e.k_ = forms.size();
    e.forms_ = std::move(forms);
    return e;
}

void Environment::set_coin_params(std::size_t level, std::vector<double> p) {
    if (kind_ != Kind::dense) throw SpecError("explicit coin parameters require a dense environment");
    if (level < 1 || level >= k_) throw SpecError("coin parameters live on interior levels 1..k-1");
    if (p.size() != gamma_[level - 1].size())
        throw SpecError("coin parameter array size mismatch");
    for (double v : p)
        if (!(v > 0.0 && v < 1.0)) throw SpecError("coin parameters must lie in (0,1)");
    explicit_p_[level - 1] = std::move(p);
}

const TreeSpec& Environment::tree() const {
    if (kind_ != Kind::dense) throw SpecError("closed-form environment has no finite tree");
    return tree_;
}

const Environment::Form& Environment::form(std::size_t level) const {
    if (kind_ != Kind::closed_form) throw SpecError("dense environment has no closed form");
    if (level < 1 || level > k_) throw SpecError("level out of range");
    return forms_[level - 1];
}

std::uint64_t Environment::working_volume(std::size_t level) const {
    if (level < 1 || level > k_) throw SpecError("level out of range");
    if (kind_ == Kind::dense) return tree_.volumes[level - 1];
    std::uint64_t c = forms_[level - 1].cutoff;
    if (c == kUnbounded)
        throw SpecError("closed-form level " + std::to_string(level) + " has no cutoff; samplers need one");
    return c;
}

std::vector<std::uint64_t> Environment::working_volumes() const {
    std::vector<std::uint64_t> v(k_);
    for (std::size_t j = 1; j <= k_; ++j) v[j - 1] = working_volume(j);
    return v;
}

bool Environment::has_explicit_p(std::size_t level) const {
    return kind_ == Kind::dense && level >= 1 && level < k_ && !explicit_p_[level - 1].empty();
}

double Environment::gamma(std::size_t level, std::uint64_t parent_flat, Coord label) const {
    if (level < 1 || level > k_) throw SpecError("level out of range");
    if (label < 1) throw SpecError("labels start at 1");
    if (kind_ == Kind::closed_form) return form_eval(forms_[level - 1], label);
    const auto& arr = gamma_[level - 1];
    std::uint64_t idx = parent_flat * tree_.volumes[level - 1] + (label - 1);
    if (label > tree_.volumes[level - 1] || idx >= arr.size())
        throw SpecError("gamma lookup outside the tree");
    return arr[idx];
}

double Environment::gamma_at(const VertexAddress& addr) const {
    std::size_t j = addr.level();
    if (j < 1 || j > k_) throw SpecError("gamma_at: address level out of range");
    if (kind_ == Kind::dense && !addr.valid_in(tree_)) throw SpecError("gamma_at: address outside the tree");
    std::uint64_t parent = 0;
    if (kind_ == Kind::dense) parent = flat_index(tree_, addr.parent());
    return gamma(j, parent, addr.path.back());
}

double Environment::p_value(std::size_t level, std::uint64_t parent_flat, Coord label) const {
    if (level < 1 || level >= k_) throw SpecError("coin parameters live on levels 1..k-1");
    if (has_explicit_p(level)) {
        const auto& arr = explicit_p_[level - 1];
        std::uint64_t idx = parent_flat * tree_.volumes[level - 1] + (label - 1);
        if (idx >= arr.size()) throw SpecError("p lookup outside the tree");
        return arr[idx];
    }
    return gamma_to_p(gamma(level, parent_flat, label), working_volume(level + 1));
}

double Environment::p_at(const VertexAddress& addr) const {
    std::size_t j = addr.level();
    if (j < 1 || j >= k_) throw SpecError("p_at: address level out of range");
    std::uint64_t parent = 0;
    if (kind_ == Kind::dense) {
        if (!addr.valid_in(tree_)) throw SpecError("p_at: address outside the tree");
        parent = flat_index(tree_, addr.parent());
    }
    return p_value(j, parent, addr.path.back());
}

double Environment::gamma_bar(const VertexAddress& addr) const {
    std::size_t j = addr.level();
    if (j < 1 || j > k_) throw SpecError("gamma_bar: address level out of range");
    double prod = 1.0;
    VertexAddress prefix;
    for (std::size_t i = 0; i < j; ++i) {
        prefix.path.push_back(addr.path[i]);
        prod *= gamma_at(prefix);
    }
    return prod;
}

double Environment::form_sum_full(std::size_t level) const {
    const Form& f = form(level);
    switch (f.kind) {
        case FormKind::geometric:
            if (f.param <= 1.0) throw DivergenceError("geometric form with base <= 1 is not summable");
            return 1.0 / (f.param - 1.0);
        case FormKind::power:
            if (f.param <= 1.0) throw DivergenceError("power form with exponent <= 1 is not summable");
            return std::riemann_zeta(f.param);
    }
    throw SpecError("unknown closed form");
}

double Environment::form_sum_truncated(std::size_t level, std::uint64_t cutoff) const {
    const Form& f = form(level);
    if (cutoff == kUnbounded) return form_sum_full(level);
    if (cutoff < 1) return 0.0;
    switch (f.kind) {
        case FormKind::geometric: {
            double b = f.param;
            if (b == 1.0) return static_cast<double>(cutoff);
            // sum_{x=1}^{L} b^-x = (1 - b^-L) / (b - 1)
            return (1.0 - std::pow(b, -static_cast<double>(cutoff))) / (b - 1.0);
        }
        case FormKind::power: {
            double p = f.param;
            if (cutoff <= 10'000'000ULL) {
                double s = 0.0;
                for (std::uint64_t x = cutoff; x >= 1; --x) s += std::pow(static_cast<double>(x), -p);
                return s;
            }
            if (p <= 1.0) throw DivergenceError("power form truncated sum too long to add directly");
            return std::riemann_zeta(p) - power_tail(p, static_cast<double>(cutoff));
        }
    }
    throw SpecError("unknown closed form");
}

double Environment::sum_gamma_bar_level(std::size_t level) const {
    if (level < 1 || level > k_) throw SpecError("level out of range");
    if (kind_ == Kind::closed_form) {
        double prod = 1.0;
        for (std::size_t j = 1; j <= level; ++j)
            prod *= form_sum_truncated(j, forms_[j - 1].cutoff);
        return prod;
    }
    // Dense: one pass per level accumulating gamma_bar per prefix.
    std::vector<double> acc{1.0};
    for (std::size_t j = 1; j <= level; ++j) {
        std::uint64_t m = tree_.volumes[j - 1];
        const auto& arr = gamma_[j - 1];
        std::vector<double> next(acc.size() * m);
        for (std::size_t par = 0; par < acc.size(); ++par)
            for (std::uint64_t x = 0; x < m; ++x)
                next[par * m + x] = acc[par] * arr[par * m + x];
        acc = std::move(next);
    }
    double s = 0.0;
    for (double v : acc) s += v;
    return s;
}

double Environment::sum_gamma_bar_full_level(std::size_t level) const {
    if (kind_ != Kind::closed_form)
        throw SpecError("full-tree sums are defined for closed-form environments");
    if (level < 1 || level > k_) throw SpecError("level out of range");
    double prod = 1.0;
    for (std::size_t j = 1; j <= level; ++j) prod *= form_sum_full(j);
    return prod;
}

double Environment::tail_mass(std::span<const std::uint64_t> cutoffs) const {
    if (kind_ != Kind::closed_form)
        throw SpecError("tail_mass is defined for closed-form environments");
    if (cutoffs.size() != k_) throw SpecError("tail_mass: one cutoff per level required");
    double full = 1.0, inner = 1.0;
    for (std::size_t j = 1; j <= k_; ++j) {
        full *= form_sum_full(j); // throws DivergenceError when not summable
        inner *= form_sum_truncated(j, cutoffs[j - 1]);
    }
    double t = full - inner;
    return t > 0.0 ? t : 0.0;
}

GxDistribution gx_pmf(const VertexAddress& leaf, const Environment& env) {
    std::size_t k = env.levels();
    if (leaf.level() != k) throw SpecError("gx_pmf: a leaf address is required");
    // p_j along the ancestry, with the root convention p_0 = 0.
    std::vector<double> p(k, 0.0);
    VertexAddress prefix;
    for (std::size_t j = 1; j <= k - 1; ++j) {
        prefix.path.push_back(leaf.path[j - 1]);
        p[j] = env.p_at(prefix);
    }
    GxDistribution d;
    d.pmf.resize(k);
    // P(g = i) = (1 - p_i) * prod_{j=i+1}^{k-1} p_j, empty product = 1.
    double suffix = 1.0;
    for (std::size_t i = k; i-- > 0;) {
        d.pmf[i] = (1.0 - p[i]) * suffix;
        if (i > 0) suffix *= p[i];
    }
    return d;
}

} // namespace ktree
