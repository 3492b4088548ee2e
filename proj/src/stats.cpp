#include "ktree/stats.hpp"

#include <algorithm>
#include <cmath>

#include "ktree/errors.hpp"

namespace ktree {

namespace {

// Regularized upper incomplete gamma Q(a, x), series / continued fraction.
double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw SpecError("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // P(a,x) by series, return 1 - P.
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        double p = sum * std::exp(-x + a * std::log(x) - gln);
        return std::clamp(1.0 - p, 0.0, 1.0);
    }
    // Q(a,x) by Lentz continued fraction.
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    double q = std::exp(-x + a * std::log(x) - gln) * h;
    return std::clamp(q, 0.0, 1.0);
}

struct PooledCell {
    double obs_a = 0.0, obs_b = 0.0;
    double exp_a = 0.0, exp_b = 0.0;
};

} // namespace

double chi_square_tail(double x, double df) { return gamma_q(0.5 * df, 0.5 * x); }

double kolmogorov_tail(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        if (term < 1e-17) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult chi_square_gof(std::span<const double> counts, std::span<const double> pmf) {
    if (counts.size() != pmf.size() || counts.empty())
        throw SpecError("chi_square_gof: size mismatch");
    double n = 0.0;
    for (double c : counts) n += c;
    if (n <= 0.0) throw SpecError("chi_square_gof: degenerate (all-zero) counts");

    // Pool consecutive cells until the expected count reaches 5.
    std::vector<PooledCell> cells;
    PooledCell cur;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        cur.obs_a += counts[i];
        cur.exp_a += n * pmf[i];
        if (cur.exp_a >= 5.0) {
            cells.push_back(cur);
            cur = {};
        }
    }
    if (cur.exp_a > 0.0 || cur.obs_a > 0.0) {
        if (!cells.empty()) {
            cells.back().obs_a += cur.obs_a;
            cells.back().exp_a += cur.exp_a;
        } else {
            cells.push_back(cur);
        }
    }
    if (cells.size() < 2) return {0.0, 1.0};
    double stat = 0.0;
    for (const auto& c : cells)
        if (c.exp_a > 0.0) stat += (c.obs_a - c.exp_a) * (c.obs_a - c.exp_a) / c.exp_a;
    double df = static_cast<double>(cells.size()) - 1.0;
    return {stat, chi_square_tail(stat, df)};
}

TestResult chi_square_counts(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw SpecError("chi_square_counts: size mismatch");
    double na = 0.0, nb = 0.0;
    for (double v : a) na += v;
    for (double v : b) nb += v;
    if (na <= 0.0 || nb <= 0.0) throw SpecError("chi_square_counts: degenerate counts");
    double n = na + nb;

    std::vector<PooledCell> cells;
    PooledCell cur;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double col = a[i] + b[i];
        cur.obs_a += a[i];
        cur.obs_b += b[i];
        cur.exp_a += na * col / n;
        cur.exp_b += nb * col / n;
        if (cur.exp_a >= 5.0 && cur.exp_b >= 5.0) {
            cells.push_back(cur);
            cur = {};
        }
    }
    if (cur.exp_a > 0.0 || cur.exp_b > 0.0) {
        if (!cells.empty()) {
            cells.back().obs_a += cur.obs_a;
            cells.back().obs_b += cur.obs_b;
            cells.back().exp_a += cur.exp_a;
            cells.back().exp_b += cur.exp_b;
        } else {
            cells.push_back(cur);
        }
    }
    if (cells.size() < 2) return {0.0, 1.0};
    double stat = 0.0;
    for (const auto& c : cells) {
        if (c.exp_a > 0.0) stat += (c.obs_a - c.exp_a) * (c.obs_a - c.exp_a) / c.exp_a;
        if (c.exp_b > 0.0) stat += (c.obs_b - c.exp_b) * (c.obs_b - c.exp_b) / c.exp_b;
    }
    double df = static_cast<double>(cells.size()) - 1.0;
    return {stat, chi_square_tail(stat, df)};
}

namespace {

// A transition-count matrix is multinomial only row by row (given the row
// totals), so matrices are compared with per-row tests whose statistics and
// degrees of freedom add. Statistic and df of one pooled comparison:
struct StatDf {
    double stat = 0.0;
    double df = 0.0;
};

StatDf gof_row(std::span<const double> counts, std::span<const double> pmf) {
    double n = 0.0, mass = 0.0;
    for (double c : counts) n += c;
    for (double p : pmf) mass += p;
    if (n <= 0.0 || mass <= 0.0) return {};
    std::vector<PooledCell> cells;
    PooledCell cur;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        cur.obs_a += counts[i];
        cur.exp_a += n * pmf[i] / mass; // row pmf normalized to a conditional
        if (cur.exp_a >= 5.0) {
            cells.push_back(cur);
            cur = {};
        }
    }
    if (cur.exp_a > 0.0 || cur.obs_a > 0.0) {
        if (!cells.empty()) {
            cells.back().obs_a += cur.obs_a;
            cells.back().exp_a += cur.exp_a;
        } else {
            cells.push_back(cur);
        }
    }
    if (cells.size() < 2) return {};
    StatDf out;
    for (const auto& c : cells)
        if (c.exp_a > 0.0) out.stat += (c.obs_a - c.exp_a) * (c.obs_a - c.exp_a) / c.exp_a;
    out.df = static_cast<double>(cells.size()) - 1.0;
    return out;
}

StatDf homogeneity_row(std::span<const double> a, std::span<const double> b) {
    double na = 0.0, nb = 0.0;
    for (double v : a) na += v;
    for (double v : b) nb += v;
    if (na <= 0.0 || nb <= 0.0) return {};
    double n = na + nb;
    std::vector<PooledCell> cells;
    PooledCell cur;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double col = a[i] + b[i];
        cur.obs_a += a[i];
        cur.obs_b += b[i];
        cur.exp_a += na * col / n;
        cur.exp_b += nb * col / n;
        if (cur.exp_a >= 5.0 && cur.exp_b >= 5.0) {
            cells.push_back(cur);
            cur = {};
        }
    }
    if (cur.exp_a > 0.0 || cur.exp_b > 0.0) {
        if (!cells.empty()) {
            cells.back().obs_a += cur.obs_a;
            cells.back().obs_b += cur.obs_b;
            cells.back().exp_a += cur.exp_a;
            cells.back().exp_b += cur.exp_b;
        } else {
            cells.push_back(cur);
        }
    }
    if (cells.size() < 2) return {};
    StatDf out;
    for (const auto& c : cells) {
        if (c.exp_a > 0.0) out.stat += (c.obs_a - c.exp_a) * (c.obs_a - c.exp_a) / c.exp_a;
        if (c.exp_b > 0.0) out.stat += (c.obs_b - c.exp_b) * (c.obs_b - c.exp_b) / c.exp_b;
    }
    out.df = static_cast<double>(cells.size()) - 1.0;
    return out;
}

} // namespace

TestResult chi_square_transitions(const Matrix& counts_a, const Matrix& counts_b) {
    if (counts_a.size() != counts_b.size() || counts_a.empty())
        throw SpecError("chi_square_transitions: dimension mismatch");
    StatDf total;
    double grand = 0.0;
    for (std::size_t r = 0; r < counts_a.size(); ++r) {
        if (counts_a[r].size() != counts_b[r].size())
            throw SpecError("chi_square_transitions: dimension mismatch");
        for (double v : counts_a[r]) grand += v;
        for (double v : counts_b[r]) grand += v;
        auto row = homogeneity_row(counts_a[r], counts_b[r]);
        total.stat += row.stat;
        total.df += row.df;
    }
    if (grand <= 0.0) throw SpecError("chi_square_transitions: degenerate (all-zero) inputs");
    if (total.df < 1.0) return {0.0, 1.0};
    return {total.stat, chi_square_tail(total.stat, total.df)};
}

TestResult chi_square_transitions_vs_pmf(const Matrix& counts, const Matrix& pmf) {
    if (counts.size() != pmf.size() || counts.empty())
        throw SpecError("chi_square_transitions: dimension mismatch");
    StatDf total;
    double grand = 0.0;
    for (std::size_t r = 0; r < counts.size(); ++r) {
        if (counts[r].size() != pmf[r].size())
            throw SpecError("chi_square_transitions: dimension mismatch");
        for (double v : counts[r]) grand += v;
        auto row = gof_row(counts[r], pmf[r]);
        total.stat += row.stat;
        total.df += row.df;
    }
    if (grand <= 0.0) throw SpecError("chi_square_transitions: degenerate (all-zero) inputs");
    if (total.df < 1.0) return {0.0, 1.0};
    return {total.stat, chi_square_tail(total.stat, total.df)};
}

TestResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf) {
    if (samples.size() < 8) throw SpecError("ks_test: at least 8 samples required");
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double f = cdf(xs[i]);
        d = std::max(d, std::max((static_cast<double>(i) + 1.0) / n - f,
                                 f - static_cast<double>(i) / n));
    }
    double sq = std::sqrt(n);
    double lambda = (sq + 0.12 + 0.11 / sq) * d;
    return {d, kolmogorov_tail(lambda)};
}

TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 8 || b.size() < 8) throw SpecError("ks_two_sample: at least 8 samples each");
    std::vector<double> xa(a.begin(), a.end()), xb(b.begin(), b.end());
    std::sort(xa.begin(), xa.end());
    std::sort(xb.begin(), xb.end());
    double na = static_cast<double>(xa.size()), nb = static_cast<double>(xb.size());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < xa.size() && j < xb.size()) {
        double x = std::min(xa[i], xb[j]);
        while (i < xa.size() && xa[i] <= x) ++i;
        while (j < xb.size() && xb[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    double ne = na * nb / (na + nb);
    double sq = std::sqrt(ne);
    double lambda = (sq + 0.12 + 0.11 / sq) * d;
    return {d, kolmogorov_tail(lambda)};
}

double mean_of(std::span<const double> xs) {
    if (xs.empty()) throw SpecError("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
    if (xs.size() < 2) throw SpecError("sample sd needs n >= 2");
    double m = mean_of(xs), s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / (static_cast<double>(xs.size()) - 1.0));
}

double median_of(std::vector<double> xs) {
    if (xs.empty()) throw SpecError("median of empty sample");
    std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
    double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    std::nth_element(xs.begin(), xs.begin() + mid - 1, xs.begin() + mid);
    return 0.5 * (hi + xs[mid - 1]);
}

} // namespace ktree
