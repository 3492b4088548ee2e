#include <doctest.h>

#include <cmath>
#include <vector>

#include "ktree/coin_sim.hpp"
#include "ktree/mark_sim.hpp"
#include "ktree/stats.hpp"

using namespace ktree;

namespace {

std::uint64_t leaf_flat(const TreeSpec& tree, std::span<const Coord> st) {
    return flat_index(tree, VertexAddress{{st.begin(), st.end()}});
}

} // namespace

TEST_CASE("clock process: steps, totals, inverse") {
    ClockProcess c;
    c.append(0.5, 2.0);
    c.append(1.0, 3.0);
    SUBCASE("cumulative structure") {
        CHECK(c.total() == 5.0);
        CHECK(c.value_at(0.25) == 0.0);
        CHECK(c.value_at(0.5) == 2.0);
        CHECK(c.value_at(0.75) == 2.0);
        CHECK(c.value_at(2.0) == 5.0);
    }
    SUBCASE("inverse hits the covering atom") {
        CHECK(invert_clock(c, 1.0) == 0.5);
        CHECK(invert_clock(c, 2.0) == 1.0); // Gamma(0.5) = 2 is not > 2
        CHECK(invert_clock(c, 0.0) == 0.5);
        CHECK_THROWS_AS(invert_clock(c, 5.0), HorizonExhausted);
        CHECK_THROWS_AS(invert_clock(c, 7.0), HorizonExhausted);
    }
    SUBCASE("empty clock") {
        ClockProcess e;
        CHECK(e.total() == 0.0);
        CHECK_THROWS_AS(invert_clock(e, 0.0), HorizonExhausted);
    }
}

TEST_CASE("build_clock with scripted randomness") {
    SUBCASE("single mark, gamma = 2, forced T = 1") {
        auto env = Environment::make_dense(make_tree({1}), {{2.0}});
        MarkStream s;
        s.level = 1;
        s.marks = {{0.7, 1, MarkKind::poisson, 0.0}};
        ScriptedSource src;
        src.unit_exponentials = {1.0};
        std::vector<std::uint64_t> parents{0};
        auto clock = build_clock(s, env, parents, src);
        REQUIRE(clock.size() == 1);
        CHECK(clock.position(0) == 0.7);
        CHECK(clock.weight(0) == 2.0);
        CHECK(clock.total() == 2.0);
        CHECK(s.marks[0].weight == 2.0);
    }
    SUBCASE("empty stream gives the zero clock") {
        auto env = Environment::make_dense(make_tree({1}), {{2.0}});
        MarkStream s;
        ScriptedSource src;
        auto clock = build_clock(s, env, {}, src);
        CHECK(clock.total() == 0.0);
    }
    SUBCASE("missing prefixes are rejected") {
        auto env = Environment::make_dense(make_tree({1}), {{2.0}});
        MarkStream s;
        s.marks = {{0.7, 1, MarkKind::poisson, 0.0}};
        ScriptedSource src;
        CHECK_THROWS_AS(build_clock(s, env, {}, src), SpecError);
    }
}

TEST_CASE("atom weights for a fixed (prefix,label) are exponential, KS n = 1e4") {
    auto env = Environment::make_dense(make_tree({1}), {{1.7}});
    Rng rng(404);
    MarkStream s;
    s.level = 1;
    const int n = 10'000;
    std::vector<std::uint64_t> parents(n, 0);
    for (int i = 0; i < n; ++i) s.marks.push_back({double(i), 1, MarkKind::poisson, 0.0});
    auto clock = build_clock(s, env, parents, rng);
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = clock.weight(i);
    auto res = ks_test(w, [](double t) { return -std::expm1(-t / 1.7); });
    CHECK(res.p_value > 0.001);
}

TEST_CASE("generate_marks_level: level-1 counts are Poisson(M r)") {
    const double r = 3.0;
    const std::uint64_t m = 4;
    const int reps = 20'000;
    std::vector<double> obs(40, 0.0);
    Rng rng(777);
    double mean = 0.0;
    for (int i = 0; i < reps; ++i) {
        std::vector<ConstancyInterval> window{{0.0, r, {}}};
        auto s = generate_marks_level(1, window, m, rng);
        for (const Mark& mk : s.marks) {
            CHECK(mk.kind == MarkKind::poisson); // level 1 has no extra marks
            CHECK(mk.label >= 1);
            CHECK(mk.label <= m);
        }
        mean += double(s.marks.size());
        obs[std::min<std::size_t>(s.marks.size(), 39)] += 1.0;
    }
    mean /= reps;
    double lambda = double(m) * r;
    CHECK(std::abs(mean - lambda) < 4.0 * std::sqrt(lambda / reps));
    std::vector<double> pmf(40, 0.0);
    double p = std::exp(-lambda), cum = 0.0;
    for (int i = 0; i < 39; ++i) {
        pmf[i] = p;
        cum += p;
        p *= lambda / (i + 1);
    }
    pmf[39] = 1.0 - cum;
    CHECK(chi_square_gof(obs, pmf).p_value > 0.001);
}

TEST_CASE("generate_marks_level: exactly one extra mark per interval, at its left end") {
    Rng rng(31);
    std::vector<ConstancyInterval> intervals{{0.0, 1.3, {}}, {1.3, 1.9, {}}, {2.5, 4.0, {}}};
    auto s = generate_marks_level(2, intervals, 3, rng);
    std::size_t extra_seen = 0;
    for (const Mark& m : s.marks) {
        if (m.kind == MarkKind::extra) {
            ++extra_seen;
            bool at_left = false;
            for (const auto& i : intervals) at_left |= (m.position == i.left);
            CHECK(at_left);
        }
    }
    CHECK(extra_seen == intervals.size());
    CHECK_THROWS_AS(
        generate_marks_level(2, std::vector<ConstancyInterval>{{0.0, 2.0, {}}, {1.0, 3.0, {}}}, 2, rng),
        SpecError);
}

TEST_CASE("per-interval Poisson-mark count is geometric with mean M gamma") {
    // Intervals of exponential(mean gamma) length, marks at rate M: the count
    // law is geometric from 0 with mean M gamma; mean within 3 SE and
    // variance within 5 SE at 1e4 intervals.
    const double gamma = 0.7;
    const std::uint64_t m = 5;
    const int n = 10'000;
    Rng len_rng(222), mark_rng(223);
    std::vector<double> counts(n);
    double extra_total = 0.0;
    for (int i = 0; i < n; ++i) {
        double len = len_rng.exponential(gamma);
        std::vector<ConstancyInterval> one{{0.0, len, {}}};
        auto s = generate_marks_level(2, one, m, mark_rng);
        double poisson = 0.0, extra = 0.0;
        for (const Mark& mk : s.marks) (mk.kind == MarkKind::extra ? extra : poisson) += 1.0;
        counts[i] = poisson;
        extra_total += extra;
        CHECK(extra == 1.0);
    }
    CHECK(extra_total == double(n));
    double mu = double(m) * gamma;
    double mean = mean_of(counts);
    double se_mean = sample_sd(counts) / std::sqrt(double(n));
    CHECK(std::abs(mean - mu) < 3.0 * se_mean);
    // geometric variance mu(1+mu); SE of the sample variance via fourth moments
    double var = 0.0, m4 = 0.0;
    for (double c : counts) {
        double d = c - mean;
        var += d * d;
        m4 += d * d * d * d;
    }
    var /= (n - 1.0);
    m4 /= n;
    double se_var = std::sqrt(std::max(0.0, m4 - var * var) / n);
    CHECK(std::abs(var - mu * (1.0 + mu)) < 5.0 * se_var);
}

TEST_CASE("labels are i.i.d. uniform (chi-square)") {
    Rng rng(99);
    std::vector<ConstancyInterval> window{{0.0, 2000.0, {}}};
    auto s = generate_marks_level(1, window, 6, rng);
    std::vector<double> counts(6, 0.0);
    for (const Mark& m : s.marks) counts[m.label - 1] += 1.0;
    std::vector<double> pmf(6, 1.0 / 6.0);
    CHECK(chi_square_gof(counts, pmf).p_value > 0.001);
}

TEST_CASE("constancy intervals tile the clock range and lengths are exponential") {
    auto env = Environment::make_dense(make_tree({2, 3}),
                                       {{0.8, 1.2}, {0.5, 1.0, 1.5, 0.7, 0.9, 1.1}});
    MarkHierarchy h(env, 1234);
    h.extend_axis(300.0);
    SUBCASE("single-atom example") {
        ClockProcess c;
        c.append(0.5, 2.0);
        std::vector<std::vector<Coord>> vals{{1}};
        auto iv = constancy_intervals(c, vals);
        REQUIRE(iv.size() == 1);
        CHECK(iv[0].left == 0.0);
        CHECK(iv[0].right == 2.0);
        CHECK(iv[0].value == std::vector<Coord>{1});
    }
    SUBCASE("tiling with no gaps or overlaps, both levels") {
        for (std::size_t level : {1, 2}) {
            auto iv = h.intervals(level);
            REQUIRE(!iv.empty());
            CHECK(iv.front().left == 0.0);
            for (std::size_t i = 1; i < iv.size(); ++i) CHECK(iv[i].left == iv[i - 1].right);
            CHECK(iv.back().right == h.clock(level).total());
        }
    }
    SUBCASE("jump-of-clock to interval bijection") {
        for (std::size_t level : {1, 2}) {
            auto iv = h.intervals(level);
            const ClockProcess& c = h.clock(level);
            REQUIRE(iv.size() == c.size()); // no degenerate intervals in this run
            for (std::size_t i = 0; i < iv.size(); ++i) {
                CHECK(iv[i].left == c.cum_before(i));
                CHECK(iv[i].right == c.cum(i));
            }
        }
    }
    SUBCASE("interval lengths per (prefix,label) pass KS against exp(gamma)") {
        auto iv = h.intervals(2);
        std::vector<double> lens;
        for (const auto& i : iv)
            if (i.value == std::vector<Coord>{1, 2}) lens.push_back(i.right - i.left);
        REQUIRE(lens.size() > 100);
        auto res = ks_test(lens, [](double t) { return -std::expm1(-t / 1.0); });
        CHECK(res.p_value > 0.001);
    }
}

TEST_CASE("simulate_mark: k=1 reduces to uniform labels with exp(gamma) holds") {
    auto env = Environment::make_dense(make_tree({3}), {{0.5, 1.0, 2.0}});
    auto traj = simulate_mark_jumps(env, 30'000, 555);
    std::vector<double> counts(3, 0.0);
    std::vector<std::vector<double>> holds(3);
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        counts[traj.state(i)[0] - 1] += 1.0;
        holds[traj.state(i)[0] - 1].push_back(traj.time(i + 1) - traj.time(i));
    }
    std::vector<double> pmf(3, 1.0 / 3.0);
    CHECK(chi_square_gof(counts, pmf).p_value > 0.001);
    const double gammas[3] = {0.5, 1.0, 2.0};
    for (int x = 0; x < 3; ++x) {
        double mean = gammas[x];
        CHECK(ks_test(holds[x], [mean](double t) { return -std::expm1(-t / mean); }).p_value > 0.001);
    }
}

TEST_CASE("simulate_mark horizon semantics: sojourns clipped at the horizon") {
    auto env = Environment::make_dense(make_tree({2}), {{1.0, 1.0}});
    auto traj = simulate_mark(env, 12.5, 808);
    CHECK(traj.horizon() == 12.5);
    CHECK(traj.time(traj.size() - 1) <= 12.5);
    double covered = 0.0;
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) covered += traj.time(i + 1) - traj.time(i);
    covered += 12.5 - traj.time(traj.size() - 1);
    CHECK(covered == doctest::Approx(12.5).epsilon(1e-12));
}

TEST_CASE("mark and coin jump chains have the same law (k=2, chi-square)") {
    auto env = Environment::make_dense(
        make_tree({2, 2}), {{0.6, 1.4}, {0.5, 1.2, 2.0, 0.8}});
    const std::size_t jumps = 100'000;
    Rng coin_rng(4242);
    auto coin = simulate_coin_jumps(env, VertexAddress{{1, 1}}, jumps, coin_rng);
    auto mark = simulate_mark_jumps(env, jumps, 4243);

    const TreeSpec& tree = env.tree();
    Matrix a(4, std::vector<double>(4, 0.0)), b(4, std::vector<double>(4, 0.0));
    for (std::size_t i = 0; i + 1 < coin.size(); ++i)
        a[leaf_flat(tree, coin.state(i))][leaf_flat(tree, coin.state(i + 1))] += 1.0;
    for (std::size_t i = 0; i + 1 < mark.size(); ++i)
        b[leaf_flat(tree, mark.state(i))][leaf_flat(tree, mark.state(i + 1))] += 1.0;
    auto res = chi_square_transitions(a, b);
    CHECK(res.p_value > 0.001);

    // holding times of the mark model per leaf against exp(gamma_2)
    std::vector<std::vector<double>> holds(4);
    for (std::size_t i = 0; i + 1 < mark.size(); ++i)
        holds[leaf_flat(tree, mark.state(i))].push_back(mark.time(i + 1) - mark.time(i));
    const double gammas[4] = {0.5, 1.2, 2.0, 0.8};
    for (int leaf = 0; leaf < 4; ++leaf) {
        double mean = gammas[leaf];
        CHECK(ks_test(holds[leaf], [mean](double t) { return -std::expm1(-t / mean); }).p_value >
              0.001);
    }
}

TEST_CASE("mark hierarchy determinism and lazy extension consistency") {
    auto env = Environment::make_dense(make_tree({2, 2}), {{0.6, 1.4}, {0.5, 1.2, 2.0, 0.8}});
    SUBCASE("same seed, same bytes") {
        CHECK(to_csv(simulate_mark(env, 30.0, 99)) == to_csv(simulate_mark(env, 30.0, 99)));
        CHECK(to_csv(simulate_mark(env, 30.0, 99)) != to_csv(simulate_mark(env, 30.0, 100)));
    }
    SUBCASE("extension appends without disturbing generated structure") {
        MarkHierarchy a(env, 321);
        a.extend_axis(5.0);
        std::vector<double> pos, w, cum;
        for (std::size_t i = 0; i < a.clock(2).size(); ++i) {
            pos.push_back(a.clock(2).position(i));
            w.push_back(a.clock(2).weight(i));
            cum.push_back(a.clock(2).cum(i));
        }
        a.extend_axis(20.0);
        REQUIRE(a.clock(2).size() > pos.size());
        for (std::size_t i = 0; i < pos.size(); ++i) {
            CHECK(a.clock(2).position(i) == pos[i]);
            CHECK(a.clock(2).weight(i) == w[i]);
            CHECK(a.clock(2).cum(i) == cum[i]);
        }
    }
    SUBCASE("same call pattern, same samples across engines") {
        MarkHierarchy a(env, 321), b(env, 321);
        a.extend_axis(5.0);
        a.extend_axis(20.0);
        b.extend_axis(5.0);
        b.extend_axis(20.0);
        REQUIRE(a.clock(2).size() == b.clock(2).size());
        for (std::size_t i = 0; i < a.clock(2).size(); ++i) {
            CHECK(a.clock(2).position(i) == b.clock(2).position(i));
            CHECK(a.clock(2).weight(i) == b.clock(2).weight(i));
        }
    }
}

TEST_CASE("theta composes the level clocks") {
    auto env = Environment::make_dense(make_tree({2, 2}), {{0.6, 1.4}, {0.5, 1.2, 2.0, 0.8}});
    MarkHierarchy h(env, 77);
    double r = 3.0;
    double theta = h.theta(r);
    double v = h.clock(1).value_at(r);
    CHECK(h.clock(2).value_at(v) == theta);
    CHECK(h.theta(0.0) == 0.0);
    double prev = 0.0;
    for (double rr : {0.5, 1.0, 2.0, 3.0, 5.0}) {
        double t = h.theta(rr);
        CHECK(t >= prev);
        prev = t;
    }
}
