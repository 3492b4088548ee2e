#include <doctest.h>

#include <cmath>
#include <vector>

#include "ktree/grem.hpp"
#include "ktree/stats.hpp"

using namespace ktree;

TEST_CASE("sample_tau via the inverse tail") {
    SUBCASE("forced uniforms") {
        ScriptedSource src;
        src.uniforms = {0.25, 1.0};
        auto spec = pareto_tail(0.5);
        auto tau = sample_tau(spec, 2, src);
        CHECK(tau[0] == 16.0); // u^-2 at u = 1/4
        CHECK(tau[1] == 1.0);  // left endpoint of the support
    }
    SUBCASE("tail frequency: P(tau > t) t^alpha -> 1") {
        auto spec = pareto_tail(0.5);
        Rng rng(1000003);
        const std::size_t n = 1'000'000;
        const double t = 1e3;
        std::size_t over = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (spec.tau_from_uniform(rng.uniform01()) > t) ++over;
        double p = std::pow(t, -0.5);
        double se = std::sqrt(p * (1.0 - p) / double(n));
        CHECK(std::abs(double(over) / double(n) - p) < 3.0 * se);
    }
    SUBCASE("invalid spec") {
        TailSpec bad{1.5, nullptr, nullptr};
        Rng rng(1);
        CHECK_THROWS_AS(sample_tau(bad, 1, rng), SpecError);
    }
}

TEST_CASE("order_relabel") {
    CHECK(order_relabel({3, 1, 2}) == std::vector<double>{3, 2, 1});
    CHECK(order_relabel({5}) == std::vector<double>{5});
    CHECK(order_relabel({2, 2, 1}) == std::vector<double>{2, 2, 1});
    CHECK_THROWS_AS(order_relabel({}), SpecError);
    // permutation property
    Rng rng(66);
    std::vector<double> v(50);
    for (double& x : v) x = rng.uniform01();
    auto sorted = order_relabel(v);
    CHECK(std::is_sorted(sorted.rbegin(), sorted.rend()));
    double s1 = 0, s2 = 0;
    for (double x : v) s1 += x;
    for (double x : sorted) s2 += x;
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-15));
}

TEST_CASE("scaling_constant closed forms and numeric inversion") {
    SUBCASE("Pareto closed form") {
        CHECK(scaling_constant(pareto_tail(0.5), 100) == doctest::Approx(1e-4).epsilon(1e-12));
        CHECK(scaling_constant(pareto_tail(0.5), 1) == 1.0);
        for (double a : {0.3, 0.5, 0.7})
            for (std::uint64_t m : {10ULL, 100ULL, 1000ULL})
                CHECK(scaling_constant(pareto_tail(a), m) ==
                      doctest::Approx(std::pow(double(m), -1.0 / a)).epsilon(1e-12));
    }
    SUBCASE("bisection on a custom tail matches the Pareto closed form") {
        TailSpec numeric{0.5, [](double t) { return t < 1.0 ? 1.0 : std::pow(t, -0.5); }, nullptr};
        for (std::uint64_t m : {3ULL, 10ULL, 47ULL})
            CHECK(scaling_constant(numeric, m) ==
                  doctest::Approx(std::pow(double(m), -2.0)).epsilon(1e-10));
    }
}

TEST_CASE("fine_tune_volumes") {
    SUBCASE("alpha = 0.5 chains squares") {
        std::vector<TailSpec> specs{pareto_tail(0.5), pareto_tail(0.5)};
        auto m = fine_tune_volumes(100, specs);
        REQUIRE(m.size() == 2);
        CHECK(m[0] == 100);
        CHECK(m[1] == 10'000);
        std::vector<TailSpec> three{pareto_tail(0.5), pareto_tail(0.5), pareto_tail(0.5)};
        auto m3 = fine_tune_volumes(100, three);
        CHECK(m3[2] == 100'000'000ULL);
    }
    SUBCASE("n = 1 keeps every volume at 1") {
        std::vector<TailSpec> specs{pareto_tail(0.3), pareto_tail(0.6), pareto_tail(0.9)};
        auto m = fine_tune_volumes(1, specs);
        CHECK(m == std::vector<std::uint64_t>{1, 1, 1});
    }
    SUBCASE("exact floors across the alpha grid") {
        for (double a : {0.3, 0.5, 0.7})
            for (std::uint64_t n : {10ULL, 100ULL, 1000ULL}) {
                std::vector<TailSpec> specs{pareto_tail(a), pareto_tail(a + 0.2)};
                auto m = fine_tune_volumes(n, specs);
                CHECK(m[1] == std::uint64_t(std::floor(std::pow(double(n), 1.0 / a))));
            }
    }
    SUBCASE("overflow is detected") {
        std::vector<TailSpec> specs{pareto_tail(0.3), pareto_tail(0.5), pareto_tail(0.7)};
        CHECK_THROWS_AS(fine_tune_volumes(1000, specs), OverflowError);
    }
}

TEST_CASE("build_grem_env structure") {
    std::vector<TailSpec> specs{pareto_tail(0.5), pareto_tail(0.75)};
    auto g = build_grem_env(10, specs, 12345);
    const TreeSpec& tree = g.env.tree();
    REQUIRE(tree.volumes.size() == 2);
    CHECK(tree.volumes[0] == 10);
    CHECK(tree.volumes[1] == 100);
    CHECK(g.speed_factor == g.c[1]);

    SUBCASE("per-parent depths are decreasing in the last coordinate") {
        for (std::uint64_t par = 0; par < 10; ++par)
            for (Coord x = 1; x < 100; ++x)
                CHECK(g.env.gamma(2, par, x) >= g.env.gamma(2, par, x + 1));
        for (Coord x = 1; x < 10; ++x) CHECK(g.env.gamma(1, 0, x) >= g.env.gamma(1, 0, x + 1));
    }
    SUBCASE("gamma = c tau and p = 1/(1+tau)") {
        for (Coord x = 1; x <= 10; ++x) {
            CHECK(g.env.gamma(1, 0, x) == g.c[0] * g.tau[0][x - 1]);
            CHECK(g.env.p_value(1, 0, x) == 1.0 / (1.0 + g.tau[0][x - 1]));
        }
    }
    SUBCASE("memory cap") {
        std::vector<TailSpec> deep{pareto_tail(0.3), pareto_tail(0.5)};
        CHECK_THROWS_AS(build_grem_env(10'000, deep, 1), MemoryCapError);
    }
}

TEST_CASE("p-consistency: derived coin parameters match 1/(1+tau) when 1/c is integral") {
    SUBCASE("power-of-two volumes make the identity bit-exact") {
        // M_1 = 16, alpha = 0.5: c_1 = 2^-8 and M_2 = 256, so M_2 c_1 = 1
        // and c_1 tau scales by a power of two.
        std::vector<TailSpec> specs{pareto_tail(0.5), pareto_tail(0.75)};
        auto g = build_grem_env(16, specs, 31415);
        REQUIRE(g.env.tree().volumes[1] == 256);
        for (Coord x = 1; x <= 16; ++x) {
            double via_gamma = gamma_to_p(g.env.gamma(1, 0, x), 256);
            CHECK(via_gamma == 1.0 / (1.0 + g.tau[0][x - 1]));
        }
    }
    SUBCASE("generic volumes agree to rounding") {
        std::vector<TailSpec> specs{pareto_tail(0.5), pareto_tail(0.75)};
        auto g = build_grem_env(10, specs, 31415);
        for (Coord x = 1; x <= 10; ++x) {
            double via_gamma = gamma_to_p(g.env.gamma(1, 0, x), g.env.tree().volumes[1]);
            CHECK(via_gamma == doctest::Approx(1.0 / (1.0 + g.tau[0][x - 1])).epsilon(1e-12));
        }
    }
}

TEST_CASE("scaled level-1 maximum approaches Frechet(alpha)") {
    // Reduced-size version of the acceptance check: KS distance against
    // exp(-y^-alpha) at n = 1e4 over 500 replicas.
    const double alpha = 0.5;
    std::vector<TailSpec> specs{pareto_tail(alpha)};
    const std::uint64_t n = 10'000;
    double c = scaling_constant(specs[0], n);
    std::vector<double> maxima(500);
    for (std::size_t r = 0; r < maxima.size(); ++r) {
        auto v = build_grem_env_virtual(n, specs, derive_seed(271828, {r}), 1);
        maxima[r] = c * v.levels[0].top_tau[0];
    }
    auto res = ks_test(maxima, [alpha](double y) {
        return y <= 0.0 ? 0.0 : std::exp(-std::pow(y, -alpha));
    });
    CHECK(res.statistic < 0.05);
}

TEST_CASE("virtual builder matches dense sums below the stream threshold") {
    std::vector<TailSpec> specs{pareto_tail(0.5), pareto_tail(0.75)};
    auto dense = build_grem_env(10, specs, 5555);
    auto virt = build_grem_env_virtual(10, specs, 5555, 4);
    REQUIRE(virt.levels.size() == 2);
    CHECK(virt.levels[0].exact_aggregates);
    CHECK(virt.levels[1].exact_aggregates);
    for (std::size_t j = 0; j < 2; ++j) {
        double dense_sum = 0.0;
        for (double v : dense.tau[j]) dense_sum += v;
        double virt_sum = virt.levels[j].level_gamma_sum() / virt.levels[j].c;
        CHECK(virt_sum == doctest::Approx(dense_sum).epsilon(1e-9));
    }
    // top blocks match the order statistics of the dense build per parent
    for (std::uint64_t par = 0; par < 10; ++par)
        for (std::size_t rank = 0; rank < 4; ++rank)
            CHECK(virt.levels[1].top(par, rank) ==
                  doctest::Approx(dense.tau[1][par * 100 + rank]).epsilon(1e-12));
}

TEST_CASE("virtual builder above the stream threshold: sane top blocks and aggregates") {
    std::vector<TailSpec> specs{pareto_tail(0.5), pareto_tail(2.0 / 3.0)};
    // force the approximate path with a tiny threshold
    auto v = build_grem_env_virtual(50, specs, 777, 8, /*stream_threshold=*/100);
    REQUIRE(v.levels.size() == 2);
    CHECK_FALSE(v.levels[1].exact_aggregates);
    const auto& lv = v.levels[1];
    for (std::uint64_t par = 0; par < lv.parents; ++par) {
        for (std::size_t rank = 1; rank < lv.top_count; ++rank)
            CHECK(lv.top(par, rank - 1) >= lv.top(par, rank));
        CHECK(lv.top(par, 0) >= 1.0);
        double rest = lv.rest_tau[par];
        double m = double(lv.volume - lv.top_count);
        CHECK(rest >= m * 1.0);
        CHECK(rest <= m * lv.top(par, lv.top_count - 1));
    }
}

TEST_CASE("coupled_envs closed form under forced unit exponentials") {
    // With S(x) = x and S(M+1) = M+1: hat gamma^(n)(x) = (x M/(M+1))^{-1/alpha}
    // and hat gamma(x) = x^{-1/alpha}; their ratio tends to 1 as M grows.
    const double alpha = 0.5;
    const std::uint64_t m = 40;
    double c = scaling_constant(pareto_tail(alpha), m);
    for (Coord x = 1; x <= 10; ++x) {
        double s_x = double(x), s_norm = double(m + 1);
        double finite = c * std::pow(s_x / s_norm, -1.0 / alpha);
        double expected = std::pow(double(x) * double(m) / double(m + 1), -1.0 / alpha);
        CHECK(finite == doctest::Approx(expected).epsilon(1e-12));
        double limit = std::pow(s_x, -1.0 / alpha);
        CHECK(finite / limit == doctest::Approx(std::pow(double(m) / double(m + 1), -2.0)).epsilon(1e-12));
    }
}

TEST_CASE("coupled environments are decreasing and converge along n") {
    std::vector<TailSpec> specs{pareto_tail(0.5)};
    SUBCASE("strict decrease in the last coordinate") {
        auto pair = coupled_envs(500, specs, 424242, 10);
        for (std::size_t x = 1; x < 10; ++x) {
            CHECK(pair.finite_env[0][x - 1] > pair.finite_env[0][x]);
            CHECK(pair.limit_env[0][x - 1] > pair.limit_env[0][x]);
        }
    }
    SUBCASE("top-label gap medians decrease along n (shared fields)") {
        const std::size_t reps = 100;
        std::vector<double> gaps_by_n[3];
        std::uint64_t ns[3] = {100, 1000, 10000};
        for (int which = 0; which < 3; ++which) {
            for (std::size_t r = 0; r < reps; ++r) {
                auto pair = coupled_envs(ns[which], specs, derive_seed(606, {r}), 10);
                double gap = 0.0;
                for (std::size_t x = 0; x < 10; ++x)
                    gap = std::max(gap, std::abs(pair.finite_env[0][x] - pair.limit_env[0][x]));
                gaps_by_n[which].push_back(gap);
            }
        }
        double m0 = median_of(gaps_by_n[0]);
        double m1 = median_of(gaps_by_n[1]);
        double m2 = median_of(gaps_by_n[2]);
        CHECK(m0 > m1);
        CHECK(m1 > m2);
    }
    SUBCASE("level-1 sums approach the matched truncation") {
        const std::size_t reps = 60;
        double med[3];
        std::uint64_t ns[3] = {100, 1000, 10000};
        for (int which = 0; which < 3; ++which) {
            std::vector<double> rel;
            for (std::size_t r = 0; r < reps; ++r) {
                auto pair = coupled_envs(ns[which], specs, derive_seed(607, {r}),
                                         /*top_labels=*/ns[which]);
                double sn = 0.0, sl = 0.0;
                for (std::uint64_t x = 0; x < ns[which]; ++x) {
                    sn += pair.finite_env[0][x];
                    sl += pair.limit_env[0][x];
                }
                rel.push_back(std::abs(sn - sl) / sl);
            }
            med[which] = median_of(rel);
        }
        CHECK(med[0] > med[1]);
        CHECK(med[1] > med[2]);
    }
}

TEST_CASE("large-deviation guard: S(M+1) <= 2M in at least 99% of replicas") {
    std::vector<TailSpec> specs{pareto_tail(0.5)};
    const std::uint64_t m = 10'000;
    const std::size_t reps = 400;
    std::size_t ok = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        auto pair = coupled_envs(m, specs, derive_seed(608, {r}), 2);
        if (pair.s_norm[0][0] <= 2.0 * double(m)) ++ok;
    }
    CHECK(double(ok) / double(reps) >= 0.99);
}
