#pragma once

#include <cstdint>
#include <cmath>
#include <deque>
#include <random>
#include <stdexcept>

namespace ktree {

// SplitMix64 finalizer, used for seed mixing and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based stream splitting: a child seed is a deterministic function of
// the master seed and an integer path (replica index, level, address, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(master ^ 0x6a09e667f3bcc909ULL);
    for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p));
    return s;
}

// Abstract draw source. Simulators consume randomness only through this
// interface so tests can inject scripted values for the forced-randomness
// checks. Each implementation defines all three primitives itself; there is
// no cross-call between them, so scripting one kind never consumes another.
struct RandomSource {
    virtual ~RandomSource() = default;
    virtual double uniform01() = 0;                        // strictly inside (0,1)
    virtual std::uint64_t uniform_int(std::uint64_t n) = 0; // uniform on {0,..,n-1}
    virtual double exponential(double mean) = 0;
};

// Production generator: mt19937_64 with fixed, documented transforms so that
// seeded runs are byte-identical across platforms and thread counts.
class Rng final : public RandomSource {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Top 53 bits, offset by half an ulp: never returns 0 or 1.
    double uniform01() override {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Unbiased via rejection.
    std::uint64_t uniform_int(std::uint64_t n) override {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
        if (n == 1) return 0;
        std::uint64_t x, r;
        do {
            x = next_u64();
            r = x % n;
        } while (x - r > std::uint64_t(-1) - (n - 1));
        return r;
    }

    double exponential(double mean) override {
        return -mean * std::log(uniform01());
    }

private:
    std::mt19937_64 gen_;
};

// Test hook: pops pre-loaded values instead of drawing. exponential(mean)
// scales a scripted mean-one value by `mean`.
class ScriptedSource final : public RandomSource {
public:
    std::deque<double> uniforms;
    std::deque<double> unit_exponentials;
    std::deque<std::uint64_t> ints;

    double uniform01() override { return pop(uniforms, "uniforms"); }
    std::uint64_t uniform_int(std::uint64_t) override {
        if (ints.empty()) throw std::runtime_error("ScriptedSource: ints exhausted");
        auto v = ints.front();
        ints.pop_front();
        return v;
    }
    double exponential(double mean) override { return mean * pop(unit_exponentials, "exponentials"); }

private:
    static double pop(std::deque<double>& q, const char* what) {
        if (q.empty()) throw std::runtime_error(std::string("ScriptedSource: ") + what + " exhausted");
        double v = q.front();
        q.pop_front();
        return v;
    }
};

} // namespace ktree
