#ifndef TOROIDAL_RATIONAL_HPP
#define TOROIDAL_RATIONAL_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <gmpxx.h>

namespace toroidal {

// Exact rational scalar. All oracle arithmetic is exact; no floating point.
using Rat = mpq_class;

inline std::string rat_to_string(const Rat& r) { return r.get_str(); }

inline Rat rat_of(long long v) { return Rat(static_cast<long>(v)); }

inline Rat rat_from_string(const std::string& s) {
    Rat r;
    if (r.set_str(s, 10) != 0)
        throw std::invalid_argument("not a rational: '" + s + "'");
    r.canonicalize();
    return r;
}

// Deterministic splitmix64 generator. The standard distributions are
// implementation-defined, so ranges are drawn by rejection below to keep
// traces byte-identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [lo, hi], inclusive
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw std::invalid_argument("empty range");
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do { x = next(); } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    // positive rational with numerator and denominator in [1, 97]
    Rat rational() {
        Rat r(range(1, 97), range(1, 97));
        r.canonicalize();
        return r;
    }

private:
    std::uint64_t state_;
};

}  // namespace toroidal

#endif
