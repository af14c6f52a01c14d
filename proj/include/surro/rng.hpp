#pragma once

#include <cstdint>
#include <string_view>

#include "surro/core.hpp"

namespace surro {

// finalizer of splitmix64; a decent 64-bit mixer on its own
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// 53-bit fraction in [0, 1)
inline double to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform01() { return to_unit(next()); }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // unbiased enough for our sizes; n must be > 0
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

    Vec point_in(const Box& box) {
        Vec p(box.dim());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = uniform(box.lo[i], box.hi[i]);
        return p;
    }
};

// hash accumulator: absorb words one by one, explicit byte order so results
// do not depend on the platform
inline std::uint64_t absorb(std::uint64_t h, std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
        h = mix64(h ^ ((word >> (8 * i)) & 0xffULL));
    }
    return h;
}

inline std::uint64_t absorb_label(std::uint64_t h, std::string_view label) {
    for (unsigned char c : label) h = mix64(h ^ c);
    return h;
}

// stable sub-stream seeds: distinct (label, index) pairs decorrelate
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index) {
    std::uint64_t h = mix64(master ^ 0x6a09e667f3bcc908ULL);
    h = absorb_label(h, label);
    h = absorb(h, index);
    return h;
}

// snap to a grid so that measurement hashing is insensitive to sub-quantum
// floating point wiggle
inline std::int64_t quantize(double x, double quantum) {
    return std::llround(x / quantum);
}

// n stratified samples per dimension, randomly paired across dimensions
inline std::vector<Vec> latin_hypercube(const Box& box, int n, Rng& rng) {
    const std::size_t d = box.dim();
    std::vector<std::vector<int>> perms(d);
    for (std::size_t j = 0; j < d; ++j) {
        perms[j].resize(n);
        for (int i = 0; i < n; ++i) perms[j][i] = i;
        for (int i = n - 1; i > 0; --i) {
            int k = static_cast<int>(rng.index(static_cast<std::size_t>(i + 1)));
            std::swap(perms[j][i], perms[j][k]);
        }
    }
    std::vector<Vec> pts(n, Vec(d));
    for (int i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double u = (perms[j][i] + rng.uniform01()) / n;
            pts[i][j] = box.lo[j] + u * (box.hi[j] - box.lo[j]);
        }
    }
    return pts;
}

}  // namespace surro
