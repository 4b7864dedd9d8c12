#pragma once

// Seeded instance generation.
//
// The generator is std::mt19937_64 (fully specified by the C++ standard).
// Distributions are implemented here rather than taken from <random> so the
// streams are identical across standard libraries:
//   uniform01: (raw >> 11) * 2^-53
//   normal:    Box-Muller on two uniforms, u1 mapped to (0,1] as 1 - uniform01
//              (no caching of the second variate)

#include <cstdint>
#include <random>

#include "ncmart/matcore.hpp"

namespace ncmart {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    double normal();
    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

// Entries i<j complex standard normal (real and imaginary parts N(0, 1/2)),
// diagonal real N(0, 1); upper triangle mirrored.
HermitianMatrix random_hermitian(Rng& rng, int dim);

// g* g with g having iid complex standard normal entries, divided by dim.
HermitianMatrix random_psd(Rng& rng, int dim);

// Diagonal matrix with iid |N(0,1)| entries.
HermitianMatrix random_psd_diagonal(Rng& rng, int dim);

}  // namespace ncmart
