#include "ncmart/random.hpp"

#include <cmath>
#include <numbers>

namespace ncmart {

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)) % n;
}

HermitianMatrix random_hermitian(Rng& rng, int dim) {
    CMatrix m = CMatrix::Zero(dim, dim);
    const double s = std::sqrt(0.5);
    for (int i = 0; i < dim; ++i) {
        m(i, i) = rng.normal();
        for (int j = i + 1; j < dim; ++j) {
            const double re = s * rng.normal();
            const double im = s * rng.normal();
            m(i, j) = Complex(re, im);
            m(j, i) = Complex(re, -im);
        }
    }
    return HermitianMatrix(m);
}

HermitianMatrix random_psd(Rng& rng, int dim) {
    CMatrix g(dim, dim);
    const double s = std::sqrt(0.5);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = Complex(s * rng.normal(), s * rng.normal());
    return HermitianMatrix::symmetrized(g.adjoint() * g / static_cast<double>(dim));
}

HermitianMatrix random_psd_diagonal(Rng& rng, int dim) {
    RVector d(dim);
    for (int i = 0; i < dim; ++i) d[i] = std::abs(rng.normal());
    return HermitianMatrix::diagonal(d);
}

}  // namespace ncmart
