#pragma once

// Dense Hermitian linear algebra on small blocks: eigendecomposition,
// functional calculus, spectral projections, Loewner order and Schatten norms.
//
// Matrices are small (d <= 16) and dense. Every composite operation that
// produces a Hermitian result re-symmetrizes it as (x + x*)/2.

#include <complex>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace ncmart {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

class HermitianMatrix {
public:
    // Absolute tolerance on |x_ij - conj(x_ji)| accepted by the checked constructor.
    static constexpr double kSymmetryTol = 1e-12;

    HermitianMatrix() : HermitianMatrix(1) {}
    explicit HermitianMatrix(int dim);

    // Validates conjugate symmetry (throws ParameterError beyond kSymmetryTol),
    // then stores the symmetrized matrix.
    explicit HermitianMatrix(const CMatrix& m);

    // Stores (m + m*)/2 without validation. Use for results of arithmetic
    // whose Hermitian-ness is known up to rounding.
    static HermitianMatrix symmetrized(const CMatrix& m);

    static HermitianMatrix identity(int dim);
    static HermitianMatrix zero(int dim) { return HermitianMatrix(dim); }
    static HermitianMatrix diagonal(const RVector& diag);
    static HermitianMatrix scalar(double value, int dim = 1);

    int dim() const { return static_cast<int>(m_.rows()); }
    const CMatrix& matrix() const { return m_; }
    Complex operator()(int i, int j) const { return m_(i, j); }

    double trace() const { return m_.trace().real(); }

    HermitianMatrix& operator+=(const HermitianMatrix& o);
    HermitianMatrix& operator-=(const HermitianMatrix& o);
    HermitianMatrix& operator*=(double s);

    friend HermitianMatrix operator+(HermitianMatrix a, const HermitianMatrix& b) { return a += b; }
    friend HermitianMatrix operator-(HermitianMatrix a, const HermitianMatrix& b) { return a -= b; }
    friend HermitianMatrix operator*(HermitianMatrix a, double s) { return a *= s; }
    friend HermitianMatrix operator*(double s, HermitianMatrix a) { return a *= s; }

    // a*b*a, symmetrized. Hermitian whenever a and b are.
    static HermitianMatrix sandwich(const HermitianMatrix& a, const HermitianMatrix& b);

private:
    struct Unchecked {};
    HermitianMatrix(CMatrix m, Unchecked) : m_(std::move(m)) {}

    CMatrix m_;
};

struct SpectralDecomposition {
    RVector eigenvalues;  // ascending
    CMatrix eigenvectors; // columns, unitary
};

// Real interval with caller-declared endpoint closure. Infinite endpoints are
// allowed; closure flags on infinite endpoints are ignored.
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_closed = true;
    bool hi_closed = true;

    bool contains(double t) const;

    static Interval closed(double lo, double hi) { return {lo, hi, true, true}; }
    static Interval half_open(double lo, double hi) { return {lo, hi, true, false}; }
    static Interval real_line() { return {}; }
    static Interval at_least(double lo) { return {lo, std::numeric_limits<double>::infinity(), true, true}; }
    static Interval below(double hi) { return {-std::numeric_limits<double>::infinity(), hi, true, false}; }
};

SpectralDecomposition eigh(const HermitianMatrix& x);

// Sum of eigenprojectors whose eigenvalue lies in b.
HermitianMatrix spectral_projection(const HermitianMatrix& x, const Interval& b);

// U diag(f(lambda)) U*. Throws DomainError if f returns a non-finite value.
HermitianMatrix func_calc(const HermitianMatrix& x, const std::function<double(double)>& f);

// Power t^e on the spectrum. Negative eigenvalues (beyond -1e-12 * scale) are a
// domain error; tiny negatives are clamped to 0. Negative e at 0 is a domain error.
HermitianMatrix matrix_power(const HermitianMatrix& x, double e);

// a <= b in the Loewner order, relative tolerance tol * (||a|| + ||b||).
bool loewner_leq(const HermitianMatrix& a, const HermitianMatrix& b, double tol = 1e-9);

double lambda_min(const HermitianMatrix& x);
double lambda_max(const HermitianMatrix& x);
double operator_norm(const HermitianMatrix& x);

// Unnormalized trace norm (sum |lambda|^p)^(1/p); p = +inf gives the operator norm.
double schatten_norm(const HermitianMatrix& x, double p);

HermitianMatrix positive_part(const HermitianMatrix& x);

// Frobenius norm of the commutator ab - ba.
double commutator_norm(const HermitianMatrix& a, const HermitianMatrix& b);

// Frobenius distance ||a - b||_F.
double frobenius_distance(const HermitianMatrix& a, const HermitianMatrix& b);

}  // namespace ncmart
