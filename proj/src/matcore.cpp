#include "ncmart/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ncmart/error.hpp"

namespace ncmart {

HermitianMatrix::HermitianMatrix(int dim) {
    if (dim < 1) throw ParameterError("HermitianMatrix: dimension must be >= 1");
    m_ = CMatrix::Zero(dim, dim);
}

HermitianMatrix::HermitianMatrix(const CMatrix& m) {
    if (m.rows() != m.cols() || m.rows() < 1)
        throw ParameterError("HermitianMatrix: expected a non-empty square matrix");
    const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol) {
        std::ostringstream os;
        os << "HermitianMatrix: conjugate symmetry violated by " << asym;
        throw ParameterError(os.str());
    }
    m_ = 0.5 * (m + m.adjoint());
}

HermitianMatrix HermitianMatrix::symmetrized(const CMatrix& m) {
    return HermitianMatrix(CMatrix(0.5 * (m + m.adjoint())), Unchecked{});
}

HermitianMatrix HermitianMatrix::identity(int dim) {
    return HermitianMatrix(CMatrix(CMatrix::Identity(dim, dim)), Unchecked{});
}

HermitianMatrix HermitianMatrix::diagonal(const RVector& diag) {
    CMatrix m = CMatrix::Zero(diag.size(), diag.size());
    for (Eigen::Index i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return HermitianMatrix(std::move(m), Unchecked{});
}

HermitianMatrix HermitianMatrix::scalar(double value, int dim) {
    return HermitianMatrix(CMatrix(value * CMatrix::Identity(dim, dim)), Unchecked{});
}

HermitianMatrix& HermitianMatrix::operator+=(const HermitianMatrix& o) {
    m_ += o.m_;
    return *this;
}

HermitianMatrix& HermitianMatrix::operator-=(const HermitianMatrix& o) {
    m_ -= o.m_;
    return *this;
}

HermitianMatrix& HermitianMatrix::operator*=(double s) {
    m_ *= s;
    return *this;
}

HermitianMatrix HermitianMatrix::sandwich(const HermitianMatrix& a, const HermitianMatrix& b) {
    return symmetrized(a.m_ * b.m_ * a.m_);
}

bool Interval::contains(double t) const {
    const bool above = std::isinf(lo) ? true : (lo_closed ? t >= lo : t > lo);
    const bool under = std::isinf(hi) ? true : (hi_closed ? t <= hi : t < hi);
    return above && under;
}

SpectralDecomposition eigh(const HermitianMatrix& x) {
    const CMatrix& m = x.matrix();
    if (!m.allFinite()) throw ParameterError("eigh: non-finite entries");
    SpectralDecomposition out;
    if (m.rows() == 1) {
        out.eigenvalues = RVector::Constant(1, m(0, 0).real());
        out.eigenvectors = CMatrix::Identity(1, 1);
        return out;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(m);
    out.eigenvalues = solver.eigenvalues();
    out.eigenvectors = solver.eigenvectors();
    return out;
}

namespace {

HermitianMatrix assemble(const SpectralDecomposition& s, const RVector& values) {
    const CMatrix& u = s.eigenvectors;
    return HermitianMatrix::symmetrized(u * values.cast<Complex>().asDiagonal() * u.adjoint());
}

}  // namespace

HermitianMatrix spectral_projection(const HermitianMatrix& x, const Interval& b) {
    const SpectralDecomposition s = eigh(x);
    RVector ind(s.eigenvalues.size());
    for (Eigen::Index i = 0; i < ind.size(); ++i) ind[i] = b.contains(s.eigenvalues[i]) ? 1.0 : 0.0;
    return assemble(s, ind);
}

HermitianMatrix func_calc(const HermitianMatrix& x, const std::function<double(double)>& f) {
    const SpectralDecomposition s = eigh(x);
    RVector values(s.eigenvalues.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        values[i] = f(s.eigenvalues[i]);
        if (!std::isfinite(values[i])) {
            std::ostringstream os;
            os << "func_calc: function undefined at eigenvalue " << s.eigenvalues[i];
            throw DomainError(os.str());
        }
    }
    return assemble(s, values);
}

HermitianMatrix matrix_power(const HermitianMatrix& x, double e) {
    const SpectralDecomposition s = eigh(x);
    const double scale = std::max(1.0, s.eigenvalues.cwiseAbs().maxCoeff());
    RVector values(s.eigenvalues.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        double t = s.eigenvalues[i];
        if (t < 0.0) {
            if (t < -1e-12 * scale) throw DomainError("matrix_power: negative eigenvalue");
            t = 0.0;
        }
        if (t == 0.0) {
            if (e < 0.0) throw DomainError("matrix_power: negative power of a singular matrix");
            values[i] = (e == 0.0) ? 1.0 : 0.0;
        } else {
            values[i] = std::pow(t, e);
        }
    }
    return assemble(s, values);
}

double lambda_min(const HermitianMatrix& x) { return eigh(x).eigenvalues[0]; }

double lambda_max(const HermitianMatrix& x) {
    const RVector ev = eigh(x).eigenvalues;
    return ev[ev.size() - 1];
}

double operator_norm(const HermitianMatrix& x) {
    if (x.dim() == 1) return std::abs(x(0, 0).real());
    return eigh(x).eigenvalues.cwiseAbs().maxCoeff();
}

bool loewner_leq(const HermitianMatrix& a, const HermitianMatrix& b, double tol) {
    if (a.dim() != b.dim()) throw ParameterError("loewner_leq: dimension mismatch");
    const double slack = tol * (operator_norm(a) + operator_norm(b));
    return lambda_min(b - a) >= -slack;
}

double schatten_norm(const HermitianMatrix& x, double p) {
    if (!(p >= 1.0)) throw ParameterError("schatten_norm: p must be >= 1");
    const RVector ev = eigh(x).eigenvalues.cwiseAbs();
    if (std::isinf(p)) return ev.maxCoeff();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) acc += std::pow(ev[i], p);
    return std::pow(acc, 1.0 / p);
}

HermitianMatrix positive_part(const HermitianMatrix& x) {
    return func_calc(x, [](double t) { return t > 0.0 ? t : 0.0; });
}

double commutator_norm(const HermitianMatrix& a, const HermitianMatrix& b) {
    return (a.matrix() * b.matrix() - b.matrix() * a.matrix()).norm();
}

double frobenius_distance(const HermitianMatrix& a, const HermitianMatrix& b) {
    return (a.matrix() - b.matrix()).norm();
}

}  // namespace ncmart
