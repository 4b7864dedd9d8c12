#include "ncmart/doob.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "ncmart/detail/kahan.hpp"
#include "ncmart/detail/parallel.hpp"
#include "ncmart/error.hpp"

namespace ncmart {

PositiveSeq::PositiveSeq(std::vector<OpStepFunction> t, double tol) : terms(std::move(t)) {
    if (terms.empty()) throw ParameterError("PositiveSeq: need at least one term");
    for (const auto& x : terms) {
        if (x.filtration->breakpoints() != terms.front().filtration->breakpoints() || x.dim() != terms.front().dim())
            throw ParameterError("PositiveSeq: terms live on different grids or dimensions");
        for (const auto& v : x.values) {
            if (lambda_min(v) < -tol * std::max(1.0, operator_norm(v)))
                throw ParameterError("PositiveSeq: term is not positive semidefinite");
        }
    }
}

PositiveSeq PositiveSeq::from_martingale(const MartingaleSeq& m) { return PositiveSeq(m.terms); }

OpStepFunction PositiveSeq::sum() const {
    OpStepFunction s = terms.front();
    for (std::size_t n = 1; n < terms.size(); ++n) s = s + terms[n];
    return s;
}

OpStepFunction dual_doob_apply(const PositiveSeq& a) {
    const int J = a.filtration()->depth();
    if (a.depth() > J) throw ParameterError("dual_doob_apply: more terms than filtration levels");
    OpStepFunction s = cond_exp(a.terms.front(), 0);
    for (int n = 1; n <= a.depth(); ++n) s = s + cond_exp(a.terms[n], n);
    return s;
}

double dual_doob_ratio(const PositiveSeq& a, double p, const Weight& w) {
    if (!(p >= 1.0)) throw ParameterError("dual_doob_ratio: p must be >= 1");
    const double den = weighted_lp_norm(a.sum(), p, w);
    if (!(den > 0.0)) throw DomainError("dual_doob_ratio: undefined for a zero sequence");
    return weighted_lp_norm(dual_doob_apply(a), p, w) / den;
}

namespace {

using Eigen::SelfAdjointEigenSolver;

struct Eig {
    RVector values;
    CMatrix vectors;
};

Eig eig(const CMatrix& m) {
    SelfAdjointEigenSolver<CMatrix> es(m);
    return {es.eigenvalues(), es.eigenvectors()};
}

CMatrix herm(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }

template <class F>
CMatrix apply_fn(const Eig& e, F f) {
    RVector v(e.values.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f(e.values[i]);
    return herm(e.vectors * v.asDiagonal() * e.vectors.adjoint());
}

CMatrix psd_part(const CMatrix& m) {
    return apply_fn(eig(m), [](double t) { return std::max(t, 0.0); });
}

double objective(const CMatrix& a, double p) {
    const auto e = eig(a);
    double s = 0.0;
    for (Eigen::Index i = 0; i < e.values.size(); ++i) s += std::pow(std::max(e.values[i], 0.0), p);
    return s;
}

CMatrix gradient(const CMatrix& a, double p) {
    return apply_fn(eig(a), [p](double t) { return p * std::pow(std::max(t, 0.0), p - 1.0); });
}

double min_eig(const CMatrix& m) { return eig(m).values[0]; }

struct CellSolution {
    CMatrix a;
    std::vector<CMatrix> y;  // y_n with sum y_n approximately a^{p-1}
    int iterations = 0;
    bool cap = false;
};

bool is_diagonal(const CMatrix& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (std::abs(m(i, i).imag()) > 1e-14 * scale) return false;
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (i != j && std::abs(m(i, j)) > 1e-14 * scale) return false;
    }
    return true;
}

class CellSolver {
public:
    CellSolver(std::vector<CMatrix> x, double p, const LinfOptions& o) : x_(std::move(x)), p_(p), o_(o) {
        d_ = static_cast<int>(x_.front().rows());
    }

    CellSolution solve() {
        if (o_.exact_special_cases) {
            if (auto s = diagonal_case()) return *s;
            if (auto s = dominated_case()) return *s;
        }
        return o_.method == LinfMethod::barrier ? barrier() : projected_gradient();
    }

private:
    std::optional<CellSolution> diagonal_case() const {
        for (const auto& m : x_)
            if (!is_diagonal(m)) return std::nullopt;
        CellSolution s;
        s.a = CMatrix::Zero(d_, d_);
        s.y.assign(x_.size(), CMatrix::Zero(d_, d_));
        for (int i = 0; i < d_; ++i) {
            std::size_t best = 0;
            for (std::size_t n = 1; n < x_.size(); ++n)
                if (x_[n](i, i).real() > x_[best](i, i).real()) best = n;
            const double v = std::max(x_[best](i, i).real(), 0.0);
            s.a(i, i) = v;
            s.y[best](i, i) = std::pow(v, p_ - 1.0);
        }
        return s;
    }

    std::optional<CellSolution> dominated_case() const {
        for (std::size_t k = 0; k < x_.size(); ++k) {
            bool dominates = true;
            for (std::size_t n = 0; n < x_.size() && dominates; ++n) {
                if (n == k) continue;
                const double scale = std::max(1.0, x_[k].cwiseAbs().maxCoeff() + x_[n].cwiseAbs().maxCoeff());
                dominates = min_eig(x_[k] - x_[n]) >= -1e-14 * scale;
            }
            if (!dominates) continue;
            CellSolution s;
            s.a = x_[k];
            s.y.assign(x_.size(), CMatrix::Zero(d_, d_));
            const auto pk = psd_part(x_[k]);
            s.y[k] = apply_fn(eig(pk), [this](double t) { return std::pow(std::max(t, 0.0), p_ - 1.0); });
            s.a = pk;
            return s;
        }
        return std::nullopt;
    }

    // Projects u onto the intersection of {a >= x_n}; e holds the Dykstra
    // increments (u - result = sum e_n) and is used as a warm start.
    CMatrix project(const CMatrix& u, std::vector<CMatrix>& e) const {
        CMatrix x = u;
        for (const auto& en : e) x -= en;
        const double scale = 1.0 + u.norm();
        for (int it = 0; it < o_.dykstra_max_iter; ++it) {
            double change = 0.0;
            for (std::size_t n = 0; n < x_.size(); ++n) {
                const CMatrix v = x + e[n];
                const CMatrix y = x_[n] + psd_part(v - x_[n]);
                const CMatrix en = v - y;
                change += (en - e[n]).squaredNorm();
                e[n] = en;
                x = y;
            }
            if (std::sqrt(change) <= o_.dykstra_tol * scale) break;
        }
        return x;
    }

    CellSolution projected_gradient() const {
        CellSolution s;
        double lam = 0.0;
        for (const auto& m : x_) lam = std::max(lam, eig(m).values[d_ - 1]);
        s.y.assign(x_.size(), CMatrix::Zero(d_, d_));
        if (!(lam > 0.0)) {
            s.a = CMatrix::Zero(d_, d_);
            return s;
        }
        CMatrix a = lam * CMatrix::Identity(d_, d_);
        double f = objective(a, p_);
        double eta = 1.0 / (p_ * std::max(p_ - 1.0, 0.5) * std::pow(lam, p_ - 2.0));
        std::vector<CMatrix> e(x_.size(), CMatrix::Zero(d_, d_));
        double eta_e = eta;
        int it = 0;
        for (; it < o_.max_iter; ++it) {
            const CMatrix g = gradient(a, p_);
            bool accepted = false;
            CMatrix cand;
            double fc = f;
            std::vector<CMatrix> et;
            for (int bt = 0; bt < 60; ++bt) {
                et = e;
                for (auto& m : et) m *= eta / eta_e;
                cand = project(a - eta * g, et);
                fc = objective(cand, p_);
                const CMatrix step = cand - a;
                const double model = f + (g.adjoint() * step).trace().real() + step.squaredNorm() / (2.0 * eta);
                if (fc <= model + 1e-15 * std::abs(f) && fc <= f) {
                    accepted = true;
                    break;
                }
                eta *= 0.5;
            }
            if (!accepted) break;
            const double move = (cand - a).norm();
            const double decrease = f - fc;
            a = cand;
            f = fc;
            e = std::move(et);
            eta_e = eta;
            if (move <= o_.opt_tol * (1.0 + a.norm()) || decrease <= o_.opt_tol * std::max(f, 1e-300)) break;
            eta *= 1.5;
        }
        s.iterations = it;
        s.cap = it >= o_.max_iter;
        // feasibility repair
        double delta = 0.0;
        for (const auto& m : x_) delta = std::max(delta, -min_eig(a - m));
        if (delta > 0.0) a += delta * CMatrix::Identity(d_, d_);
        a = herm(a);
        s.a = a;
        // dual sequence from the projection increments at the final point
        for (auto& m : e) m *= eta / eta_e;
        project(a - eta * gradient(a, p_), e);
        for (std::size_t n = 0; n < x_.size(); ++n) s.y[n] = psd_part(-e[n] / (eta * p_));
        return s;
    }


    // Frobenius-orthonormal basis of the d x d Hermitian matrices.
    std::vector<CMatrix> hermitian_basis() const {
        std::vector<CMatrix> b;
        const double r = 1.0 / std::sqrt(2.0);
        for (int i = 0; i < d_; ++i) {
            CMatrix e = CMatrix::Zero(d_, d_);
            e(i, i) = 1.0;
            b.push_back(e);
            for (int j = i + 1; j < d_; ++j) {
                CMatrix s = CMatrix::Zero(d_, d_);
                s(i, j) = r;
                s(j, i) = r;
                b.push_back(s);
                CMatrix t = CMatrix::Zero(d_, d_);
                t(i, j) = Complex(0.0, r);
                t(j, i) = Complex(0.0, -r);
                b.push_back(t);
            }
        }
        return b;
    }

    // Log-barrier Newton method on t tr(a^p) - sum_n log det(a - x_n). The
    // multipliers (a - x_n)^{-1} / t at the final centre give the dual sequence.
    CellSolution barrier() const {
        CellSolution s;
        s.y.assign(x_.size(), CMatrix::Zero(d_, d_));
        double lam = 0.0;
        for (const auto& m : x_) lam = std::max(lam, eig(m).values[d_ - 1]);
        if (!(lam > 0.0)) {
            s.a = CMatrix::Zero(d_, d_);
            return s;
        }
        std::vector<CMatrix> x;
        x.reserve(x_.size());
        for (const auto& m : x_) x.push_back(m / lam);
        const int K = static_cast<int>(x.size());
        const auto basis = hermitian_basis();
        const int nb = static_cast<int>(basis.size());
        const double mcount = static_cast<double>(K) * d_;
        const CMatrix I = CMatrix::Identity(d_, d_);

        auto value = [&](const CMatrix& a, double t, bool& ok) {
            ok = true;
            double v = t * objective(a, p_);
            for (const auto& xn : x) {
                Eigen::LLT<CMatrix> llt(a - xn);
                if (llt.info() != Eigen::Success) {
                    ok = false;
                    return std::numeric_limits<double>::infinity();
                }
                const CMatrix L = llt.matrixL();
                for (int i = 0; i < d_; ++i) {
                    const double li = L(i, i).real();
                    if (!(li > 0.0)) {
                        ok = false;
                        return std::numeric_limits<double>::infinity();
                    }
                    v -= 2.0 * std::log(li);
                }
            }
            return v;
        };

        CMatrix a = 1.1 * I;
        double t = mcount / objective(a, p_);
        const double t_final = mcount / o_.opt_tol;
        std::vector<CMatrix> sinv(K);
        int total = 0;
        bool cap = false;
        while (true) {
            for (int step = 0; step < 200; ++step) {
                if (total >= o_.max_iter) {
                    cap = true;
                    break;
                }
                ++total;
                const auto ea = eig(a);
                for (int n = 0; n < K; ++n) sinv[n] = herm((a - x[n]).inverse());
                CMatrix G = t * apply_fn(ea, [this](double u) { return p_ * std::pow(std::max(u, 0.0), p_ - 1.0); });
                for (const auto& si : sinv) G -= si;
                Eigen::MatrixXd gam(d_, d_);
                for (int i = 0; i < d_; ++i)
                    for (int j = 0; j < d_; ++j) {
                        const double li = std::max(ea.values[i], 1e-300), lj = std::max(ea.values[j], 1e-300);
                        if (std::abs(li - lj) > 1e-10 * std::max(li, lj))
                            gam(i, j) = p_ * (std::pow(li, p_ - 1.0) - std::pow(lj, p_ - 1.0)) / (li - lj);
                        else
                            gam(i, j) = p_ * (p_ - 1.0) * std::pow(0.5 * (li + lj), p_ - 2.0);
                    }
                Eigen::VectorXd g(nb);
                Eigen::MatrixXd H(nb, nb);
                std::vector<CMatrix> hb(nb);
                for (int l = 0; l < nb; ++l) {
                    const CMatrix rot = ea.vectors.adjoint() * basis[l] * ea.vectors;
                    CMatrix hv = t * (ea.vectors * rot.cwiseProduct(gam.cast<Complex>()) * ea.vectors.adjoint());
                    for (const auto& si : sinv) hv += si * basis[l] * si;
                    hb[l] = hv;
                    g[l] = (G * basis[l]).trace().real();
                }
                for (int k = 0; k < nb; ++k)
                    for (int l = 0; l < nb; ++l) H(k, l) = (basis[k] * hb[l]).trace().real();
                H = 0.5 * (H + H.transpose());
                const Eigen::VectorXd v = H.ldlt().solve(-g);
                const double dec = -g.dot(v);
                if (!(dec > 1e-10)) break;
                CMatrix dir = CMatrix::Zero(d_, d_);
                for (int l = 0; l < nb; ++l) dir += v[l] * basis[l];
                bool ok = true;
                const double f0 = value(a, t, ok);
                double sz = 1.0;
                bool moved = false;
                for (int ls = 0; ls < 60; ++ls, sz *= 0.5) {
                    const CMatrix cand = herm(a + sz * dir);
                    const double fc = value(cand, t, ok);
                    if (ok && fc <= f0 - 0.25 * sz * dec) {
                        a = cand;
                        moved = true;
                        break;
                    }
                }
                // small decrement, or line search limited by rounding
                if (!moved || dec < 1e-8 || sz < 1e-3) break;
            }
            if (cap || t >= t_final) break;
            t = std::min(t * 8.0, t_final);
        }
        s.iterations = total;
        s.cap = cap;
        for (int n = 0; n < K; ++n) sinv[n] = herm((a - x[n]).inverse());
        s.a = lam * herm(a);
        const double yscale = std::pow(lam, p_ - 1.0) / (t * p_);
        for (int n = 0; n < K; ++n) s.y[n] = psd_part(yscale * sinv[n]);
        return s;
    }

    std::vector<CMatrix> x_;
    double p_;
    LinfOptions o_;
    int d_ = 1;
};

}  // namespace

MajorantCertificate linf_norm(const PositiveSeq& x, double p, const Weight& w, const LinfOptions& opts) {
    if (!(p > 1.0) || std::isinf(p)) throw ParameterError("linf_norm: p must lie in (1, inf)");
    const auto& filt = x.filtration();
    const int cells = filt->cell_count();
    const int terms = static_cast<int>(x.terms.size());
    std::vector<CellSolution> sol(cells);
    detail::parallel_for(cells, [&](int c) {
        std::vector<CMatrix> xs;
        xs.reserve(terms);
        for (const auto& t : x.terms) xs.push_back(t.values[c].matrix());
        sol[c] = CellSolver(std::move(xs), p, opts).solve();
    });

    MajorantCertificate cert;
    std::vector<HermitianMatrix> av;
    av.reserve(cells);
    for (int c = 0; c < cells; ++c) {
        av.push_back(HermitianMatrix::symmetrized(sol[c].a));
        cert.cap_reached = cert.cap_reached || sol[c].cap;
        cert.max_iterations = std::max(cert.max_iterations, sol[c].iterations);
    }
    cert.upper_a = OpStepFunction(filt, std::move(av));
    cert.upper_value = weighted_lp_norm(cert.upper_a, p, w);

    const int d = x.dim();
    std::vector<OpStepFunction> ys;
    for (int n = 0; n < terms; ++n) {
        std::vector<HermitianMatrix> v;
        v.reserve(cells);
        for (int c = 0; c < cells; ++c) v.push_back(HermitianMatrix::symmetrized(sol[c].y[n]));
        ys.emplace_back(filt, std::move(v));
    }
    OpStepFunction total = ys.front();
    for (int n = 1; n < terms; ++n) total = total + ys[n];
    const double q = p / (p - 1.0);
    const double norm = weighted_lp_norm(total, q, w);
    if (norm > 0.0) {
        for (auto& y : ys) y = (1.0 / norm) * y;
        detail::KahanSum s;
        for (int n = 0; n < terms; ++n)
            for (int c = 0; c < cells; ++c)
                s.add(filt->cell_length(c) * w.values[c] *
                      (x.terms[n].values[c].matrix() * ys[n].values[c].matrix()).trace().real());
        cert.lower_value = std::max(0.0, s.value());
    } else {
        for (auto& y : ys) y = OpStepFunction::constant(filt, HermitianMatrix::zero(d));
        cert.lower_value = 0.0;
    }
    cert.dual_y = PositiveSeq(std::move(ys));
    return cert;
}

MajorantCertificate linf_norm_upper(const PositiveSeq& x, double p, const Weight& w, double opt_tol) {
    LinfOptions o;
    o.opt_tol = opt_tol;
    auto c = linf_norm(x, p, w, o);
    c.dual_y = PositiveSeq();
    c.lower_value = 0.0;
    return c;
}

MajorantCertificate linf_norm_lower(const PositiveSeq& x, double p, const Weight& w) {
    auto c = linf_norm(x, p, w);
    c.upper_a = OpStepFunction();
    c.upper_value = 0.0;
    return c;
}

DoobRatio doob_ratio(const OpStepFunction& f, double p, const Weight& w, const LinfOptions& opts) {
    DoobRatio r;
    r.f_norm = weighted_lp_norm(f, p, w);
    if (!(r.f_norm > 0.0)) throw DomainError("doob_ratio: undefined for f = 0");
    r.certificate = linf_norm(PositiveSeq::from_martingale(martingale(f)), p, w, opts);
    r.upper_ratio = r.certificate.upper_value / r.f_norm;
    r.lower_ratio = r.certificate.lower_value / r.f_norm;
    return r;
}

namespace {

CMatrix threshold_projection(const CMatrix& m) {
    return apply_fn(eig(herm(m)), [](double t) { return t > 0.5 ? 1.0 : 0.0; });
}

double max_eig(const CMatrix& m) { return eig(herm(m)).values.maxCoeff(); }

}  // namespace

CuculescuReport cuculescu(const OpStepFunction& f, double lambda, const Weight& w, double p) {
    if (!(lambda > 0.0)) throw ParameterError("cuculescu: lambda must be positive");
    if (!(p >= 1.0)) throw ParameterError("cuculescu: p must be >= 1");
    const auto& filt = f.filtration;
    const int J = filt->depth();
    const int cells = filt->cell_count();
    const int d = f.dim();
    const CMatrix I = CMatrix::Identity(d, d);
    const Interval inside{-std::numeric_limits<double>::infinity(), 1.0 + 1e-10, true, true};

    CuculescuReport r;
    r.lambda = lambda;
    r.p = p;
    std::vector<CMatrix> prev(cells, I);
    std::vector<std::vector<CMatrix>> qs(J + 1, std::vector<CMatrix>(cells));
    std::vector<std::vector<CMatrix>> ex(J + 1, std::vector<CMatrix>(cells));  // E_n(f/lambda) per cell
    for (int n = 0; n <= J; ++n) {
        const auto avg = atom_averages(f, n);
        for (int a = 0; a < filt->atom_count(n); ++a) {
            const auto& members = filt->atom_cells(n, a);
            const CMatrix e = avg[a].matrix() / lambda;
            const CMatrix& qp = prev[members.front()];
            for (int c : members)
                r.measurability_defect = std::max(r.measurability_defect, (prev[c] - qp).norm());
            const CMatrix b = herm(qp * e * qp);
            const CMatrix proj = spectral_projection(HermitianMatrix::symmetrized(b), inside).matrix();
            const CMatrix qn = threshold_projection(qp * proj * qp);
            const CMatrix dlt = qp - qn;
            r.commutator = std::max(r.commutator, (qn * b - b * qn).norm());
            r.upper_violation = std::max(r.upper_violation, max_eig(qn * e * qn - qn));
            r.lower_violation = std::max(r.lower_violation, -min_eig(herm(dlt * e * dlt - dlt)));
            r.monotonicity_defect = std::max(r.monotonicity_defect, (qn * qp - qn).norm());
            r.projection_defect = std::max(r.projection_defect, (qn * qn - qn).norm());
            for (int c : members) {
                qs[n][c] = qn;
                ex[n][c] = e;
            }
        }
        prev = qs[n];
    }

    std::vector<HermitianMatrix> meet(cells);
    for (int c = 0; c < cells; ++c) {
        CMatrix s = CMatrix::Zero(d, d);
        for (int n = 0; n <= J; ++n) s += I - qs[n][c];
        const CMatrix mq = apply_fn(eig(herm(s)), [](double t) { return t < 1e-7 ? 1.0 : 0.0; });
        for (int n = 0; n <= J; ++n) {
            r.meet_order_violation = std::max(r.meet_order_violation, max_eig(mq - qs[n][c]));
            r.meet_level_violation = std::max(r.meet_level_violation, max_eig(mq * ex[n][c] * mq) - 1.0);
        }
        meet[c] = HermitianMatrix::symmetrized(mq);
    }
    r.q.meet_q = OpStepFunction(filt, std::move(meet));
    for (int n = 0; n <= J; ++n) {
        std::vector<HermitianMatrix> v;
        v.reserve(cells);
        for (int c = 0; c < cells; ++c) v.push_back(HermitianMatrix::symmetrized(qs[n][c]));
        r.q.terms.emplace_back(filt, std::move(v));
    }
    for (int n = 0; n <= J; ++n)
        r.measurability_defect = std::max(r.measurability_defect, is_measurable(r.q.terms[n], n, 1e-9) ? 0.0 : 1.0);

    const auto complement = OpStepFunction::constant(filt, HermitianMatrix::identity(d)) - r.q.meet_q;
    r.excess = std::max(0.0, weighted_trace(complement, w));
    r.characteristic = p == 1.0 ? a1_char(w) : ap_char(w, p);
    r.lhs = lambda * std::pow(r.excess, 1.0 / p);
    r.rhs = std::pow(r.characteristic, 1.0 / p) * weighted_lp_norm(f, p, w);
    r.bound_ok = r.lhs <= r.rhs * (1.0 + 1e-6);
    return r;
}

SpineInstance spine_instance(double eps, double p, int J, int m) {
    if (!(eps > 0.0) || eps > 1.0) throw ParameterError("spine_instance: eps must lie in (0, 1]");
    if (!(p > 1.0)) throw ParameterError("spine_instance: p must exceed 1");
    if (J < 1 || m < 0 || J + m > 24) throw ParameterError("spine_instance: need J >= 1, m >= 0, J + m <= 24");
    const double gamma = (p - 1.0) * (1.0 - eps);
    std::vector<std::vector<double>> levels(J + m + 1);
    for (int L = 0; L <= J + m; ++L) {
        auto& cuts = levels[L];
        for (int n = 1; n <= std::min(L, J); ++n) cuts.push_back(std::ldexp(1.0, -n));
        for (int k = 0; k < std::min(L, J); ++k) {
            const int r = std::min(L - k - 1, m);
            const double lo = std::ldexp(1.0, -k - 1);
            for (int j = 1; j < (1 << r); ++j) cuts.push_back(lo + j * std::ldexp(1.0, -k - 1 - r));
        }
    }
    auto filt = AtomicFiltration::from_cut_levels(0.0, 1.0, levels);
    const double floor = std::ldexp(1.0, -J);
    std::vector<double> wv(filt->cell_count()), fv(filt->cell_count());
    for (int c = 0; c < filt->cell_count(); ++c) {
        const double t = std::max(filt->cell_mid(c), floor);
        wv[c] = std::pow(t, gamma);
        fv[c] = std::pow(wv[c], 1.0 / (1.0 - p));
    }
    Weight w(filt, std::move(wv));
    return {filt, std::move(w), StepFunction(filt, std::move(fv))};
}

SpineSharpness spine_sharpness(double eps, double p, int J, int m) {
    if (!(eps > 0.0) || eps > 1.0) throw ParameterError("spine_sharpness: eps must lie in (0, 1]");
    if (!(p > 1.0)) throw ParameterError("spine_sharpness: p must exceed 1");
    if (J < 1 || m < 0 || m > 20) throw ParameterError("spine_sharpness: need J >= 1 and 0 <= m <= 20");
    const double gamma = (p - 1.0) * (1.0 - eps);
    const int cells = 1 << m;
    const double h = std::ldexp(1.0, -1 - m);

    // the cell [1/2, 1) and its dyadic refinement; other cells are rescaled copies
    std::vector<double> g(cells), om(cells);
    for (int i = 0; i < cells; ++i) {
        const double s = 0.5 + (i + 0.5) * h;
        om[i] = std::pow(s, gamma);
        g[i] = std::pow(om[i], 1.0 / (1.0 - p));
    }
    double A = 0.0, B = 0.0, W = 0.0;
    for (int i = 0; i < cells; ++i) {
        A += h * std::pow(g[i], p) * om[i];
        B += h * g[i];
        W += h * om[i];
    }
    // dyadic ancestors inside the cell: running maximum of averages of g, and
    // the characteristic of those atoms
    std::vector<double> inner_max(cells, 0.0);
    double inner_char = 1.0;
    for (int r = 0; r <= m; ++r) {
        const int len = cells >> r;
        for (int start = 0; start < cells; start += len) {
            double sg = 0.0, sw = 0.0;
            for (int i = start; i < start + len; ++i) {
                sg += g[i];
                sw += om[i];
            }
            const double ag = sg / len, aw = sw / len;
            inner_char = std::max(inner_char, aw * std::pow(ag, p - 1.0));
            for (int i = start; i < start + len; ++i) inner_max[i] = std::max(inner_max[i], ag);
        }
    }
    // normalized spine averages of f and w, n = J..0
    std::vector<double> sf(J + 1), sw(J + 1);
    sf[J] = 1.0;
    sw[J] = 1.0;
    const double qf = std::exp2(-eps), qw = std::exp2(-(1.0 + gamma));
    for (int n = J - 1; n >= 0; --n) {
        sf[n] = qf * sf[n + 1] + B;
        sw[n] = qw * sw[n + 1] + W;
    }
    SpineSharpness out;
    out.eps = eps;
    out.p = p;
    out.J = J;
    out.m = m;
    double ch = std::max(1.0, inner_char);
    for (int n = 0; n <= J; ++n) ch = std::max(ch, sw[n] * std::pow(sf[n], p - 1.0));
    out.characteristic = ch;

    const double decay = std::exp2(-(1.0 - eps));
    double R = 0.0;
    detail::KahanSum fnorm, mnorm;
    for (int k = 0; k <= J; ++k) {
        R = k == 0 ? sf[0] : std::max(decay * R, sf[k]);
        const double scale = std::exp2(-k * eps);
        if (k == J) {
            fnorm.add(scale);
            mnorm.add(scale * std::pow(R, p));
            break;
        }
        double inner = 0.0;
        for (int i = 0; i < cells; ++i) inner += h * std::pow(std::max(R, inner_max[i]), p) * om[i];
        fnorm.add(scale * A);
        mnorm.add(scale * inner);
    }
    out.f_norm = std::pow(fnorm.value(), 1.0 / p);
    out.maximal_norm = std::pow(mnorm.value(), 1.0 / p);
    out.ratio = out.maximal_norm / out.f_norm;
    return out;
}

}  // namespace ncmart
