#include "ncmart/hlmax.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ncmart/error.hpp"

namespace ncmart {

namespace {

bool is_power_of_two(double L) {
    if (!(L > 0.0) || !std::isfinite(L)) return false;
    int e = 0;
    return std::frexp(L, &e) == 0.5;
}

// Index of the last cell whose left endpoint is < b.
int last_cell_before(const AtomicFiltration& f, double b) {
    const auto& bp = f.breakpoints();
    const auto it = std::lower_bound(bp.begin(), bp.end(), b);
    return static_cast<int>(it - bp.begin()) - 1;
}

}  // namespace

GridFamily adjacent_grids(double L, int J) {
    if (!is_power_of_two(L)) throw ParameterError("adjacent_grids: L must be a power of two");
    if (J < 1 || J > 16) throw ParameterError("adjacent_grids: J must lie in [1, 16]");
    GridFamily g;
    g.L = L;
    g.J = J;
    g.margin = L / 4.0;
    // cut points are integer multiples of delta = L 2^{-J} / 3
    const long long top = 3LL << J;  // L / delta
    const double delta = L / static_cast<double>(top);
    std::vector<double> lattice;
    for (long long i = -top + 1; i < top; ++i) lattice.push_back(static_cast<double>(i) * delta);
    for (int j = 0; j < 3; ++j) {
        std::vector<std::vector<double>> levels;
        levels.emplace_back();
        for (int k = 0; k <= J; ++k) {
            const long long unit = 1LL << (J - k);  // ell_k / (3 delta) = 2^{J-k}
            const long long sj = (k % 2 == 0 ? 1 : -1) * j;
            std::vector<double> cuts;
            // cut index = unit * (3m + sj)
            for (long long m = -(1LL << k) - 2; m <= (1LL << k) + 2; ++m) {
                const long long i = unit * (3 * m + sj);
                if (i > -top && i < top) cuts.push_back(static_cast<double>(i) * delta);
            }
            levels.push_back(std::move(cuts));
        }
        levels.push_back(lattice);
        g.grids.push_back(AtomicFiltration::from_cut_levels(-L, L, levels));
        g.shifts.push_back(j / 3.0);
    }
    double worst = 1.0;
    Ball bad{0.0, 0.0};
    for (const auto& b : containment_mesh(g)) {
        const auto c = find_container(g, b.x, b.r);
        if (c.ratio > worst) {
            worst = c.ratio;
            bad = b;
        }
    }
    if (worst > 8.0) {
        std::ostringstream os;
        os << "adjacent_grids: ball (" << bad.x << ", " << bad.r << ") has containment ratio " << worst;
        throw ConstructionError(os.str());
    }
    g.C_contain = worst;
    return g;
}

Containment find_container(const GridFamily& g, double x, double r) {
    if (!(r > 0.0)) throw ParameterError("find_container: radius must be positive");
    const double a = x - r, b = x + r;
    Containment best;
    if (a < -g.L || b > g.L) return best;
    for (int k = 0; k < g.grid_count(); ++k) {
        const auto& f = *g.grids[k];
        const int ca = f.locate(a);
        const int cb = last_cell_before(f, b);
        for (int n = f.depth(); n >= 0; --n) {
            if (f.atom_of(n, ca) != f.atom_of(n, cb)) continue;
            const double m = f.atom_measure(n, f.atom_of(n, ca));
            if (best.grid < 0 || m < best.measure) best = {k, n, f.atom_of(n, ca), m, m / (2.0 * r)};
            break;
        }
    }
    return best;
}

std::vector<Ball> containment_mesh(const GridFamily& g) {
    const double delta = g.L / static_cast<double>(3LL << g.J);
    const double h = 0.5 * delta;
    const double lo = g.safe_lo(), hi = g.safe_hi();
    std::vector<double> radii;
    for (int k = 6; k <= 96; ++k) radii.push_back(k * h);
    for (double r = 96 * h * std::exp2(0.125); 2.0 * r <= hi - lo; r *= std::exp2(0.125)) radii.push_back(r);
    const long long nx = std::llround((hi - lo) / h);
    std::vector<Ball> out;
    for (double r : radii) {
        for (long long i = 0; i <= nx; ++i) {
            const double x = lo + static_cast<double>(i) * h;
            if (x - r >= lo && x + r <= hi) out.push_back({x, r});
        }
    }
    return out;
}

namespace {

class PrefixIntegral {
public:
    explicit PrefixIntegral(const OpStepFunction& f) : f_(f), prefix_(f.size() + 1, CMatrix::Zero(f.dim(), f.dim())) {
        const auto& filt = *f.filtration;
        for (int c = 0; c < f.size(); ++c) prefix_[c + 1] = prefix_[c] + filt.cell_length(c) * f.values[c].matrix();
    }

    // integral of f over (-inf, t)
    CMatrix operator()(double t) const {
        const auto& filt = *f_.filtration;
        if (t <= filt.left()) return CMatrix::Zero(f_.dim(), f_.dim());
        if (t >= filt.right()) return prefix_.back();
        const int c = filt.locate(t);
        return prefix_[c] + (t - filt.cell_left(c)) * f_.values[c].matrix();
    }

    HermitianMatrix average(double x, double r) const {
        return HermitianMatrix::symmetrized(((*this)(x + r) - (*this)(x - r)) / (2.0 * r));
    }

private:
    const OpStepFunction& f_;
    std::vector<CMatrix> prefix_;
};

}  // namespace

OpStepFunction ball_average(const OpStepFunction& f, double r) {
    if (!(r > 0.0)) throw ParameterError("ball_average: radius must be positive");
    const PrefixIntegral F(f);
    std::vector<HermitianMatrix> out;
    out.reserve(f.size());
    for (int c = 0; c < f.size(); ++c) out.push_back(F.average(f.filtration->cell_mid(c), r));
    return OpStepFunction(f.filtration, std::move(out));
}

HermitianMatrix ball_average_at(const OpStepFunction& f, double x, double r) {
    if (!(r > 0.0)) throw ParameterError("ball_average_at: radius must be positive");
    return PrefixIntegral(f).average(x, r);
}

double domination_defect(const GridFamily& g, const OpStepFunction& f, const std::vector<Ball>& balls) {
    const PrefixIntegral F(f);
    double worst = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<std::vector<HermitianMatrix>>> avg(g.grid_count());
    for (int k = 0; k < g.grid_count(); ++k) {
        const OpStepFunction fk(g.grids[k], f.values);
        for (int n = 0; n <= g.grids[k]->depth(); ++n) avg[k].push_back(atom_averages(fk, n));
    }
    for (const auto& b : balls) {
        const auto q = find_container(g, b.x, b.r);
        if (q.grid < 0) continue;
        const CMatrix diff = F.average(b.x, b.r).matrix() - g.C_contain * avg[q.grid][q.level][q.atom].matrix();
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
        worst = std::max(worst, es.eigenvalues().maxCoeff());
    }
    return worst;
}

HlMaximalReport hl_maximal_report(const GridFamily& g, const OpStepFunction& f, double p, const Weight& w,
                                  const std::vector<double>& radii, double lambda) {
    if (!(p >= 1.0)) throw ParameterError("hl_maximal_report: p must be >= 1");
    if (radii.empty()) throw ParameterError("hl_maximal_report: need at least one radius");
    if (f.filtration->breakpoints() != g.cells()->breakpoints())
        throw ParameterError("hl_maximal_report: f must live on the family's cells");
    const int K = g.grid_count();
    const int cells = g.cells()->cell_count();
    const int d = f.dim();
    HlMaximalReport rep;
    rep.p = p;
    rep.lambda = lambda;
    rep.grid_count = K;
    rep.f_norm = weighted_lp_norm(f, p, w);

    std::vector<CuculescuReport> runs;
    for (int k = 0; k < K; ++k) {
        const OpStepFunction fk(g.grids[k], f.values);
        const Weight wk(g.grids[k], w.values);
        runs.push_back(cuculescu(fk, lambda / g.C_contain, wk, p));
        rep.characteristic = std::max(rep.characteristic, runs.back().characteristic);
        rep.excess_sum += runs.back().excess;
    }
    const CMatrix I = CMatrix::Identity(d, d);
    std::vector<HermitianMatrix> meet(cells);
    for (int c = 0; c < cells; ++c) {
        CMatrix s = CMatrix::Zero(d, d);
        for (const auto& run : runs) s += I - run.q.meet_q.values[c].matrix();
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (s + s.adjoint()));
        RVector v(d);
        for (int i = 0; i < d; ++i) v[i] = es.eigenvalues()[i] < 1e-7 ? 1.0 : 0.0;
        meet[c] = HermitianMatrix::symmetrized(es.eigenvectors() * v.asDiagonal() * es.eigenvectors().adjoint());
    }
    const OpStepFunction q(f.filtration, std::move(meet));
    rep.excess = std::max(0.0, weighted_trace(OpStepFunction::constant(f.filtration, HermitianMatrix::identity(d)) - q, w));
    rep.union_ok = rep.excess <= rep.excess_sum + 1e-8;
    rep.weak_lhs = lambda * std::pow(rep.excess, 1.0 / p);
    rep.weak_rhs = std::pow(static_cast<double>(K), 1.0 / p) * g.C_contain * std::pow(rep.characteristic, 1.0 / p) * rep.f_norm;
    rep.weak_ok = rep.weak_lhs <= rep.weak_rhs * (1.0 + 1e-6);

    std::vector<OpStepFunction> avgs;
    for (double r : radii) avgs.push_back(ball_average(f, r));
    rep.level_defect = -std::numeric_limits<double>::infinity();
    const auto& cf = *g.cells();
    for (std::size_t i = 0; i < radii.size(); ++i) {
        for (int c = 0; c < cells; ++c) {
            const double x = cf.cell_mid(c);
            if (x - radii[i] < g.safe_lo() || x + radii[i] > g.safe_hi()) continue;
            const CMatrix qm = q.values[c].matrix();
            const CMatrix m = qm * avgs[i].values[c].matrix() * qm;
            Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
            rep.level_defect = std::max(rep.level_defect, es.eigenvalues().maxCoeff() - lambda);
        }
    }

    if (p > 1.0) {
        const auto cert = linf_norm(PositiveSeq(std::move(avgs)), p, w);
        if (rep.f_norm > 0.0) {
            rep.strong_lower = cert.lower_value / rep.f_norm;
            rep.strong_upper = cert.upper_value / rep.f_norm;
        }
    }
    return rep;
}

}  // namespace ncmart
