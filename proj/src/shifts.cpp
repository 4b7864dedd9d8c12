#include "ncmart/shifts.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

#include "ncmart/detail/kahan.hpp"
#include "ncmart/detail/parallel.hpp"
#include "ncmart/error.hpp"

namespace ncmart {

namespace {

double opnorm(const CMatrix& m) {
    if (m.rows() == 1) return std::abs(m(0, 0).real());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// integral of f over (-inf, t), f extended by zero
class Prefix {
public:
    explicit Prefix(const OpStepFunction& f) : f_(f), sums_(f.size() + 1, CMatrix::Zero(f.dim(), f.dim())) {
        for (int c = 0; c < f.size(); ++c) sums_[c + 1] = sums_[c] + f.filtration->cell_length(c) * f.values[c].matrix();
    }

    CMatrix operator()(double t) const {
        const auto& filt = *f_.filtration;
        if (t <= filt.left()) return CMatrix::Zero(f_.dim(), f_.dim());
        if (t >= filt.right()) return sums_.back();
        const int c = filt.locate(t);
        return sums_[c] + (t - filt.cell_left(c)) * f_.values[c].matrix();
    }

private:
    const OpStepFunction& f_;
    std::vector<CMatrix> sums_;
};

CMatrix coefficient(const Prefix& F, const HaarProfile& h, double a, double len) {
    CMatrix out;
    CMatrix prev = F(a);
    for (int j = 0; j < 4; ++j) {
        const CMatrix next = F(j == 3 ? a + len : a + 0.25 * (j + 1) * len);
        if (j == 0)
            out = h.q[0] * (next - prev);
        else
            out += h.q[j] * (next - prev);
        prev = next;
    }
    return out / std::sqrt(len);
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

double HaarProfile::operator()(double x) const {
    if (x < 0.0 || x >= 1.0) return 0.0;
    return q[std::min(3, static_cast<int>(4.0 * x))];
}

double HaarProfile::l2_norm_sq() const {
    return 0.25 * (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
}

HaarProfile profile(ProfileKind kind) {
    HaarProfile h;
    h.kind = kind;
    switch (kind) {
        case ProfileKind::phi: h.q = {-1, 1, 1, -1}; break;
        case ProfileKind::psi: h.q = {7, -1, 1, -7}; break;
        case ProfileKind::zeta: h.q = {1, -1, 1, -1}; break;
        case ProfileKind::psi_out: h.q = {7, 0, 0, -7}; break;
        case ProfileKind::psi_inn: h.q = {0, -1, 1, 0}; break;
        case ProfileKind::zeta_out: h.q = {1, 0, 0, -1}; break;
        case ProfileKind::zeta_inn: h.q = {0, -1, 1, 0}; break;
        case ProfileKind::zeta_out_v2: h.q = {1, -1, 0, 0}; break;
        case ProfileKind::zeta_inn_v2: h.q = {0, 0, 1, -1}; break;
    }
    return h;
}

const char* profile_name(ProfileKind kind) {
    switch (kind) {
        case ProfileKind::phi: return "phi";
        case ProfileKind::psi: return "psi";
        case ProfileKind::zeta: return "zeta";
        case ProfileKind::psi_out: return "psi_out";
        case ProfileKind::psi_inn: return "psi_inn";
        case ProfileKind::zeta_out: return "zeta_out";
        case ProfileKind::zeta_inn: return "zeta_inn";
        case ProfileKind::zeta_out_v2: return "zeta_out_v2";
        case ProfileKind::zeta_inn_v2: return "zeta_inn_v2";
    }
    return "?";
}

StepFunction scale_profile(const HaarProfile& h, double a, double len) {
    if (!(len > 0.0)) throw ParameterError("scale_profile: interval must be nonempty");
    std::vector<double> bp{a, a + 0.25 * len, a + 0.5 * len, a + 0.75 * len, a + len};
    std::vector<double> v(4);
    for (int j = 0; j < 4; ++j) v[j] = h.q[j] / std::sqrt(len);
    return StepFunction(AtomicFiltration::flat(std::move(bp)), std::move(v));
}

double GridSpec::offset(int n) const {
    double s = 0.0;
    for (int i = n_min; i < std::min(n, n_max); ++i) {
        const int b = beta.empty() ? 0 : beta.at(i - n_min);
        if (b) s += std::exp2(i);
    }
    return r * s;
}

bool GridSpec::keeps(int n) const {
    const bool even = n % 2 == 0;
    return parity == Parity::all || (parity == Parity::even) == even;
}

std::vector<GridInterval> grid_intervals(const GridSpec& g) {
    if (!(g.r >= 1.0 && g.r < 2.0)) throw ParameterError("grid: r must lie in [1, 2)");
    if (g.n_min > g.n_max) throw ParameterError("grid: empty scale range");
    if (!g.beta.empty() && static_cast<int>(g.beta.size()) != g.n_max - g.n_min)
        throw ParameterError("grid: beta must have n_max - n_min bits");
    if (!(g.hi > g.lo)) throw ParameterError("grid: empty window");
    std::vector<GridInterval> out;
    const double tol = 1e-12 * std::max(1.0, g.hi - g.lo);
    for (int n = g.n_max; n >= g.n_min; --n) {
        if (!g.keeps(n)) continue;
        const double len = g.length(n), o = g.offset(n);
        const auto k0 = static_cast<long long>(std::ceil((g.lo - o) / len - 1e-9));
        const auto k1 = static_cast<long long>(std::floor((g.hi - o) / len + 1e-9));
        for (long long k = k0; k < k1; ++k) {
            const double left = o + static_cast<double>(k) * len;
            if (left < g.lo - tol || left + len > g.hi + tol) continue;
            out.push_back({n, k, left, len});
        }
    }
    return out;
}

GridSpec random_grid(Rng& rng, int n_min, int n_max, double L, Parity parity) {
    GridSpec g;
    g.r = 1.0 + static_cast<double>(rng.below(64)) / 64.0;
    g.n_min = n_min;
    g.n_max = n_max;
    for (int i = n_min; i < n_max; ++i) g.beta.push_back(static_cast<int>(rng.below(2)));
    g.lo = -L;
    g.hi = L;
    g.parity = parity;
    return g;
}

double CoefficientFn::operator()(double len, double left) const {
    const double v = gamma(len, left);
    if (!(std::abs(v) <= sup * (1.0 + 1e-12))) {
        std::ostringstream os;
        os << "coefficient " << name << " = " << v << " at |I| = " << len << " exceeds its bound " << sup;
        throw DomainError(os.str());
    }
    return v;
}

CoefficientFn gamma_one() { return {"one", [](double, double) { return 1.0; }, 1.0}; }
CoefficientFn gamma_zero() { return {"zero", [](double, double) { return 0.0; }, 0.0}; }
CoefficientFn gamma_sin_log() {
    return {"sin-log", [](double len, double) { return std::sin(std::log(len)); }, 1.0};
}
CoefficientFn gamma_random(std::uint64_t seed) {
    return {"random",
            [seed](double len, double left) {
                std::uint64_t h = splitmix(seed);
                h = splitmix(h ^ std::bit_cast<std::uint64_t>(len));
                h = splitmix(h ^ std::bit_cast<std::uint64_t>(left + 0.0));
                return 2.0 * static_cast<double>(h >> 11) * 0x1.0p-53 - 1.0;
            },
            1.0};
}

HermitianMatrix haar_coefficient(const OpStepFunction& f, const HaarProfile& h, double a, double len) {
    if (!(len > 0.0)) throw ParameterError("haar_coefficient: interval must be nonempty");
    return HermitianMatrix::symmetrized(coefficient(Prefix(f), h, a, len));
}

OpStepFunction haar_shift(const OpStepFunction& f, const GridSpec& g, const CoefficientFn& c,
                          const HaarProfile& analysis, const HaarProfile& synthesis) {
    const auto& filt = *f.filtration;
    const auto& bp = filt.breakpoints();
    const auto intervals = grid_intervals(g);
    const double tol = 1e-12 * std::max(1.0, filt.total_measure());
    for (const auto& I : intervals) {
        for (int j = 0; j <= 4; ++j) {
            const double x = I.left + 0.25 * j * I.length;
            if (x <= filt.left() || x >= filt.right()) continue;
            const int cell = filt.locate(x);
            if (x - filt.cell_left(cell) > tol && filt.cell_right(cell) - x > tol) {
                std::ostringstream os;
                os << "haar_shift: quarter point " << x << " of a grid interval of length " << I.length
                   << " splits a cell of f";
                throw ResolutionError(os.str());
            }
        }
    }
    const Prefix F(f);
    const int d = f.dim();
    std::vector<CMatrix> acc(f.size(), CMatrix::Zero(d, d));
    for (const auto& I : intervals) {
        const double right = I.left + I.length;
        if (right <= filt.left() || I.left >= filt.right()) continue;
        const double gm = c(I.length, I.left);
        if (gm == 0.0) continue;
        const CMatrix coef = gm * coefficient(F, analysis, I.left, I.length) / std::sqrt(I.length);
        const auto first = static_cast<int>(std::upper_bound(bp.begin(), bp.end(), I.left + tol) - bp.begin()) - 1;
        for (int cell = std::max(0, first); cell < f.size() && filt.cell_left(cell) < right - tol; ++cell) {
            const int j = std::clamp(static_cast<int>(4.0 * (filt.cell_mid(cell) - I.left) / I.length), 0, 3);
            if (synthesis.q[j] != 0.0) acc[cell] += synthesis.q[j] * coef;
        }
    }
    std::vector<HermitianMatrix> out;
    out.reserve(acc.size());
    for (auto& m : acc) out.push_back(HermitianMatrix::symmetrized(m));
    return OpStepFunction(f.filtration, std::move(out));
}

OpStepFunction shift_apply(const OpStepFunction& f, const GridSpec& g, const CoefficientFn& c) {
    return haar_shift(f, g, c, profile(ProfileKind::phi), profile(ProfileKind::psi));
}

OpStepFunction shift_adjoint_apply(const OpStepFunction& h, const GridSpec& g, const CoefficientFn& c) {
    return haar_shift(h, g, c, profile(ProfileKind::psi), profile(ProfileKind::phi));
}

// ---- kernels -------------------------------------------------------------

KernelSpec hilbert_kernel() {
    KernelSpec k;
    k.name = "hilbert";
    k.K = [](double s) { return 1.0 / (std::numbers::pi * s); };
    k.dK = [](double s) { return -1.0 / (std::numbers::pi * s * s); };
    k.d2K = [](double s) { return 2.0 / (std::numbers::pi * s * s * s); };
    k.odd = true;
    return k;
}

namespace {

struct KernelTable {
    std::vector<double> s, K, dK, d2K;
    bool mirror = false;

    // index i with s[i] <= x <= s[i+1], -1 beyond the table, throws below it
    int find(double x) const {
        if (x < s.front()) {
            std::ostringstream os;
            os << "tabulated kernel: " << x << " lies below the table";
            throw DomainError(os.str());
        }
        if (x > s.back()) return -1;
        auto it = std::upper_bound(s.begin(), s.end(), x);
        int i = static_cast<int>(it - s.begin()) - 1;
        return std::min(i, static_cast<int>(s.size()) - 2);
    }

    static double hermite(double x, double x0, double x1, double y0, double y1, double m0, double m1) {
        const double h = x1 - x0, t = (x - x0) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
    }

    // which: 0 = K, 1 = K', 2 = K''
    double eval(double x, int which) const {
        double sign = 1.0;
        if (mirror) {
            if (x == 0.0) throw DomainError("tabulated kernel: s = 0");
            if (x < 0.0) {
                x = -x;
                sign = which == 1 ? 1.0 : -1.0;
            }
        }
        const int i = find(x);
        if (i < 0) return 0.0;
        double v = 0.0;
        if (which == 0)
            v = hermite(x, s[i], s[i + 1], K[i], K[i + 1], dK[i], dK[i + 1]);
        else if (which == 1)
            v = hermite(x, s[i], s[i + 1], dK[i], dK[i + 1], d2K[i], d2K[i + 1]);
        else
            v = d2K[i] + (d2K[i + 1] - d2K[i]) * (x - s[i]) / (s[i + 1] - s[i]);
        return sign * v;
    }
};

}  // namespace

KernelSpec read_kernel_csv(std::istream& is, const std::string& name) {
    auto t = std::make_shared<KernelTable>();
    std::string line;
    if (!std::getline(is, line)) throw ParameterError("kernel csv: empty input");
    int row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double s, K, dK, d2K;
        if (!(ls >> s >> K >> dK >> d2K)) throw ParameterError("kernel csv: bad row " + std::to_string(row));
        t->s.push_back(s);
        t->K.push_back(K);
        t->dK.push_back(dK);
        t->d2K.push_back(d2K);
    }
    if (t->s.size() < 2) throw ParameterError("kernel csv: need at least two rows");
    for (std::size_t i = 1; i < t->s.size(); ++i)
        if (!(t->s[i] > t->s[i - 1])) throw ParameterError("kernel csv: s must be strictly increasing");
    t->mirror = t->s.front() > 0.0;
    KernelSpec k;
    k.name = name;
    k.K = [t](double x) { return t->eval(x, 0); };
    k.dK = [t](double x) { return t->eval(x, 1); };
    k.d2K = [t](double x) { return t->eval(x, 2); };
    k.odd = t->mirror;
    return k;
}

KernelSpec kernel_by_name(const std::string& name) {
    if (name == "hilbert") return hilbert_kernel();
    std::ifstream in(name);
    if (!in) throw ParameterError("unknown kernel '" + name + "' (expected hilbert or a CSV path)");
    return read_kernel_csv(in, name);
}

KernelReport kernel_report(const KernelSpec& K) {
    KernelReport rep;
    for (int k = -16; k <= 32; ++k) {
        const double s = std::pow(10.0, k / 8.0);
        rep.odd_defect = std::max(rep.odd_defect, std::abs(K.K(s) + K.K(-s)));
        rep.s3_d2K_sup = std::max(rep.s3_d2K_sup, std::abs(s * s * s * K.d2K(s)));
        rep.s2_d2K_sup = std::max(rep.s2_d2K_sup, std::abs(s * s * K.d2K(s)));
    }
    rep.K_at_1e2 = std::abs(K.K(1e2));
    rep.K_at_1e4 = std::abs(K.K(1e4));
    rep.dK_at_1e2 = std::abs(K.dK(1e2));
    rep.dK_at_1e4 = std::abs(K.dK(1e4));
    double prevK = std::numeric_limits<double>::infinity(), prevD = prevK;
    for (int k = 16; k <= 32; ++k) {
        const double s = std::pow(10.0, k / 8.0);
        const double a = std::abs(K.K(s)), b = std::abs(K.dK(s));
        if (a > prevK || b > prevD) rep.decay_ok = false;
        prevK = a;
        prevD = b;
    }
    return rep;
}

namespace {

// integral of g over [a, b] with 0 < a < b, on pieces [a 2^k, a 2^{k+1}]
template <class G>
double geometric_integral(const G& g, double a, double b) {
    using boost::math::quadrature::gauss_kronrod;
    detail::KahanSum s;
    for (double lo = a; lo < b;) {
        const double hi = std::min(b, 2.0 * lo);
        s.add(gauss_kronrod<double, 15>::integrate(g, lo, hi, 15, 1e-12));
        lo = hi;
    }
    return s.value();
}

}  // namespace

double kernel_integral(const KernelSpec& K, double u0, double u1, double eps) {
    if (!(eps > 0.0)) throw ParameterError("kernel_integral: eps must be positive");
    if (u0 > u1) return -kernel_integral(K, u1, u0, eps);
    double total = 0.0;
    const double a = std::max(u0, eps);
    if (u1 > a) total += geometric_integral([&](double u) { return K.K(u); }, a, u1);
    const double b = std::min(u1, -eps);
    if (b > u0) total += geometric_integral([&](double v) { return K.K(-v); }, -b, -u0);
    return total;
}

HermitianMatrix truncated_singular_at(const OpStepFunction& f, const KernelSpec& K, double eps, double s) {
    if (!(eps > 0.0)) throw ParameterError("truncated_singular: eps must be positive");
    const auto& filt = *f.filtration;
    CMatrix acc = CMatrix::Zero(f.dim(), f.dim());
    for (int c = 0; c < f.size(); ++c) {
        const CMatrix& v = f.values[c].matrix();
        if (v.isZero(0.0)) continue;
        acc += kernel_integral(K, s - filt.cell_right(c), s - filt.cell_left(c), eps) * v;
    }
    return HermitianMatrix::symmetrized(acc);
}

OpStepFunction truncated_singular(const OpStepFunction& f, const KernelSpec& K, double eps) {
    std::vector<HermitianMatrix> out(f.size());
    detail::parallel_for(f.size(), [&](int c) {
        out[c] = truncated_singular_at(f, K, eps, f.filtration->cell_mid(c));
    });
    return OpStepFunction(f.filtration, std::move(out));
}

// ---- quaternary martingales ----------------------------------------------

int quaternary_depth(const AtomicFiltration& f) {
    const int n = f.cell_count();
    int D = 0;
    long long m = 1;
    while (m < n) {
        m *= 4;
        ++D;
    }
    if (m != n) throw ResolutionError("expected 4^D cells, got " + std::to_string(n));
    const double h = f.total_measure() / n;
    for (int c = 0; c < n; ++c)
        if (std::abs(f.cell_length(c) - h) > 1e-9 * h) throw ResolutionError("expected equal cells");
    return D;
}

namespace {

struct OmegaView {
    int D = 0;  // depth of Omega relative to the cells
    long long first = 0;  // first cell
    long long count = 1;
    double h = 1.0;  // cell length
    double left = 0.0;
    double length = 1.0;
};

OmegaView view(const OpStepFunction& f, QuadInterval omega) {
    const int Dt = quaternary_depth(*f.filtration);
    if (omega.level < 0 || omega.level > Dt) throw ResolutionError("Omega is finer than the cells of f");
    if (omega.index < 0 || omega.index >= (1LL << (2 * omega.level))) throw ParameterError("Omega index out of range");
    OmegaView v;
    v.D = Dt - omega.level;
    v.count = 1LL << (2 * v.D);
    v.first = omega.index * v.count;
    v.h = f.filtration->total_measure() / static_cast<double>(f.size());
    v.left = f.filtration->left() + static_cast<double>(v.first) * v.h;
    v.length = static_cast<double>(v.count) * v.h;
    return v;
}

// Partial sums of sum_{I subset Omega} gamma <f, phi_I> psi_I by scale; fills
// the running maximum of their norms and the final sum.
void omega_sums(const OpStepFunction& f, const OmegaView& v, const CoefficientFn& c, std::vector<double>* G,
                std::vector<CMatrix>* last) {
    const int d = f.dim();
    std::vector<CMatrix> prefix(v.count + 1, CMatrix::Zero(d, d));
    for (long long i = 0; i < v.count; ++i) prefix[i + 1] = prefix[i] + f.values[v.first + i].matrix();
    std::vector<CMatrix> part(v.count, CMatrix::Zero(d, d));
    if (G) G->assign(v.count, 0.0);
    const auto phi = profile(ProfileKind::phi), psi = profile(ProfileKind::psi);
    for (int k = 0; k < v.D; ++k) {
        const long long sz = 1LL << (2 * (v.D - k)), qsz = sz / 4;
        const double len = static_cast<double>(sz) * v.h;
        const double scale = v.h / len;  // integral / sqrt|I| then psi / sqrt|I|
        for (long long I = 0; I < v.count / sz; ++I) {
            const double gm = c(len, v.left + static_cast<double>(I * sz) * v.h);
            if (gm == 0.0) continue;
            CMatrix coef = CMatrix::Zero(d, d);
            for (int j = 0; j < 4; ++j) {
                const long long a = I * sz + j * qsz;
                coef += phi.q[j] * (prefix[a + qsz] - prefix[a]);
            }
            coef *= gm * scale;
            for (int j = 0; j < 4; ++j)
                for (long long i = I * sz + j * qsz; i < I * sz + (j + 1) * qsz; ++i) part[i] += psi.q[j] * coef;
        }
        if (G)
            for (long long i = 0; i < v.count; ++i) (*G)[i] = std::max((*G)[i], opnorm(part[i]));
    }
    if (last) *last = std::move(part);
}

FiltrationPtr omega_filtration(const OmegaView& v) {
    std::vector<double> bp(v.count + 1);
    for (long long i = 0; i <= v.count; ++i) bp[i] = v.left + static_cast<double>(i) * v.h;
    bp.back() = v.left + v.length;
    std::vector<std::vector<int>> labels;
    labels.emplace_back(v.count, 0);
    for (int k = 0; k < v.D; ++k) {
        const long long sz = 1LL << (2 * (v.D - k)), qsz = sz / 4;
        std::vector<int> odd(v.count), even(v.count);
        for (long long i = 0; i < v.count; ++i) {
            const long long q = (i / qsz) % 4;
            odd[i] = static_cast<int>(2 * (i / sz) + ((q == 1 || q == 2) ? 1 : 0));
            even[i] = static_cast<int>(i / qsz);
        }
        labels.push_back(std::move(odd));
        labels.push_back(std::move(even));
    }
    return std::make_shared<const AtomicFiltration>(std::move(bp), std::move(labels));
}

}  // namespace

std::vector<double> omega_maximal(const OpStepFunction& f, QuadInterval omega, const CoefficientFn& c) {
    const auto v = view(f, omega);
    std::vector<double> G;
    omega_sums(f, v, c, &G, nullptr);
    return G;
}

OmegaMartingale omega_martingale(const OpStepFunction& f, QuadInterval omega, const CoefficientFn& c) {
    const auto v = view(f, omega);
    OmegaMartingale out;
    out.filtration = omega_filtration(v);
    std::vector<HermitianMatrix> fv(f.values.begin() + v.first, f.values.begin() + v.first + v.count);
    const OpStepFunction fo(out.filtration, std::move(fv));
    std::vector<CMatrix> gl;
    omega_sums(f, v, c, nullptr, &gl);
    std::vector<HermitianMatrix> gv;
    gv.reserve(gl.size());
    for (auto& m : gl) gv.push_back(HermitianMatrix::symmetrized(m));
    out.g_limit = OpStepFunction(out.filtration, std::move(gv));
    out.f = martingale(fo);
    out.g = martingale(out.g_limit);

    const auto df = out.f.differences();
    const auto dg = out.g.differences();
    const int d = f.dim();
    const auto& filt = *out.filtration;
    const HaarProfile phi = profile(ProfileKind::phi), psi = profile(ProfileKind::psi);
    const HaarProfile zin = profile(ProfileKind::zeta_inn), zout = profile(ProfileKind::zeta_out);
    const Prefix F(fo);

    // displayed expansions
    std::vector<std::vector<CMatrix>> edf(2 * v.D + 1, std::vector<CMatrix>(v.count, CMatrix::Zero(d, d)));
    auto edg = edf;
    edf[0].assign(v.count, F(v.left + v.length) / v.length);
    for (int k = 0; k < v.D; ++k) {
        const long long sz = 1LL << (2 * (v.D - k)), qsz = sz / 4;
        const double len = static_cast<double>(sz) * v.h;
        for (long long I = 0; I < v.count / sz; ++I) {
            const double a = v.left + static_cast<double>(I * sz) * v.h;
            const CMatrix cphi = coefficient(F, phi, a, len);
            // zeta_inn and zeta_out have squared norm 1/2 on the unit interval
            const CMatrix cin = coefficient(F, zin, a, len) / zin.l2_norm_sq();
            const CMatrix cout = coefficient(F, zout, a, len) / zout.l2_norm_sq();
            const double gm = c(len, a);
            for (int j = 0; j < 4; ++j) {
                for (long long i = I * sz + j * qsz; i < I * sz + (j + 1) * qsz; ++i) {
                    edf[2 * k + 1][i] = phi.q[j] / std::sqrt(len) * cphi;
                    edf[2 * k + 2][i] = (zin.q[j] * cin + zout.q[j] * cout) / std::sqrt(len);
                    edg[2 * k + 2][i] = gm * psi.q[j] / std::sqrt(len) * cphi;
                }
            }
        }
    }
    out.dg_bound_defect = -std::numeric_limits<double>::infinity();
    for (int n = 0; n <= 2 * v.D; ++n) {
        for (long long i = 0; i < v.count; ++i) {
            out.formula_defect = std::max(out.formula_defect, (df[n][i].matrix() - edf[n][i]).norm());
            out.formula_defect = std::max(out.formula_defect, (dg[n][i].matrix() - edg[n][i]).norm());
            if (n % 2 == 0 && n >= 2)
                out.dg_bound_defect =
                    std::max(out.dg_bound_defect, opnorm(dg[n][i].matrix()) - 7.0 * opnorm(df[n - 1][i].matrix()));
        }
        if (n >= 1) {
            for (int a = 0; a < filt.atom_count(n - 1); ++a) {
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                for (int i : filt.atom_cells(n - 1, a)) {
                    const double x = opnorm(df[n][i].matrix());
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
                out.predictability_defect = std::max(out.predictability_defect, hi - lo);
            }
        }
    }
    if (v.D == 0) out.dg_bound_defect = 0.0;
    return out;
}

WeakTypeReport weak_type_gOmega(const OpStepFunction& f, QuadInterval omega, const CoefficientFn& c) {
    const auto v = view(f, omega);
    std::vector<double> G;
    omega_sums(f, v, c, &G, nullptr);
    WeakTypeReport rep;
    detail::KahanSum l1;
    for (long long i = 0; i < v.count; ++i) l1.add(v.h * opnorm(f.values[v.first + i].matrix()));
    rep.f_l1 = l1.value();
    std::sort(G.begin(), G.end(), std::greater<>());
    for (std::size_t i = 0; i < G.size(); ++i)
        rep.quasinorm = std::max(rep.quasinorm, G[i] * static_cast<double>(i + 1) * v.h);
    rep.C_emp = rep.f_l1 > 0.0 ? rep.quasinorm / rep.f_l1 : 0.0;
    return rep;
}

double weak_constant_sweep(int depth, int trials, std::uint64_t seed, const CoefficientFn& c) {
    if (depth < 1 || trials < 1) throw ParameterError("weak_constant_sweep: need depth >= 1 and trials >= 1");
    const auto filt = AtomicFiltration::dyadic(2 * depth);
    std::vector<double> res(trials);
    detail::parallel_for(trials, [&](int t) {
        Rng rng(seed ^ static_cast<std::uint64_t>(t));
        std::vector<HermitianMatrix> vals;
        for (int i = 0; i < filt->cell_count(); ++i) vals.push_back(HermitianMatrix::scalar(rng.normal()));
        res[t] = weak_type_gOmega(OpStepFunction(filt, std::move(vals)), {0, 0}, c).C_emp;
    });
    return *std::max_element(res.begin(), res.end());
}

double weak_constant_search(int max_depth, int restarts, int iters, std::uint64_t seed, const CoefficientFn& c) {
    if (max_depth < 1 || restarts < 1 || iters < 10) throw ParameterError("weak_constant_search: bad budget");
    double best = 0.0;
    for (int D = 1; D <= max_depth; ++D) {
        const auto filt = AtomicFiltration::dyadic(2 * D);
        const int n = filt->cell_count();
        auto eval = [&](const std::vector<double>& x) {
            std::vector<HermitianMatrix> vals;
            vals.reserve(n);
            for (double v : x) vals.push_back(HermitianMatrix::scalar(v));
            return weak_type_gOmega(OpStepFunction(filt, std::move(vals)), {0, 0}, c).C_emp;
        };
        std::vector<double> res(restarts);
        detail::parallel_for(restarts, [&](int t) {
            Rng rng(seed ^ (static_cast<std::uint64_t>(D) << 32) ^ static_cast<std::uint64_t>(t));
            std::vector<double> x(n);
            for (auto& v : x) v = rng.normal();
            double cur = eval(x), step = 1.0;
            for (int it = 0; it < iters; ++it) {
                auto y = x;
                const auto k = rng.below(n);
                if (rng.uniform01() < 0.3)
                    y[k] = 0.0;
                else
                    y[k] += step * rng.normal();
                const double val = eval(y);
                if (val >= cur) {
                    cur = val;
                    x = std::move(y);
                }
                if ((it + 1) % (iters / 10) == 0) step *= 0.6;
            }
            res[t] = cur;
        });
        best = std::max(best, *std::max_element(res.begin(), res.end()));
    }
    return best;
}

StepsReport steps_ratio_report(const OpStepFunction& f, const GridSpec& g, const CoefficientFn& c, double p) {
    if (!(p > 1.0) || std::isinf(p)) throw ParameterError("steps_ratio_report: p must lie in (1, inf)");
    const auto phi = profile(ProfileKind::phi);
    StepsReport rep;
    rep.norm_psi = lp_norm(haar_shift(f, g, c, phi, profile(ProfileKind::psi)), p);
    rep.norm_zeta = lp_norm(haar_shift(f, g, c, phi, profile(ProfileKind::zeta)), p);
    rep.norm_phi = lp_norm(haar_shift(f, g, c, phi, phi), p);
    rep.norm_f = lp_norm(f, p);
    const double tiny = 1e-300;
    auto ratio = [&](double a, double b) {
        if (b > tiny) return a / b;
        return a > tiny ? std::numeric_limits<double>::infinity() : 1.0;
    };
    rep.ratio1 = ratio(rep.norm_psi, rep.norm_zeta);
    rep.ratio2 = ratio(rep.norm_zeta, rep.norm_phi);
    rep.ratio3 = ratio(rep.norm_phi, c.sup * rep.norm_f);
    return rep;
}

// ---- sparse domination ---------------------------------------------------

double SparseFamily::total_measure() const {
    double s = 0.0;
    for (const auto& m : members) s += m.length;
    return s / filtration->total_measure();
}

double SparseFamily::min_density() const {
    double r = std::numeric_limits<double>::infinity();
    for (const auto& m : members) r = std::min(r, m.E_measure / m.length);
    return r;
}

bool SparseFamily::disjoint() const {
    std::vector<char> seen(filtration->cell_count(), 0);
    for (const auto& m : members)
        for (int c : m.E) {
            if (seen[c]) return false;
            seen[c] = 1;
        }
    return true;
}

SparseFamily sparse_construct(const OpStepFunction& f, const CoefficientFn& c, double C_weak) {
    if (!(C_weak >= 0.0) || std::isinf(C_weak)) throw ParameterError("sparse_construct: C_weak must be finite and >= 0");
    const int Dt = quaternary_depth(*f.filtration);
    std::vector<double> norms(f.size());
    for (int i = 0; i < f.size(); ++i) norms[i] = opnorm(f.values[i].matrix());

    SparseFamily S;
    S.C_weak = C_weak;
    S.filtration = f.filtration;
    // pending[m]: indices at level m, processed level by level, left to right
    std::vector<std::vector<long long>> pending(Dt + 1);
    pending[0].push_back(0);
    for (int m = 0; m <= Dt; ++m) {
        std::sort(pending[m].begin(), pending[m].end());
        for (long long idx : pending[m]) {
            const QuadInterval om{m, idx};
            const auto v = view(f, om);
            SparseMember mem;
            mem.omega = om;
            mem.left = v.left;
            mem.length = v.length;
            detail::KahanSum s;
            for (long long i = 0; i < v.count; ++i) s.add(norms[v.first + i]);
            mem.average = s.value() / static_cast<double>(v.count);
            mem.lambda = 2.0 * C_weak * mem.average;
            std::vector<char> stop(v.count, 0);
            if (mem.lambda > 0.0) {
                std::vector<double> G;
                omega_sums(f, v, c, &G, nullptr);
                for (long long i = 0; i < v.count; ++i) stop[i] = G[i] >= mem.lambda;
            }
            long long kept = 0;
            for (long long i = 0; i < v.count; ++i)
                if (!stop[i]) {
                    mem.E.push_back(static_cast<int>(v.first + i));
                    ++kept;
                }
            mem.E_measure = static_cast<double>(kept) * v.h;
            if (2 * kept < v.count) {
                std::ostringstream os;
                os << "sparse_construct: |E(Omega)|/|Omega| = " << static_cast<double>(kept) / v.count
                   << " < 1/2 for Omega = [" << v.left << ", " << v.left + v.length << ") with C_weak = " << C_weak;
                throw ConstructionError(os.str());
            }
            // maximal quaternary intervals inside the stopping set
            std::vector<long long> cnt(v.count + 1, 0);
            for (long long i = 0; i < v.count; ++i) cnt[i + 1] = cnt[i] + stop[i];
            std::vector<std::pair<int, long long>> work;  // (relative level, relative index)
            for (long long q = 0; q < 4 && v.D > 0; ++q) work.push_back({1, q});
            while (!work.empty()) {
                const auto [j, q] = work.back();
                work.pop_back();
                const long long sz = 1LL << (2 * (v.D - j));
                const long long a = q * sz, hits = cnt[a + sz] - cnt[a];
                if (hits == 0) continue;
                if (hits == sz) {
                    pending[m + j].push_back(idx * (1LL << (2 * j)) + q);
                    continue;
                }
                for (long long r = 0; r < 4; ++r) work.push_back({j + 1, 4 * q + r});
            }
            S.members.push_back(std::move(mem));
        }
    }
    return S;
}

StepFunction sparse_operator(const OpStepFunction& f, const SparseFamily& S) {
    std::vector<double> A(f.size(), 0.0);
    const double h = f.filtration->total_measure() / f.size();
    for (const auto& m : S.members) {
        const auto first = static_cast<long long>(std::llround((m.left - f.filtration->left()) / h));
        const auto count = static_cast<long long>(std::llround(m.length / h));
        for (long long i = first; i < first + count; ++i) A[i] += m.average;
    }
    return StepFunction(f.filtration, std::move(A));
}

SparseDominationReport sparse_dominate_check(const OpStepFunction& f, const SparseFamily& S, const CoefficientFn& c) {
    const auto v = view(f, {0, 0});
    std::vector<CMatrix> g;
    omega_sums(f, v, c, nullptr, &g);
    const auto A = sparse_operator(f, S);
    SparseDominationReport rep;
    rep.constant = 2.0 * S.C_weak + 7.0;
    rep.max_slack = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < f.size(); ++i) {
        const double lhs = opnorm(g[i]), rhs = rep.constant * A[i];
        rep.max_lhs = std::max(rep.max_lhs, lhs);
        rep.max_rhs = std::max(rep.max_rhs, rhs);
        rep.max_slack = std::max(rep.max_slack, lhs - rhs);
    }
    rep.ok = rep.max_slack <= 1e-8;

    // the same with 7 avg over the dyadic parent of each non-root member
    std::vector<double> norms(f.size()), extra(f.size(), 0.0);
    for (int i = 0; i < f.size(); ++i) norms[i] = opnorm(f.values[i].matrix());
    for (const auto& m : S.members) {
        if (m.omega.level == 0) continue;
        const QuadInterval parent{m.omega.level - 1, m.omega.index / 4};
        const auto pv = view(f, parent), cv = view(f, m.omega);
        double s = 0.0;
        for (long long i = pv.first; i < pv.first + pv.count; ++i) s += norms[i];
        for (long long i = cv.first; i < cv.first + cv.count; ++i) extra[i] += 7.0 * s / static_cast<double>(pv.count);
    }
    rep.parent_slack = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < f.size(); ++i)
        rep.parent_slack = std::max(rep.parent_slack, opnorm(g[i]) - 2.0 * S.C_weak * A[i] - extra[i]);
    rep.parent_ok = rep.parent_slack <= 1e-8;
    return rep;
}

WeightedSparseReport weighted_sparse_bound(const OpStepFunction& f, const SparseFamily& S, double p, const Weight& w) {
    if (!(p >= 2.0) || std::isinf(p)) throw ParameterError("weighted_sparse_bound: p must lie in [2, inf)");
    if (w.filtration->breakpoints() != f.filtration->breakpoints())
        throw ParameterError("weighted_sparse_bound: w must live on the cells of f");
    const int n = f.size();
    const double pp = p / (p - 1.0);
    const auto& filt = *f.filtration;
    std::vector<double> F(n), v(n), delta(n);
    for (int i = 0; i < n; ++i) {
        F[i] = opnorm(f.values[i].matrix());
        v[i] = std::pow(w.values[i], 1.0 / (1.0 - p));
        delta[i] = filt.cell_length(i);
    }
    const auto A = sparse_operator(f, S);

    WeightedSparseReport rep;
    rep.p = p;
    rep.exponent = std::max(1.0 / (p - 1.0), 1.0);
    rep.constant = std::exp2(p - 1.0) * p * pp;
    const double h = filt.total_measure() / n;
    auto range = [&](const SparseMember& m) {
        const auto first = static_cast<int>(std::llround((m.left - filt.left()) / h));
        return std::pair{first, first + static_cast<int>(std::llround(m.length / h))};
    };
    double ch = ap_char(w, p);
    for (const auto& m : S.members) {
        const auto [a, b] = range(m);
        double wo = 0, vo = 0;
        for (int i = a; i < b; ++i) {
            wo += w.values[i] * delta[i];
            vo += v[i] * delta[i];
        }
        ch = std::max(ch, wo * std::pow(vo, p - 1.0) / std::pow(m.length, p));
    }
    rep.characteristic = ch;

    detail::KahanSum lhs, fn;
    for (int i = 0; i < n; ++i) {
        lhs.add(std::pow(A[i], p) * w.values[i] * delta[i]);
        fn.add(std::pow(F[i], p) * w.values[i] * delta[i]);
    }
    rep.lhs = std::pow(lhs.value(), 1.0 / p);
    rep.f_norm = std::pow(fn.value(), 1.0 / p);
    rep.ratio = rep.f_norm > 0.0 ? rep.lhs / rep.f_norm : 0.0;
    rep.rhs = rep.constant * std::pow(ch, rep.exponent) * rep.f_norm;
    rep.bound_ok = rep.lhs <= rep.rhs * (1.0 + 1e-6);
    if (!(rep.lhs > 0.0)) {
        rep.chain.assign(9, 0.0);
        return rep;
    }

    // extremal h for the duality L_p^w / L_{p'}^v
    std::vector<double> hx(n);
    detail::KahanSum hn;
    for (int i = 0; i < n; ++i) {
        hx[i] = std::pow(A[i], p - 1.0) * w.values[i] / std::pow(rep.lhs, p - 1.0);
        hn.add(std::pow(hx[i], pp) * v[i] * delta[i]);
    }
    const double h_norm = std::pow(hn.value(), 1.0 / pp);

    std::vector<int> inE(n, 0);
    detail::KahanSum c0, c1, c2, c3, c3b, c4, s5a, s5b;
    for (int i = 0; i < n; ++i) c0.add(A[i] * hx[i] * delta[i]);
    for (const auto& m : S.members) {
        const auto [a, b] = range(m);
        double wo = 0, vo = 0, fi = 0, hi = 0;
        for (int i = a; i < b; ++i) {
            wo += w.values[i] * delta[i];
            vo += v[i] * delta[i];
            fi += F[i] * delta[i];
            hi += hx[i] * delta[i];
        }
        double wE = 0, vE = 0, mE = 0;
        for (int i : m.E) {
            wE += w.values[i] * delta[i];
            vE += v[i] * delta[i];
            mE += delta[i];
        }
        const double Ev = fi / vo, Ew = hi / wo, L = m.length;
        c1.add(wo * std::pow(vo, p - 1.0) / std::pow(L, p) * std::pow(L, p - 1.0) * std::pow(vo, 2.0 - p) * Ev * Ew);
        c2.add(std::pow(L, p - 1.0) * std::pow(vo, 2.0 - p) * Ev * Ew);
        c3.add(std::pow(mE, p - 1.0) * std::pow(vo, 2.0 - p) * Ev * Ew);
        c3b.add(std::pow(mE, p - 1.0) * std::pow(vE, 2.0 - p) * Ev * Ew);
        c4.add(std::pow(vE, 1.0 / p) * std::pow(wE, 1.0 / pp) * Ev * Ew);
        s5a.add(std::pow(Ev, p) * vE);
        s5b.add(std::pow(Ew, pp) * wE);
    }
    const double k = std::exp2(p - 1.0) * ch;
    std::vector<double> fv(n), hw(n);
    for (int i = 0; i < n; ++i) {
        fv[i] = F[i] / v[i];
        hw[i] = hx[i] / w.values[i];
    }
    const Weight vw(f.filtration, v);
    const auto Mv = dyadic_maximal(StepFunction(f.filtration, fv), &vw);
    const auto Mw = dyadic_maximal(StepFunction(f.filtration, hw), &w);
    detail::KahanSum m1, m2;
    for (int i = 0; i < n; ++i) {
        m1.add(std::pow(Mv.values[i], p) * v[i] * delta[i]);
        m2.add(std::pow(Mw.values[i], pp) * w.values[i] * delta[i]);
    }
    rep.chain = {c0.value(),
                 c1.value(),
                 ch * c2.value(),
                 k * c3.value(),
                 k * c3b.value(),
                 k * c4.value(),
                 k * std::pow(s5a.value(), 1.0 / p) * std::pow(s5b.value(), 1.0 / pp),
                 k * std::pow(m1.value(), 1.0 / p) * std::pow(m2.value(), 1.0 / pp),
                 k * p * pp * rep.f_norm * h_norm};
    for (std::size_t i = 1; i < rep.chain.size(); ++i)
        if (rep.chain[i] < rep.chain[i - 1] * (1.0 - 1e-9)) rep.chain_ok = false;
    return rep;
}

}  // namespace ncmart
