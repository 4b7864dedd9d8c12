#include "ncmart/weights.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ncmart/detail/kahan.hpp"
#include "ncmart/error.hpp"

namespace ncmart {

Weight::Weight(FiltrationPtr f, std::vector<double> v) : filtration(std::move(f)), values(std::move(v)) {
    if (!filtration) throw ParameterError("Weight: null filtration");
    if (static_cast<int>(values.size()) != filtration->cell_count())
        throw ParameterError("Weight: value count differs from cell count");
    for (double x : values) {
        if (!(x > 0.0) || !std::isfinite(x)) throw ParameterError("Weight: values must be positive and finite");
    }
}

Weight Weight::constant(FiltrationPtr f, double c) {
    const int n = f->cell_count();
    return Weight(std::move(f), std::vector<double>(n, c));
}

Weight Weight::pow(double e) const {
    std::vector<double> v(values.size());
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = std::pow(values[c], e);
    return Weight(filtration, std::move(v));
}

double ap_char_level(const Weight& w, double p, int level) {
    if (!(p > 1.0)) throw ParameterError("ap_char: p must exceed 1");
    const auto avg_w = atom_averages(w.as_step(), level);
    const auto avg_v = atom_averages(w.pow(1.0 / (1.0 - p)).as_step(), level);
    double best = 0.0;
    for (std::size_t a = 0; a < avg_w.size(); ++a) best = std::max(best, avg_w[a] * std::pow(avg_v[a], p - 1.0));
    return best;
}

double ap_char(const Weight& w, double p) {
    double best = 0.0;
    for (int n = 0; n <= w.filtration->depth(); ++n) best = std::max(best, ap_char_level(w, p, n));
    return best;
}

double a1_char(const Weight& w) {
    const auto& filt = *w.filtration;
    double best = 0.0;
    for (int n = 0; n <= filt.depth(); ++n) {
        const auto avg = atom_averages(w.as_step(), n);
        for (int a = 0; a < filt.atom_count(n); ++a) {
            double lo = std::numeric_limits<double>::infinity();
            for (int c : filt.atom_cells(n, a)) lo = std::min(lo, w.values[c]);
            best = std::max(best, avg[a] / lo);
        }
    }
    return best;
}

Weight dual_weight(const Weight& w, double p) {
    if (!(p > 1.0)) throw ParameterError("dual_weight: p must exceed 1");
    return w.pow(1.0 / (1.0 - p));
}

double weighted_trace(const OpStepFunction& f, const Weight& w) {
    detail::KahanSum s;
    for (int c = 0; c < f.size(); ++c) s.add(f.filtration->cell_length(c) * f.values[c].trace() * w.values[c]);
    return s.value();
}

double weighted_lp_norm(const OpStepFunction& f, double p, const Weight& w) {
    if (!(p >= 1.0) || std::isinf(p)) throw ParameterError("weighted_lp_norm: p must lie in [1, inf)");
    detail::KahanSum s;
    for (int c = 0; c < f.size(); ++c)
        s.add(f.filtration->cell_length(c) * std::pow(schatten_norm(f.values[c], p), p) * w.values[c]);
    return std::pow(s.value(), 1.0 / p);
}

double weighted_lp_norm(const StepFunction& f, double p, const Weight& w) {
    if (!(p >= 1.0) || std::isinf(p)) throw ParameterError("weighted_lp_norm: p must lie in [1, inf)");
    detail::KahanSum s;
    for (int c = 0; c < f.size(); ++c)
        s.add(f.filtration->cell_length(c) * std::pow(std::abs(f.values[c]), p) * w.values[c]);
    return std::pow(s.value(), 1.0 / p);
}

double lp_norm(const StepFunction& f, double p) {
    return weighted_lp_norm(f, p, Weight::constant(f.filtration));
}

OpStepFunction weighted_cond_exp(const OpStepFunction& f, int level, const Weight& w) {
    const auto ws = w.as_step();
    OpStepFunction num = cond_exp(ws * f, level);
    const auto den = cond_exp(ws, level);
    for (int c = 0; c < num.size(); ++c) num.values[c] *= 1.0 / den.values[c];
    return num;
}

StepFunction weighted_cond_exp(const StepFunction& f, int level, const Weight& w) {
    std::vector<double> fw(f.values.size());
    for (std::size_t c = 0; c < fw.size(); ++c) fw[c] = f.values[c] * w.values[c];
    auto num = cond_exp(StepFunction(f.filtration, std::move(fw)), level);
    const auto den = cond_exp(w.as_step(), level);
    for (int c = 0; c < num.size(); ++c) num.values[c] /= den.values[c];
    return num;
}

NonhomogWeight nonhomog_weight(int N) {
    if (N < 1) throw ParameterError("nonhomog_weight: N must be >= 1");
    std::vector<double> a(N + 1);
    std::vector<double> fact(N + 1);
    a[0] = 1.0;
    fact[0] = 1.0;
    for (int n = 1; n <= N; ++n) {
        fact[n] = fact[n - 1] * n;
        a[n] = a[n - 1] / (2.0 * n);
    }
    if (!(a[N] >= std::numeric_limits<double>::min()) || !std::isfinite(fact[N])) {
        std::ostringstream os;
        os << "nonhomog_weight: N = " << N << " underflows a_N = 2^-N/N! in double precision";
        throw ParameterError(os.str());
    }
    std::vector<std::vector<double>> levels(N + 1);
    for (int n = 0; n <= N; ++n)
        for (int k = 1; k <= n; ++k) levels[n].push_back(a[k]);
    auto filt = AtomicFiltration::from_cut_levels(0.0, 1.0, levels);
    // cells in increasing order: core [0,a_N), then [a_{n+1}, a_n) for n = N-1..0
    std::vector<double> v;
    v.push_back(fact[N]);
    for (int n = N - 1; n >= 0; --n) v.push_back(fact[n]);
    Weight w(filt, std::move(v));
    return {filt, std::move(w), std::move(a)};
}

double nonhomog_power_series(double alpha, int N) {
    if (N < 0) throw ParameterError("nonhomog_power_series: N must be >= 0");
    double s = 0.0;
    for (int n = 0; n <= N; ++n) {
        const double lf = std::lgamma(n + 1.0);
        s += std::exp(alpha * lf + std::log(2.0 * n + 1.0) - (n + 1) * std::log(2.0) - std::lgamma(n + 2.0));
    }
    return s;
}

StepFunction dyadic_maximal(const StepFunction& f, const Weight* u) {
    const auto& filt = *f.filtration;
    const int cells = f.size();
    std::vector<double> fu(cells);
    for (int c = 0; c < cells; ++c) {
        if (f.values[c] < 0.0) throw ParameterError("dyadic_maximal: f must be nonnegative");
        fu[c] = u ? f.values[c] * u->values[c] : f.values[c];
    }
    const StepFunction fus(f.filtration, std::move(fu));
    std::vector<double> out(cells, 0.0);
    for (int n = 0; n <= filt.depth(); ++n) {
        auto num = atom_averages(fus, n);
        if (u) {
            const auto den = atom_averages(u->as_step(), n);
            for (std::size_t a = 0; a < num.size(); ++a) num[a] /= den[a];
        }
        const auto& lab = filt.labels(n);
        for (int c = 0; c < cells; ++c) out[c] = std::max(out[c], num[lab[c]]);
    }
    return StepFunction(f.filtration, std::move(out));
}

Weight power_weight(FiltrationPtr f, double exponent, std::optional<double> floor) {
    double fl = 0.0;
    if (floor) {
        fl = *floor;
    } else {
        fl = std::numeric_limits<double>::infinity();
        for (int c = 0; c < f->cell_count(); ++c) fl = std::min(fl, f->cell_length(c));
    }
    if (!(fl > 0.0)) throw ParameterError("power_weight: floor must be positive");
    std::vector<double> v(f->cell_count());
    for (int c = 0; c < f->cell_count(); ++c) v[c] = std::pow(std::max(f->cell_mid(c) - f->left(), fl), exponent);
    return Weight(std::move(f), std::move(v));
}

Weight dyadic_power_weight(FiltrationPtr f, double eps) {
    if (!(eps > 0.0) || eps > 1.0) throw ParameterError("dyadic_power_weight: eps must lie in (0, 1]");
    return power_weight(std::move(f), eps - 1.0);
}

Weight random_loguniform_weight(FiltrationPtr f, double sigma, Rng& rng) {
    std::vector<double> v(f->cell_count());
    for (auto& x : v) x = std::exp(sigma * rng.uniform(-1.0, 1.0));
    return Weight(std::move(f), std::move(v));
}

void write_weight_csv(std::ostream& os, const Weight& w) {
    const auto& filt = *w.filtration;
    const auto old = os.precision(17);
    os << "left,length,value\n";
    for (int c = 0; c < w.size(); ++c) os << filt.cell_left(c) << ',' << filt.cell_length(c) << ',' << w.values[c] << '\n';
    os.precision(old);
}

Weight read_weight_csv(std::istream& is, FiltrationPtr filtration) {
    std::string line;
    if (!std::getline(is, line)) throw ParameterError("read_weight_csv: empty input");
    std::vector<double> left, length, value;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double l, len, v;
        if (!(ls >> l >> len >> v)) {
            std::ostringstream os;
            os << "read_weight_csv: malformed row " << lineno;
            throw ParameterError(os.str());
        }
        left.push_back(l);
        length.push_back(len);
        value.push_back(v);
    }
    if (left.empty()) throw ParameterError("read_weight_csv: no rows");
    std::vector<double> bp(left);
    bp.push_back(left.back() + length.back());
    for (std::size_t i = 0; i + 1 < left.size(); ++i) {
        const double end = left[i] + length[i];
        if (std::abs(end - left[i + 1]) > 1e-12 * std::max(1.0, std::abs(end)))
            throw ParameterError("read_weight_csv: cells are not contiguous");
    }
    if (!filtration) {
        filtration = AtomicFiltration::flat(std::move(bp));
    } else {
        if (filtration->cell_count() != static_cast<int>(left.size()))
            throw ParameterError("read_weight_csv: cell count differs from the filtration");
        for (int c = 0; c < filtration->cell_count(); ++c) {
            if (std::abs(filtration->cell_left(c) - left[c]) > 1e-12 * std::max(1.0, std::abs(left[c])))
                throw ParameterError("read_weight_csv: cells differ from the filtration");
        }
    }
    return Weight(std::move(filtration), std::move(value));
}

namespace {

using Vec = std::vector<double>;

class RdfOperator {
public:
    RdfOperator(const Weight& w, double p) : filt_(w.filtration), p_(p), wp_(w.size()), wm_(w.size()) {
        for (int c = 0; c < w.size(); ++c) {
            wp_[c] = std::pow(w.values[c], 1.0 / p);
            wm_[c] = 1.0 / wp_[c];
        }
    }

    Vec maximal(const Vec& f) const { return dyadic_maximal(StepFunction(filt_, f)).values; }

    Vec apply(const Vec& f) const {
        const std::size_t n = f.size();
        Vec a(n), b(n);
        for (std::size_t c = 0; c < n; ++c) {
            a[c] = std::pow(f[c], p_ - 1.0) * wp_[c];
            b[c] = f[c] * wm_[c];
        }
        const Vec ma = maximal(a);
        const Vec mb = maximal(b);
        Vec out(n);
        for (std::size_t c = 0; c < n; ++c)
            out[c] = std::pow(wm_[c] * ma[c], 1.0 / (p_ - 1.0)) + wp_[c] * mb[c];
        return out;
    }

    double norm(const Vec& f) const { return lp_norm(StepFunction(filt_, f), p_); }

private:
    FiltrationPtr filt_;
    double p_;
    Vec wp_;
    Vec wm_;
};

FactorizationResult factorize_direct(const Weight& w, double p, int n_iter, const StepFunction& psi,
                                     std::optional<double> t_norm, std::uint64_t seed) {
    const RdfOperator T(w, p);
    const int cells = w.size();
    Vec psi_v = psi.values;
    for (double x : psi_v) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw ParameterError("rdf_factorize: psi must be nonnegative");
    }
    const double psi_norm = T.norm(psi_v);
    if (!(psi_norm > 0.0)) throw ParameterError("rdf_factorize: psi must be nonzero");
    for (auto& x : psi_v) x /= psi_norm;

    double t = 0.0;
    if (t_norm) {
        t = *t_norm;
    } else {
        // power iteration plus random nonnegative probes and cell indicators
        Vec f = psi_v;
        for (int k = 0; k < 60; ++k) {
            Vec g = T.apply(f);
            const double ng = T.norm(g);
            t = std::max(t, ng / T.norm(f));
            for (auto& x : g) x /= ng;
            f = std::move(g);
        }
        Rng rng(seed);
        for (int k = 0; k < 32; ++k) {
            Vec g(cells);
            for (auto& x : g) x = rng.uniform01();
            t = std::max(t, T.norm(T.apply(g)) / T.norm(g));
        }
        const int probes = std::min(cells, 256);
        for (int k = 0; k < probes; ++k) {
            const int c = cells <= 256 ? k : static_cast<int>(rng.below(cells));
            Vec g(cells, 0.0);
            g[c] = 1.0;
            t = std::max(t, T.norm(T.apply(g)) / T.norm(g));
        }
    }
    if (!(t > 0.0) || !std::isfinite(t)) throw ParameterError("rdf_factorize: t_norm must be positive");

    Vec phi(cells, 0.0);
    Vec term = psi_v;
    for (int n = 1; n <= n_iter; ++n) {
        term = T.apply(term);
        for (auto& x : term) x /= 2.0 * t;
        for (int c = 0; c < cells; ++c) phi[c] += term[c];
    }

    FactorizationResult r;
    r.p = p;
    r.iterations = n_iter;
    r.t_norm = t;
    const double phi_norm = T.norm(phi);
    r.tail_ratio = phi_norm > 0.0 ? T.norm(term) / phi_norm : 0.0;
    if (!(r.tail_ratio <= 1e-8)) {
        r.converged = false;
        std::ostringstream os;
        os << "series tail ratio " << r.tail_ratio << " after " << n_iter << " terms";
        r.warning = os.str();
    }
    Vec w1(cells), w2(cells);
    for (int c = 0; c < cells; ++c) {
        const double wp = std::pow(w.values[c], 1.0 / p);
        w1[c] = wp * std::pow(phi[c], p - 1.0);
        w2[c] = phi[c] / wp;
    }
    r.w1 = Weight(w.filtration, std::move(w1));
    r.w2 = Weight(w.filtration, std::move(w2));
    r.bound_w1 = std::pow(2.0 * t, p - 1.0);
    r.bound_w2 = 2.0 * t;
    return r;
}

double max_maximal_ratio(const Weight& u) {
    const auto m = dyadic_maximal(u.as_step());
    double best = 0.0;
    for (int c = 0; c < u.size(); ++c) best = std::max(best, m.values[c] / u.values[c]);
    return best;
}

}  // namespace

FactorizationResult rdf_factorize(const Weight& w, double p, int n_iter, const StepFunction& psi,
                                  std::optional<double> t_norm, std::uint64_t seed) {
    if (!(p > 1.0)) throw ParameterError("rdf_factorize: p must exceed 1");
    if (n_iter < 1) throw ParameterError("rdf_factorize: n_iter must be >= 1");
    FactorizationResult r;
    if (p >= 2.0) {
        r = factorize_direct(w, p, n_iter, psi, t_norm, seed);
    } else {
        // v = w^{1/(1-p)} in A_{p'}; v = v1 v2^{1-p'} gives w = v2 v1^{1-p}.
        const double q = p / (p - 1.0);
        auto d = factorize_direct(dual_weight(w, p), q, n_iter, psi, t_norm, seed);
        r = d;
        r.p = p;
        r.w1 = d.w2;
        r.w2 = d.w1;
        r.bound_w1 = d.bound_w2;
        r.bound_w2 = d.bound_w1;
    }
    double err = 0.0;
    for (int c = 0; c < w.size(); ++c) {
        const double rec = r.w1.values[c] * std::pow(r.w2.values[c], 1.0 - p);
        err = std::max(err, std::abs(rec - w.values[c]) / w.values[c]);
    }
    r.identity_error = err;
    r.max_ratio_w1 = max_maximal_ratio(r.w1);
    r.max_ratio_w2 = max_maximal_ratio(r.w2);
    return r;
}

}  // namespace ncmart
