#include "ncmart/filtration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "ncmart/detail/kahan.hpp"
#include "ncmart/error.hpp"

namespace ncmart {

AtomicFiltration::AtomicFiltration(std::vector<double> breakpoints, std::vector<std::vector<int>> labels)
    : breakpoints_(std::move(breakpoints)), labels_(std::move(labels)) {
    if (breakpoints_.size() < 2) throw ParameterError("AtomicFiltration: need at least one cell");
    for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i) {
        if (!(breakpoints_[i + 1] > breakpoints_[i]) || !std::isfinite(breakpoints_[i + 1]))
            throw ParameterError("AtomicFiltration: cells must have positive finite length");
    }
    if (labels_.empty()) throw ParameterError("AtomicFiltration: need at least one level");
    const int cells = cell_count();
    atoms_.resize(labels_.size());
    measures_.resize(labels_.size());
    for (std::size_t n = 0; n < labels_.size(); ++n) {
        const auto& lab = labels_[n];
        if (static_cast<int>(lab.size()) != cells)
            throw ParameterError("AtomicFiltration: label count differs from cell count");
        const int k = *std::max_element(lab.begin(), lab.end()) + 1;
        auto& atoms = atoms_[n];
        atoms.assign(k, {});
        for (int c = 0; c < cells; ++c) {
            if (lab[c] < 0) throw ParameterError("AtomicFiltration: negative atom label");
            atoms[lab[c]].push_back(c);
        }
        measures_[n].assign(k, 0.0);
        for (int a = 0; a < k; ++a) {
            if (atoms[a].empty()) throw ParameterError("AtomicFiltration: atom labels must be contiguous");
            detail::KahanSum s;
            for (int c : atoms[a]) s.add(cell_length(c));
            measures_[n][a] = s.value();
        }
        if (n > 0) {
            // Each atom at level n sits inside exactly one atom of level n-1.
            const auto& prev = labels_[n - 1];
            for (const auto& atom : atoms) {
                for (int c : atom) {
                    if (prev[c] != prev[atom.front()])
                        throw ParameterError("AtomicFiltration: level does not refine its predecessor");
                }
            }
        }
    }
    if (atom_count(depth()) != cells)
        throw ParameterError("AtomicFiltration: finest level must consist of the cells");
}

int AtomicFiltration::checked(int level) const {
    if (level < 0 || level > depth()) {
        std::ostringstream os;
        os << "AtomicFiltration: level " << level << " outside [0, " << depth() << "]";
        throw ParameterError(os.str());
    }
    return level;
}

int AtomicFiltration::locate(double t) const {
    if (t < left() || t >= right()) return -1;
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return static_cast<int>(it - breakpoints_.begin()) - 1;
}

FiltrationPtr AtomicFiltration::dyadic(int depth, double left, double right) {
    if (depth < 0) throw ParameterError("dyadic: depth must be >= 0");
    if (depth > 24) throw ParameterError("dyadic: depth too large");
    if (!(right > left)) throw ParameterError("dyadic: empty base interval");
    const int cells = 1 << depth;
    std::vector<double> bp(cells + 1);
    for (int i = 0; i <= cells; ++i) bp[i] = left + (right - left) * static_cast<double>(i) / cells;
    bp.back() = right;
    std::vector<std::vector<int>> labels(depth + 1, std::vector<int>(cells));
    for (int n = 0; n <= depth; ++n)
        for (int c = 0; c < cells; ++c) labels[n][c] = c >> (depth - n);
    return std::make_shared<const AtomicFiltration>(std::move(bp), std::move(labels));
}

FiltrationPtr AtomicFiltration::from_cut_levels(double left, double right,
                                                const std::vector<std::vector<double>>& levels) {
    if (levels.empty()) throw ParameterError("from_cut_levels: need at least one level");
    std::vector<double> bp;
    bp.push_back(left);
    for (double c : levels.back()) bp.push_back(c);
    bp.push_back(right);
    std::sort(bp.begin(), bp.end());
    std::vector<std::vector<int>> labels(levels.size(), std::vector<int>(bp.size() - 1));
    for (std::size_t n = 0; n < levels.size(); ++n) {
        std::vector<double> cuts = levels[n];
        std::sort(cuts.begin(), cuts.end());
        for (double c : cuts) {
            if (!std::binary_search(bp.begin(), bp.end(), c))
                throw ParameterError("from_cut_levels: cut missing from the finest level");
        }
        for (std::size_t c = 0; c + 1 < bp.size(); ++c) {
            // atom id = number of cuts at or left of the cell's left endpoint
            labels[n][c] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), bp[c]) - cuts.begin());
        }
    }
    return std::make_shared<const AtomicFiltration>(std::move(bp), std::move(labels));
}

FiltrationPtr AtomicFiltration::flat(std::vector<double> breakpoints) {
    const int cells = static_cast<int>(breakpoints.size()) - 1;
    if (cells < 1) throw ParameterError("flat: need at least one cell");
    std::vector<std::vector<int>> labels(2, std::vector<int>(cells, 0));
    for (int c = 0; c < cells; ++c) labels[1][c] = c;
    return std::make_shared<const AtomicFiltration>(std::move(breakpoints), std::move(labels));
}

StepFunction::StepFunction(FiltrationPtr f, std::vector<double> v) : filtration(std::move(f)), values(std::move(v)) {
    if (!filtration) throw ParameterError("StepFunction: null filtration");
    if (static_cast<int>(values.size()) != filtration->cell_count())
        throw ParameterError("StepFunction: value count differs from cell count");
}

StepFunction StepFunction::constant(FiltrationPtr f, double c) {
    const int n = f->cell_count();
    return StepFunction(std::move(f), std::vector<double>(n, c));
}

OpStepFunction::OpStepFunction(FiltrationPtr f, std::vector<HermitianMatrix> v)
    : filtration(std::move(f)), values(std::move(v)) {
    if (!filtration) throw ParameterError("OpStepFunction: null filtration");
    if (static_cast<int>(values.size()) != filtration->cell_count())
        throw ParameterError("OpStepFunction: value count differs from cell count");
    for (const auto& m : values) {
        if (m.dim() != values.front().dim()) throw ParameterError("OpStepFunction: mixed dimensions");
    }
}

OpStepFunction OpStepFunction::constant(FiltrationPtr f, const HermitianMatrix& c) {
    const int n = f->cell_count();
    return OpStepFunction(std::move(f), std::vector<HermitianMatrix>(n, c));
}

OpStepFunction OpStepFunction::from_scalar(const StepFunction& s) {
    std::vector<HermitianMatrix> v;
    v.reserve(s.values.size());
    for (double x : s.values) v.push_back(HermitianMatrix::scalar(x));
    return OpStepFunction(s.filtration, std::move(v));
}

StepFunction OpStepFunction::scalar_part() const {
    std::vector<double> v(values.size());
    for (std::size_t c = 0; c < values.size(); ++c) v[c] = values[c](0, 0).real();
    return StepFunction(filtration, std::move(v));
}

namespace {

void require_same(const FiltrationPtr& a, const FiltrationPtr& b) {
    if (a.get() != b.get() && a->breakpoints() != b->breakpoints())
        throw ParameterError("step functions live on different grids");
}

}  // namespace

OpStepFunction operator+(const OpStepFunction& a, const OpStepFunction& b) {
    require_same(a.filtration, b.filtration);
    OpStepFunction out = a;
    for (int c = 0; c < out.size(); ++c) out.values[c] += b.values[c];
    return out;
}

OpStepFunction operator-(const OpStepFunction& a, const OpStepFunction& b) {
    require_same(a.filtration, b.filtration);
    OpStepFunction out = a;
    for (int c = 0; c < out.size(); ++c) out.values[c] -= b.values[c];
    return out;
}

OpStepFunction operator*(double s, const OpStepFunction& a) {
    OpStepFunction out = a;
    for (auto& v : out.values) v *= s;
    return out;
}

OpStepFunction operator*(const StepFunction& s, const OpStepFunction& a) {
    require_same(s.filtration, a.filtration);
    OpStepFunction out = a;
    for (int c = 0; c < out.size(); ++c) out.values[c] *= s.values[c];
    return out;
}

std::vector<double> atom_averages(const StepFunction& f, int level) {
    const auto& filt = *f.filtration;
    const int k = filt.atom_count(level);
    std::vector<double> out(k);
    for (int a = 0; a < k; ++a) {
        detail::KahanSum s;
        for (int c : filt.atom_cells(level, a)) s.add(filt.cell_length(c) * f.values[c]);
        out[a] = s.value() / filt.atom_measure(level, a);
    }
    return out;
}

std::vector<HermitianMatrix> atom_averages(const OpStepFunction& f, int level) {
    const auto& filt = *f.filtration;
    const int k = filt.atom_count(level);
    const int d = f.dim();
    std::vector<HermitianMatrix> out;
    out.reserve(k);
    for (int a = 0; a < k; ++a) {
        detail::MatrixKahanSum<CMatrix> s(CMatrix::Zero(d, d));
        for (int c : filt.atom_cells(level, a)) s.add(filt.cell_length(c) * f.values[c].matrix());
        out.push_back(HermitianMatrix::symmetrized(s.value() / filt.atom_measure(level, a)));
    }
    return out;
}

StepFunction cond_exp(const StepFunction& f, int level) {
    const auto avg = atom_averages(f, level);
    const auto& lab = f.filtration->labels(level);
    std::vector<double> v(lab.size());
    for (std::size_t c = 0; c < lab.size(); ++c) v[c] = avg[lab[c]];
    return StepFunction(f.filtration, std::move(v));
}

OpStepFunction cond_exp(const OpStepFunction& f, int level) {
    if (level == f.filtration->depth()) return f;
    const auto avg = atom_averages(f, level);
    const auto& lab = f.filtration->labels(level);
    std::vector<HermitianMatrix> v;
    v.reserve(lab.size());
    for (int a : lab) v.push_back(avg[a]);
    return OpStepFunction(f.filtration, std::move(v));
}

bool is_measurable(const OpStepFunction& f, int level, double tol) {
    const auto& filt = *f.filtration;
    for (int a = 0; a < filt.atom_count(level); ++a) {
        const auto& cells = filt.atom_cells(level, a);
        for (int c : cells) {
            if (frobenius_distance(f.values[c], f.values[cells.front()]) > tol) return false;
        }
    }
    return true;
}

bool is_measurable(const StepFunction& f, int level, double tol) {
    const auto& filt = *f.filtration;
    for (int a = 0; a < filt.atom_count(level); ++a) {
        const auto& cells = filt.atom_cells(level, a);
        for (int c : cells) {
            if (std::abs(f.values[c] - f.values[cells.front()]) > tol) return false;
        }
    }
    return true;
}

double integral(const StepFunction& f) {
    detail::KahanSum s;
    for (int c = 0; c < f.size(); ++c) s.add(f.filtration->cell_length(c) * f.values[c]);
    return s.value();
}

double trace_integral(const OpStepFunction& f) {
    detail::KahanSum s;
    for (int c = 0; c < f.size(); ++c) s.add(f.filtration->cell_length(c) * f.values[c].trace());
    return s.value();
}

std::vector<OpStepFunction> MartingaleSeq::differences() const {
    std::vector<OpStepFunction> out;
    out.reserve(terms.size());
    for (std::size_t n = 0; n < terms.size(); ++n) out.push_back(n == 0 ? terms[0] : terms[n] - terms[n - 1]);
    return out;
}

MartingaleSeq MartingaleSeq::from_differences(const std::vector<OpStepFunction>& diffs) {
    MartingaleSeq m;
    for (std::size_t n = 0; n < diffs.size(); ++n) m.terms.push_back(n == 0 ? diffs[0] : m.terms.back() + diffs[n]);
    return m;
}

MartingaleSeq martingale(const OpStepFunction& f) {
    MartingaleSeq m;
    const int depth = f.filtration->depth();
    m.terms.reserve(depth + 1);
    for (int n = 0; n <= depth; ++n) m.terms.push_back(cond_exp(f, n));
    return m;
}

MartingaleSeq transform(const MartingaleSeq& m, std::span<const double> eps) {
    if (static_cast<int>(eps.size()) != m.depth() + 1)
        throw ParameterError("transform: need one multiplier per martingale term");
    for (double e : eps) {
        if (!(std::abs(e) <= 1.0)) throw ParameterError("transform: multipliers must lie in [-1, 1]");
    }
    auto diffs = m.differences();
    for (std::size_t n = 0; n < diffs.size(); ++n) diffs[n] = eps[n] * diffs[n];
    return MartingaleSeq::from_differences(diffs);
}

double lp_norm(const OpStepFunction& f, double p) {
    if (!(p >= 1.0) || std::isinf(p)) throw ParameterError("lp_norm: p must lie in [1, inf)");
    detail::KahanSum s;
    for (int c = 0; c < f.size(); ++c) {
        const double sp = schatten_norm(f.values[c], p);
        s.add(f.filtration->cell_length(c) * std::pow(sp, p));
    }
    return std::pow(s.value(), 1.0 / p);
}

}  // namespace ncmart
