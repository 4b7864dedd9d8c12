#pragma once

// Atomic filtrations on an interval and step functions living on their finest
// partition: conditional expectations, martingales, differences, transforms.
//
// A filtration is a list of partitions (levels 0..J) of the finest cells, each
// refining the previous one. Atoms need not be intervals (the Haar filtrations
// used for shift operators have atoms made of two disjoint quarters), so a
// level is stored as an atom label per finest cell.

#include <memory>
#include <span>
#include <vector>

#include "ncmart/matcore.hpp"

namespace ncmart {

class AtomicFiltration;
using FiltrationPtr = std::shared_ptr<const AtomicFiltration>;

class AtomicFiltration {
public:
    // Cells [breakpoints[i], breakpoints[i+1]); labels[n][cell] = atom id at level n.
    // Ids at each level must be 0..k-1 without gaps. The last level must put
    // every cell in its own atom. Throws ParameterError on any violation.
    AtomicFiltration(std::vector<double> breakpoints, std::vector<std::vector<int>> labels);

    // 2^n equal atoms at level n of [left, right).
    static FiltrationPtr dyadic(int depth, double left = 0.0, double right = 1.0);

    // Interval atoms from nested breakpoint lists: levels[n] holds the interior
    // cut points of level n (every cut point of level n must reappear at n+1).
    // The finest level's cuts define the cells.
    static FiltrationPtr from_cut_levels(double left, double right,
                                         const std::vector<std::vector<double>>& levels);

    // Two levels: the whole base and the given cells.
    static FiltrationPtr flat(std::vector<double> breakpoints);

    int depth() const { return static_cast<int>(labels_.size()) - 1; }
    int cell_count() const { return static_cast<int>(breakpoints_.size()) - 1; }
    double left() const { return breakpoints_.front(); }
    double right() const { return breakpoints_.back(); }
    double total_measure() const { return right() - left(); }

    double cell_left(int c) const { return breakpoints_[c]; }
    double cell_right(int c) const { return breakpoints_[c + 1]; }
    double cell_length(int c) const { return breakpoints_[c + 1] - breakpoints_[c]; }
    double cell_mid(int c) const { return 0.5 * (breakpoints_[c] + breakpoints_[c + 1]); }
    const std::vector<double>& breakpoints() const { return breakpoints_; }

    int atom_count(int level) const { return static_cast<int>(atoms_[checked(level)].size()); }
    int atom_of(int level, int cell) const { return labels_[checked(level)][cell]; }
    const std::vector<int>& labels(int level) const { return labels_[checked(level)]; }
    const std::vector<int>& atom_cells(int level, int atom) const { return atoms_[checked(level)][atom]; }
    double atom_measure(int level, int atom) const { return measures_[checked(level)][atom]; }

    // Index of the cell containing t, or -1 outside [left, right).
    int locate(double t) const;

private:
    int checked(int level) const;

    std::vector<double> breakpoints_;
    std::vector<std::vector<int>> labels_;
    std::vector<std::vector<std::vector<int>>> atoms_;
    std::vector<std::vector<double>> measures_;
};

// Real-valued step function on the finest cells.
struct StepFunction {
    FiltrationPtr filtration;
    std::vector<double> values;

    StepFunction() = default;
    StepFunction(FiltrationPtr f, std::vector<double> v);
    static StepFunction constant(FiltrationPtr f, double c);

    int size() const { return static_cast<int>(values.size()); }
    double operator[](int c) const { return values[c]; }
    double& operator[](int c) { return values[c]; }
};

// Hermitian-matrix-valued step function on the finest cells.
struct OpStepFunction {
    FiltrationPtr filtration;
    std::vector<HermitianMatrix> values;

    OpStepFunction() = default;
    OpStepFunction(FiltrationPtr f, std::vector<HermitianMatrix> v);
    static OpStepFunction constant(FiltrationPtr f, const HermitianMatrix& c);
    static OpStepFunction from_scalar(const StepFunction& s);

    int dim() const { return values.front().dim(); }
    int size() const { return static_cast<int>(values.size()); }
    const HermitianMatrix& operator[](int c) const { return values[c]; }
    HermitianMatrix& operator[](int c) { return values[c]; }

    // Entry (0,0) of each value; intended for d = 1.
    StepFunction scalar_part() const;
};

OpStepFunction operator+(const OpStepFunction& a, const OpStepFunction& b);
OpStepFunction operator-(const OpStepFunction& a, const OpStepFunction& b);
OpStepFunction operator*(double s, const OpStepFunction& a);
// Pointwise product with a central scalar function.
OpStepFunction operator*(const StepFunction& s, const OpStepFunction& a);

// Averages over the atoms of a level: result[atom].
std::vector<double> atom_averages(const StepFunction& f, int level);
std::vector<HermitianMatrix> atom_averages(const OpStepFunction& f, int level);

StepFunction cond_exp(const StepFunction& f, int level);
OpStepFunction cond_exp(const OpStepFunction& f, int level);

// Is f constant on every atom of the level (Frobenius tolerance)?
bool is_measurable(const OpStepFunction& f, int level, double tol = 1e-10);
bool is_measurable(const StepFunction& f, int level, double tol = 1e-10);

// Integral against the base measure.
double integral(const StepFunction& f);
// Integral of the (unnormalized) trace.
double trace_integral(const OpStepFunction& f);

// x_n = E_n(f) for n = 0..J.
struct MartingaleSeq {
    std::vector<OpStepFunction> terms;

    int depth() const { return static_cast<int>(terms.size()) - 1; }
    // dx_0 = x_0, dx_n = x_n - x_{n-1}.
    std::vector<OpStepFunction> differences() const;
    static MartingaleSeq from_differences(const std::vector<OpStepFunction>& diffs);
};

MartingaleSeq martingale(const OpStepFunction& f);

// dy_n = eps_n dx_n; eps must have J+1 entries in [-1, 1].
MartingaleSeq transform(const MartingaleSeq& m, std::span<const double> eps);

// Weighted L_p norm of the last term, trace convention, weight 1.
double lp_norm(const OpStepFunction& f, double p);

}  // namespace ncmart
