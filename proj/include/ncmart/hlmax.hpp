#pragma once

// Ball averages on a window of the real line, their domination by conditional
// expectations over three shifted dyadic grids, and the weighted weak/strong
// maximal inequalities built from them.

#include <vector>

#include "ncmart/doob.hpp"
#include "ncmart/filtration.hpp"
#include "ncmart/weights.hpp"

namespace ncmart {

struct GridFamily {
    double L = 1.0;  // window [-L, L)
    int J = 1;
    double margin = 0.25;  // L/4
    // Each grid: level 0 is the window, levels 1..J+1 have atoms of length
    // L 2^{-k} (k = level - 1) cut at L 2^{-k} (m + (-1)^k j/3), and the last
    // level is the common lattice of step L 2^{-J}/3. All grids share cells.
    std::vector<FiltrationPtr> grids;
    std::vector<double> shifts;  // j/3
    double C_contain = 1.0;

    int grid_count() const { return static_cast<int>(grids.size()); }
    const FiltrationPtr& cells() const { return grids.front(); }
    double safe_lo() const { return -L + margin; }
    double safe_hi() const { return L - margin; }
};

struct Containment {
    int grid = -1;
    int level = -1;
    int atom = -1;
    double measure = 0.0;
    double ratio = 0.0;  // measure / |ball|
};

// Smallest grid atom containing [x - r, x + r), over all grids.
Containment find_container(const GridFamily& g, double x, double r);

// Ball mesh used to certify the containment constant, with delta = L 2^{-J}/3
// the lattice step: centres at step delta/2, radii k delta/2 for 6 <= k <= 96
// then geometric with ratio 2^{1/8}; only balls inside the safe subwindow.
struct Ball {
    double x;
    double r;
};
std::vector<Ball> containment_mesh(const GridFamily& g);

// L must be a power of two and J >= 1. C_contain is the largest ratio over
// the mesh; a ratio above 8 raises ConstructionError.
GridFamily adjacent_grids(double L, int J);

// A_r f at every cell midpoint: exact integral of f (extended by zero outside
// the window) over [x - r, x + r) divided by 2r.
OpStepFunction ball_average(const OpStepFunction& f, double r);
// The same average at one point.
HermitianMatrix ball_average_at(const OpStepFunction& f, double x, double r);

// max over balls of lambda_max(A_r f(x) - C_contain E_Q f) with Q the
// smallest container; <= 0 when the domination holds.
double domination_defect(const GridFamily& g, const OpStepFunction& f, const std::vector<Ball>& balls);

struct HlMaximalReport {
    double p = 1.0;
    double lambda = 0.0;
    int grid_count = 0;
    double characteristic = 1.0;  // max over grids of [w]_{A_p} ([w]_{A_1} for p = 1)
    double f_norm = 0.0;
    // weak type
    double excess = 0.0;  // tau^w(I - meet_k q_k)
    double excess_sum = 0.0;  // sum_k tau^w(I - q_k)
    double weak_lhs = 0.0;  // lambda tau^w(I - q)^{1/p}
    double weak_rhs = 0.0;  // K^{1/p} C_contain [w]^{1/p} ||f||
    bool weak_ok = true;
    bool union_ok = true;
    // lambda_max(q A_r f q) - lambda over safe cells and all radii
    double level_defect = 0.0;
    // strong type (ratios to ||f||); zero when p = 1
    double strong_lower = 0.0;
    double strong_upper = 0.0;
};

// Weak type: Cuculescu projections of f at level lambda / C_contain for each
// grid, q their meet. Strong type (p > 1): sandwich of ||(A_r f)_{r in radii}||
// in L_p^w(l_inf).
HlMaximalReport hl_maximal_report(const GridFamily& g, const OpStepFunction& f, double p, const Weight& w,
                                  const std::vector<double>& radii, double lambda);

}  // namespace ncmart
