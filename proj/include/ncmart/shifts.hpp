#pragma once

// Haar profiles and shifts over randomized dyadic grids, truncated singular
// integrals, the quaternary martingales g^Omega, sparse families and the
// weighted bound for sparse operators.
//
// Values in B are Hermitian matrices; ||.||_B is the operator norm per cell.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ncmart/filtration.hpp"
#include "ncmart/random.hpp"
#include "ncmart/weights.hpp"

namespace ncmart {

enum class ProfileKind { phi, psi, zeta, psi_out, psi_inn, zeta_out, zeta_inn, zeta_out_v2, zeta_inn_v2 };

struct HaarProfile {
    ProfileKind kind = ProfileKind::phi;
    std::array<double, 4> q{};  // values on the quarters of [0, 1)

    double operator()(double x) const;  // 0 outside [0, 1)
    double integral() const { return 0.25 * (q[0] + q[1] + q[2] + q[3]); }
    double l2_norm_sq() const;
};

HaarProfile profile(ProfileKind kind);
const char* profile_name(ProfileKind kind);

// h_I(x) = h((x - a)/|I|) / sqrt|I| on the four quarters of I = [a, a + len).
StepFunction scale_profile(const HaarProfile& h, double a, double len);

enum class Parity { all, even, odd };

// D_{r,beta}: at scale n the intervals r 2^n ([0,1) + k + sum_{i<n} 2^{i-n} beta_i).
// beta[i - n_min] is bit i for n_min <= i < n_max; bits outside are 0. Only
// intervals contained in [lo, hi) with n_min <= n <= n_max are kept.
struct GridSpec {
    double r = 1.0;
    std::vector<int> beta;
    int n_min = 0;
    int n_max = 0;
    double lo = -1.0;
    double hi = 1.0;
    Parity parity = Parity::all;

    double offset(int n) const;  // r sum_{n_min <= i < n} 2^i beta_i
    double length(int n) const { return r * std::exp2(n); }
    bool keeps(int n) const;
};

struct GridInterval {
    int n;
    long long k;
    double left;
    double length;
};

// Intervals ordered by scale (coarsest first) then position.
std::vector<GridInterval> grid_intervals(const GridSpec& g);

// r on the mesh 1 + j/64, beta uniform bits.
GridSpec random_grid(Rng& rng, int n_min, int n_max, double L, Parity parity);

// gamma(|I|, left endpoint of I). sup is the claimed ||gamma||_inf; every
// query is checked against it.
struct CoefficientFn {
    std::string name;
    std::function<double(double, double)> gamma;
    double sup = 1.0;

    double operator()(double len, double left) const;
};

CoefficientFn gamma_one();
CoefficientFn gamma_zero();
CoefficientFn gamma_sin_log();  // sin(log|I|)
// Independent uniform [-1, 1] value per interval, hashed from (seed, |I|, left).
CoefficientFn gamma_random(std::uint64_t seed);

// <f, h_I>, exact for step functions (f extended by zero).
HermitianMatrix haar_coefficient(const OpStepFunction& f, const HaarProfile& h, double a, double len);

// sum_I gamma(|I|) <f, analysis_I> synthesis_I over the grid, on f's cells.
// Throws ResolutionError if a quarter point of a grid interval falls strictly
// inside one of f's cells.
OpStepFunction haar_shift(const OpStepFunction& f, const GridSpec& g, const CoefficientFn& c,
                          const HaarProfile& analysis, const HaarProfile& synthesis);
// sum gamma <f, phi_I> psi_I
OpStepFunction shift_apply(const OpStepFunction& f, const GridSpec& g, const CoefficientFn& c);
// sum gamma <h, psi_I> phi_I
OpStepFunction shift_adjoint_apply(const OpStepFunction& h, const GridSpec& g, const CoefficientFn& c);

// Odd kernel K with derivatives, defined on R \ {0}.
struct KernelSpec {
    std::string name;
    std::function<double(double)> K;
    std::function<double(double)> dK;
    std::function<double(double)> d2K;
    bool odd = true;
};

KernelSpec hilbert_kernel();  // 1/(pi s)
// Rows s,K,dK,d2K with a header line. If every s is positive the table is
// extended to s < 0 by oddness. Cubic Hermite for K and K', linear for K''.
// Zero beyond the largest |s|; DomainError below the smallest.
KernelSpec read_kernel_csv(std::istream& is, const std::string& name = "custom");
// Looks up "hilbert" or reads a CSV file path.
KernelSpec kernel_by_name(const std::string& name);

struct KernelReport {
    double odd_defect = 0.0;  // max |K(s) + K(-s)| on the mesh
    bool decay_ok = true;  // |K|, |K'| decrease on [1e2, 1e4]
    double K_at_1e2 = 0.0, K_at_1e4 = 0.0;
    double dK_at_1e2 = 0.0, dK_at_1e4 = 0.0;
    double s3_d2K_sup = 0.0;  // sup |s^3 K''(s)|
    double s2_d2K_sup = 0.0;  // sup |s^2 K''(s)|
};
KernelReport kernel_report(const KernelSpec& K);

// integral of K over [u0, u1] minus (-eps, eps), adaptive Gauss-Kronrod on
// geometric pieces.
double kernel_integral(const KernelSpec& K, double u0, double u1, double eps);
// T^eps f(s) = int_{|s - t| > eps} f(t) K(s - t) dt
HermitianMatrix truncated_singular_at(const OpStepFunction& f, const KernelSpec& K, double eps, double s);
// T^eps f at every cell midpoint.
OpStepFunction truncated_singular(const OpStepFunction& f, const KernelSpec& K, double eps);

// Quaternary interval of a uniform grid of 4^D cells: level m, index k is
// [left + k 4^{-m} len, left + (k+1) 4^{-m} len).
struct QuadInterval {
    int level = 0;
    long long index = 0;
};

// Depth D of a filtration whose cells are 4^D equal pieces; ResolutionError otherwise.
int quaternary_depth(const AtomicFiltration& f);

struct OmegaMartingale {
    FiltrationPtr filtration;  // F^Omega on the cells of Omega, levels 0..2D'
    MartingaleSeq f;
    MartingaleSeq g;
    OpStepFunction g_limit;  // g^Omega on Omega
    // max over cells of ||dg_{2n+2}|| - 7 ||df_{2n+1}||; <= 0 when the bound holds
    double dg_bound_defect = 0.0;
    // largest oscillation of ||df_n|| over an atom of level n-1
    double predictability_defect = 0.0;
    // distance between the differences and the displayed Haar expansions
    double formula_defect = 0.0;
};

OmegaMartingale omega_martingale(const OpStepFunction& f, QuadInterval omega, const CoefficientFn& c);

// sup_n ||g_n^Omega|| on the cells of Omega.
std::vector<double> omega_maximal(const OpStepFunction& f, QuadInterval omega, const CoefficientFn& c);

struct WeakTypeReport {
    double quasinorm = 0.0;  // sup_lambda lambda |{G > lambda}|
    double f_l1 = 0.0;
    double C_emp = 0.0;  // quasinorm / f_l1, 0 for f = 0
};
WeakTypeReport weak_type_gOmega(const OpStepFunction& f, QuadInterval omega, const CoefficientFn& c);

// Max C_emp over `trials` random scalar f on 4^depth cells of [0, 1) with iid
// N(0,1) values (trial t seeded with seed ^ t), Omega = [0, 1).
double weak_constant_sweep(int depth, int trials, std::uint64_t seed, const CoefficientFn& c);
// Seeded hill climbing of C_emp over scalar f at depths 1..max_depth; a lower
// bound for the universal constant that random f badly underestimate.
double weak_constant_search(int max_depth, int restarts, int iters, std::uint64_t seed, const CoefficientFn& c);

struct StepsReport {
    double norm_psi = 0.0;  // || sum gamma <f,phi_I> psi_I ||_p
    double norm_zeta = 0.0;
    double norm_phi = 0.0;
    double norm_f = 0.0;
    double ratio1 = 1.0;  // psi / zeta
    double ratio2 = 1.0;  // zeta / phi
    double ratio3 = 1.0;  // phi / (||gamma|| ||f||)
};
StepsReport steps_ratio_report(const OpStepFunction& f, const GridSpec& g, const CoefficientFn& c, double p);

struct SparseMember {
    QuadInterval omega;
    double left = 0.0;
    double length = 0.0;
    double lambda = 0.0;
    double average = 0.0;  // avg_Omega ||f||
    std::vector<int> E;  // cells of E(Omega)
    double E_measure = 0.0;
};

struct SparseFamily {
    std::vector<SparseMember> members;  // in processing order
    double C_weak = 0.0;
    FiltrationPtr filtration;

    double total_measure() const;  // sum |Omega| / |domain|
    double min_density() const;  // min |E(Omega)| / |Omega|
    bool disjoint() const;
};

// Stopping-time construction; members processed largest first, ties by left
// endpoint. lambda = 2 C_weak avg_Omega ||f||, with lambda = 0 giving E = Omega.
// Throws ConstructionError when some |E(Omega)| < |Omega|/2.
SparseFamily sparse_construct(const OpStepFunction& f, const CoefficientFn& c, double C_weak);

struct SparseDominationReport {
    double max_slack = 0.0;  // max over cells of lhs - rhs
    double max_lhs = 0.0;
    double max_rhs = 0.0;
    double constant = 0.0;  // 2 C_weak + 7
    bool ok = true;  // max_slack <= 1e-8
    // Variant bounding the parent term by 7 avg over the parent of each
    // stopping interval instead of the interval itself.
    double parent_slack = 0.0;
    bool parent_ok = true;
};
// ||sum_I gamma <f,phi_I> psi_I|| <= (2 C_weak + 7) sum_Omega avg_Omega ||f|| chi_Omega cellwise.
SparseDominationReport sparse_dominate_check(const OpStepFunction& f, const SparseFamily& S, const CoefficientFn& c);

// sum_Omega avg_Omega ||f|| chi_Omega
StepFunction sparse_operator(const OpStepFunction& f, const SparseFamily& S);

struct WeightedSparseReport {
    double p = 2.0;
    double characteristic = 1.0;  // [w]_{A_p}
    double exponent = 1.0;  // max{1/(p-1), 1}
    double constant = 0.0;  // 2^{p-1} p p'
    double lhs = 0.0;  // ||A||_{L_p^w}
    double f_norm = 0.0;  // || ||f|| ||_{L_p^w}
    double rhs = 0.0;  // constant [w]^exponent f_norm
    double ratio = 0.0;  // lhs / f_norm
    bool bound_ok = true;
    // chain[0] = int A h for the extremal h, then each successive upper bound
    // of the change-of-measure argument, ending with 2^{p-1}[w] p p' ||f|| ||h||
    std::vector<double> chain;
    bool chain_ok = true;
};
// p >= 2; w on the cells of f.
WeightedSparseReport weighted_sparse_bound(const OpStepFunction& f, const SparseFamily& S, double p, const Weight& w);

}  // namespace ncmart
