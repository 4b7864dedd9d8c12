#pragma once

// Maximal norms of positive sequences, the weighted Doob and dual Doob
// inequalities, and Cuculescu's projections.

#include <vector>

#include "ncmart/filtration.hpp"
#include "ncmart/weights.hpp"

namespace ncmart {

struct PositiveSeq {
    std::vector<OpStepFunction> terms;

    PositiveSeq() = default;
    // Every term must be pointwise PSD (relative tolerance tol) and share one grid.
    explicit PositiveSeq(std::vector<OpStepFunction> t, double tol = 1e-9);
    static PositiveSeq from_martingale(const MartingaleSeq& m);

    int depth() const { return static_cast<int>(terms.size()) - 1; }
    int dim() const { return terms.front().dim(); }
    const FiltrationPtr& filtration() const { return terms.front().filtration; }
    OpStepFunction sum() const;
};

// sum_n E_n(a_n).
OpStepFunction dual_doob_apply(const PositiveSeq& a);
// ||sum E_n(a_n)||_{L_p^w} / ||sum a_n||_{L_p^w}, p >= 1.
double dual_doob_ratio(const PositiveSeq& a, double p, const Weight& w);

enum class LinfMethod {
    barrier,  // log-barrier Newton; default
    projected_gradient,  // projected gradient with Dykstra projections
};

struct LinfOptions {
    LinfMethod method = LinfMethod::barrier;
    // relative duality-gap target for the barrier method; step tolerance for
    // projected gradient
    double opt_tol = 1e-10;
    int max_iter = 10000;
    int dykstra_max_iter = 10000;
    double dykstra_tol = 1e-12;
    // Solve commuting-diagonal and dominated cells in closed form.
    bool exact_special_cases = true;
};

struct MajorantCertificate {
    OpStepFunction upper_a;
    double upper_value = 0.0;
    PositiveSeq dual_y;
    double lower_value = 0.0;
    bool cap_reached = false;
    int max_iterations = 0;

    double gap() const { return upper_value - lower_value; }
};

// Sandwich of ||(x_n)||_{L_p^w(M; l_inf)}: upper from a feasible majorant a
// (x_n <= a for all n), lower from a dual sequence y_n >= 0 with
// ||sum y_n||_{L_{p'}^w} = 1. The problem decouples across cells; each cell
// minimizes tr(a^p) over {a >= x_n for all n}. Commuting diagonal cells and
// cells where one term dominates the rest are solved in closed form.
MajorantCertificate linf_norm(const PositiveSeq& x, double p, const Weight& w, const LinfOptions& opts = {});
// Upper part only (dual_y empty, lower_value 0).
MajorantCertificate linf_norm_upper(const PositiveSeq& x, double p, const Weight& w, double opt_tol = 1e-10);
// Dual part only (upper_a empty, upper_value 0).
MajorantCertificate linf_norm_lower(const PositiveSeq& x, double p, const Weight& w);

struct DoobRatio {
    double upper_ratio = 0.0;
    double lower_ratio = 0.0;
    double f_norm = 0.0;
    MajorantCertificate certificate;
};

// Sandwich of ||(E_n f)_n||_{L_p^w(l_inf)} divided by ||f||_{L_p^w}.
DoobRatio doob_ratio(const OpStepFunction& f, double p, const Weight& w, const LinfOptions& opts = {});

struct ProjectionSeq {
    std::vector<OpStepFunction> terms;  // q_0 .. q_J (q_{-1} = I implied)
    OpStepFunction meet_q;
};

struct CuculescuReport {
    ProjectionSeq q;
    double lambda = 0.0;
    double p = 1.0;
    double characteristic = 1.0;  // [w]_{A_1} for p = 1, [w]_{A_p} otherwise
    double excess = 0.0;  // tau^w(I - q)
    double lhs = 0.0;  // lambda tau^w(I - q)^{1/p}
    double rhs = 0.0;  // [w]^{1/p} ||f||_{L_p^w}
    bool bound_ok = true;
    // Largest observed defects of the construction's properties.
    double measurability_defect = 0.0;  // q_n not level-n measurable
    double monotonicity_defect = 0.0;  // ||q_n q_{n-1} - q_n||
    double commutator = 0.0;  // ||[q_n, q_{n-1} E_n(f/lambda) q_{n-1}]||
    double upper_violation = 0.0;  // lambda_max(q_n E q_n - q_n)
    double lower_violation = 0.0;  // -lambda_min(D E D - D), D = q_{n-1} - q_n
    double meet_order_violation = 0.0;  // lambda_max(meet - q_n)
    double meet_level_violation = 0.0;  // lambda_max(q E_n(f) q) / lambda - 1
    double projection_defect = 0.0;  // ||q_n^2 - q_n||
};

// Inductive construction q_n = q_{n-1} I_{[0,1]}(q_{n-1} E_n(f/lambda) q_{n-1})
// on the atoms of each level; meet from the kernel of sum_n (I - q_n).
CuculescuReport cuculescu(const OpStepFunction& f, double lambda, const Weight& w, double p);

// Scalar Doob extremal pair for power weights on the spine filtration of
// [0,1): level n splits [0,2^{-n}) into halves for n < J, and each cell
// [2^{-k-1}, 2^{-k}) is refined dyadically over the next m levels.
// w(t) = max(t, 2^{-J})^{(p-1)(1-eps)} and f = w^{1/(1-p)} at cell midpoints.
struct SpineInstance {
    FiltrationPtr filtration;
    Weight w;
    StepFunction f;
};
SpineInstance spine_instance(double eps, double p, int J, int m);

struct SpineSharpness {
    double eps = 1.0;
    double p = 2.0;
    int J = 0;
    int m = 0;
    double characteristic = 1.0;  // [w]_{A_p}
    double f_norm = 0.0;  // ||f||_{L_p^w}
    double maximal_norm = 0.0;  // ||sup_n E_n f||_{L_p^w}
    double ratio = 1.0;
};
// The same quantities as the explicit instance, evaluated through the
// self-similarity of the cells so that J may be in the tens of thousands.
SpineSharpness spine_sharpness(double eps, double p, int J, int m);

}  // namespace ncmart
