#pragma once

// Scalar weights on an atomic filtration: A_p characteristics, weighted traces,
// weighted conditional expectation, dyadic maximal operators, the factorial
// weight with bounded A_1 characteristic, and the A_1 factorization.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ncmart/filtration.hpp"
#include "ncmart/random.hpp"

namespace ncmart {

struct Weight {
    FiltrationPtr filtration;
    std::vector<double> values;

    Weight() = default;
    // Throws ParameterError unless every value is positive and finite.
    Weight(FiltrationPtr f, std::vector<double> v);
    explicit Weight(const StepFunction& s) : Weight(s.filtration, s.values) {}
    static Weight constant(FiltrationPtr f, double c = 1.0);

    int size() const { return static_cast<int>(values.size()); }
    double operator[](int c) const { return values[c]; }
    StepFunction as_step() const { return StepFunction(filtration, values); }
    Weight pow(double e) const;
};

// max over atoms of all levels of avg(w) * avg(w^{1/(1-p)})^{p-1}.
double ap_char(const Weight& w, double p);
// max over atoms of avg(w) / min(w).
double a1_char(const Weight& w);
// ap_char restricted to one level.
double ap_char_level(const Weight& w, double p, int level);

// v = w^{1/(1-p)}.
Weight dual_weight(const Weight& w, double p);

// tau^w(f) = sum over cells of mu * tr(f) * w.
double weighted_trace(const OpStepFunction& f, const Weight& w);
// (sum mu * tr|f|^p * w)^{1/p}.
double weighted_lp_norm(const OpStepFunction& f, double p, const Weight& w);
double weighted_lp_norm(const StepFunction& f, double p, const Weight& w);
// Unweighted L_p norm of a scalar function (absolute values).
double lp_norm(const StepFunction& f, double p);

// E_n(f w) / E_n(w).
OpStepFunction weighted_cond_exp(const OpStepFunction& f, int level, const Weight& w);
StepFunction weighted_cond_exp(const StepFunction& f, int level, const Weight& w);

struct NonhomogWeight {
    FiltrationPtr filtration;
    Weight weight;
    std::vector<double> a;  // a_0 .. a_N
};

// Cells [0,a_N), [a_N, a_{N-1}), ..., [a_1, a_0) with a_n = 2^{-n}/n!;
// level n has atoms [0,a_n), [a_n,a_{n-1}), ..., [a_1,a_0); w = n! on
// [a_{n+1}, a_n) and N! on the core.
NonhomogWeight nonhomog_weight(int N);

// sum_{n=0}^{N} (n!)^alpha (2n+1) / (2^{n+1} (n+1)!), the integral of w^alpha
// over the first levels of the factorial weight.
double nonhomog_power_series(double alpha, int N);

// M_u f(x) = max over atoms Q containing x of u(Q)^{-1} int_Q f u.
StepFunction dyadic_maximal(const StepFunction& f, const Weight* u = nullptr);

// Weight families.
// max(t - left, floor)^exponent at cell midpoints; floor defaults to the
// smallest cell length.
Weight power_weight(FiltrationPtr f, double exponent, std::optional<double> floor = std::nullopt);
// The dyadic power weight (t v 2^{-J})^{eps-1}.
Weight dyadic_power_weight(FiltrationPtr f, double eps);
// exp(sigma * U), U uniform on [-1, 1] per cell.
Weight random_loguniform_weight(FiltrationPtr f, double sigma, Rng& rng);

// CSV rows: left,length,value (header line included).
void write_weight_csv(std::ostream& os, const Weight& w);
// With filtration == nullptr a two-level filtration on the listed cells is
// built; otherwise the cells must match the filtration's.
Weight read_weight_csv(std::istream& is, FiltrationPtr filtration = nullptr);

struct FactorizationResult {
    Weight w1;
    Weight w2;
    double p = 2.0;
    int iterations = 0;
    double t_norm = 0.0;
    // M(w1) <= bound_w1 * w1 and M(w2) <= bound_w2 * w2 are the target bounds.
    double bound_w1 = 0.0;
    double bound_w2 = 0.0;
    double max_ratio_w1 = 0.0;  // max M(w1)/w1
    double max_ratio_w2 = 0.0;  // max M(w2)/w2
    double identity_error = 0.0;  // max |w1 w2^{1-p} - w| / w
    double tail_ratio = 0.0;  // norm of the last series term over norm of phi
    bool converged = true;
    std::string warning;
};

// Rubio de Francia iteration phi = sum_{n=1}^{n_iter} (2t)^{-n} T^n psi with
// T f = (w^{-1/p} M(f^{p-1} w^{1/p}))^{1/(p-1)} + w^{1/p} M(f w^{-1/p}),
// w1 = w^{1/p} phi^{p-1}, w2 = w^{-1/p} phi. For p < 2 the dual weight is
// factorized and the roles of the factors swapped. When t_norm is absent it is
// estimated from the power iteration and random nonnegative samples.
FactorizationResult rdf_factorize(const Weight& w, double p, int n_iter, const StepFunction& psi,
                                  std::optional<double> t_norm = std::nullopt, std::uint64_t seed = 0);

}  // namespace ncmart
