#pragma once

#include <cmath>

namespace ncmart::detail {

// Neumaier-compensated running sum.
class KahanSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Kahan sum for Eigen matrices (elementwise compensation).
template <class M>
class MatrixKahanSum {
public:
    explicit MatrixKahanSum(const M& zero) : sum_(zero), comp_(zero) {}
    void add(const M& x) {
        M y = x - comp_;
        M t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = std::move(t);
    }
    const M& value() const { return sum_; }

private:
    M sum_;
    M comp_;
};

}  // namespace ncmart::detail
