#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "keygaze/autodiff/tensor.hpp"

namespace keygaze::ad {

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t coordinates = 0;
};

/// |a - n| / max(1, |a|, |n|)
inline double grad_rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate over
/// every input.
inline GradCheckResult grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                                  const std::vector<Mat>& inputs, double eps = 1e-5) {
    std::vector<Tensor> xs;
    for (const auto& m : inputs) {
        if (!m.allFinite()) throw NumericalError("grad_check: non-finite input");
        xs.push_back(Tensor::parameter(m));
    }
    Tensor y = f(xs);
    if (y.size() != 1) throw UsageError("grad_check: function must return a scalar, got " + shape_str(y.value()));
    if (!std::isfinite(y.item())) throw NumericalError("grad_check: non-finite function value");
    y.backward();

    auto eval = [&](const std::vector<Mat>& vals) {
        std::vector<Tensor> ts;
        for (const auto& m : vals) ts.push_back(Tensor::constant(m));
        const double v = f(ts).item();
        if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite value in the eps-neighbourhood");
        return v;
    };

    GradCheckResult r;
    std::vector<Mat> probe = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Mat& g = xs[k].grad();
        for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
            const double x0 = inputs[k].data()[i];
            probe[k].data()[i] = x0 + eps;
            const double fp = eval(probe);
            probe[k].data()[i] = x0 - eps;
            const double fm = eval(probe);
            probe[k].data()[i] = x0;
            const double num = (fp - fm) / (2.0 * eps);
            const double ana = g.data()[i];
            if (!std::isfinite(ana)) throw NumericalError("grad_check: non-finite analytic gradient");
            r.max_rel_error = std::max(r.max_rel_error, grad_rel_error(ana, num));
            r.max_abs_error = std::max(r.max_abs_error, std::abs(ana - num));
            ++r.coordinates;
        }
    }
    return r;
}

/// Reduces a tensor-valued function to a scalar via a fixed random projection
/// so non-scalar primitives can be checked too.
inline std::function<Tensor(const std::vector<Tensor>&)> project(std::function<Tensor(const std::vector<Tensor>&)> f,
                                                                 Eigen::Index rows, Eigen::Index cols,
                                                                 std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = nd(eng);
    return [f = std::move(f), w](const std::vector<Tensor>& xs) { return sum(mul(f(xs), Tensor::constant(w))); };
}

} // namespace keygaze::ad
