#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "traco/errors.hpp"

namespace traco {

// Central-difference gradient estimate of a scalar function: component i is
// (f(x + h*e_i) - f(x - h*e_i)) / (2h). Used as the gradient oracle against
// reverse-mode results.
inline std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(x);
        x[i] = xi - h;
        const double fm = f(x);
        x[i] = xi;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad: non-finite function value");
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace traco
