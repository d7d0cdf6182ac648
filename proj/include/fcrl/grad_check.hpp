#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "fcrl/error.hpp"

namespace fcrl {

// Central-difference gradient of a scalar loss over a flat parameter
// vector. This is the oracle every analytic gradient is checked against.
inline std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& loss_fn,
    std::vector<double> params, double h) {
    if (!(h > 0.0)) throw DomainError("finite_diff_grad: h must be > 0");
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = params[i];
        params[i] = orig + h;
        const double lp = loss_fn(params);
        params[i] = orig - h;
        const double lm = loss_fn(params);
        params[i] = orig;
        if (!std::isfinite(lp) || !std::isfinite(lm))
            throw NumericError("finite_diff_grad: non-finite loss at coordinate " +
                               std::to_string(i));
        grad[i] = (lp - lm) / (2.0 * h);
    }
    return grad;
}

}  // namespace fcrl
