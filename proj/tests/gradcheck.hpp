#pragma once

// Central finite-difference gradient oracle. Lives in test code and never
// touches the reverse-mode path it checks.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rg4/autograd.hpp"
#include "rg4/ops.hpp"
#include "rg4/rng.hpp"
#include "rg4/tensor.hpp"

namespace gradcheck {

struct Result {
    double max_rel_err = 0.0;
    std::string where;
    bool ok(double tol = 1e-4) const { return max_rel_err < tol; }
};

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

// `fn` evaluates the scalar loss from the current leaf values. Leaves must
// have requires_grad set before the call.
inline Result check(std::vector<rg4::core::Tensor>& leaves,
                    const std::function<rg4::core::Tensor()>& fn, double h = 1e-5) {
    using rg4::core::NoGradGuard;
    using rg4::core::Tensor;
    auto& tape = rg4::core::active_tape();

    tape.clear();
    for (auto& t : leaves) t.zero_grad();
    Tensor loss = fn();
    rg4::core::backward(tape, loss);
    std::vector<std::vector<double>> analytic;
    for (auto& t : leaves) analytic.push_back(t.grad());
    tape.clear();

    Result res;
    NoGradGuard ng;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& vals = leaves[li].vec();
        for (size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + h;
            const double fp = fn().item();
            vals[i] = orig - h;
            const double fm = fn().item();
            vals[i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double e = rel_err(analytic[li][i], numeric);
            if (e > res.max_rel_err) {
                res.max_rel_err = e;
                res.where = "leaf " + std::to_string(li) + " elem " + std::to_string(i);
            }
        }
    }
    return res;
}

inline rg4::core::Tensor random_tensor(std::vector<int> shape, rg4::core::Rng& rng,
                                       double lo = -2.0, double hi = 2.0,
                                       bool requires_grad = true) {
    auto t = rg4::core::Tensor::zeros(std::move(shape), requires_grad);
    for (auto& v : t.vec()) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace gradcheck
