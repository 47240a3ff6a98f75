#pragma once

#include "rg4/nn.hpp"

namespace rg4::nn {

// Low-rank adapter over a frozen linear layer:
//   y = base(x) + (alpha / rank) * x A^T B^T
// B is zero-initialized so enabling the adapter is an exact identity delta;
// only A and B train.
struct LoraLinear {
    Linear base;
    Tensor a;  // (rank, in)
    Tensor b;  // (out, rank)
    int rank = 0;
    double alpha = 0.0;
    bool enabled = false;

    static LoraLinear wrap(Linear base) {
        LoraLinear l;
        l.base = std::move(base);
        return l;
    }

    void enable(int rank, double alpha, Rng& rng);
    Tensor forward(const Tensor& x) const;
    // base + (alpha/rank) B A, computed outside the tape
    Tensor merged_weight() const;
    void params(ParamRegistry& reg, const std::string& prefix, bool base_trainable,
                bool adapter_trainable = true);
};

}  // namespace rg4::nn
