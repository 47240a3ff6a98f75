#pragma once

#include <vector>

#include "rg4/autograd.hpp"
#include "rg4/tensor.hpp"

namespace rg4::core {

// Reverse-mode primitives. Every op records onto the active tape when grad
// is enabled and any input requires grad. Shape errors name the op and the
// offending shapes. Rank-2 row-major throughout; the only broadcast is the
// leading-axis one in add_rowwise.

Tensor matmul(Tensor a, Tensor b);
Tensor add(Tensor a, Tensor b);
Tensor add_rowwise(Tensor a, Tensor bias);  // (m,n) + (n)
Tensor mul(Tensor a, Tensor b);
Tensor scale(Tensor a, double c);
Tensor softmax(Tensor a);     // rowwise, max-shifted
Tensor layer_norm(Tensor x, Tensor gain, Tensor bias, double eps = 1e-5);
Tensor embedding(Tensor table, const std::vector<int>& ids);
Tensor concat(std::vector<Tensor> parts, int axis);
Tensor slice(Tensor a, int axis, int start, int len);
Tensor gelu(Tensor a);        // tanh approximation
Tensor transpose(Tensor a);
Tensor sum(Tensor a);         // -> scalar
Tensor mean(Tensor a);        // -> scalar
Tensor mean_rows(Tensor a);   // (m,n) -> (1,n)

// Per-row cross entropy against integer targets, weighted and averaged over
// rows: sum_j w_j * (logsumexp(z_j) - z_j[t_j]) / m.
Tensor cross_entropy_rows(Tensor logits, const std::vector<int>& targets,
                          const std::vector<double>& weights);
Tensor cross_entropy_rows(Tensor logits, const std::vector<int>& targets);

// Uniform dispatch over the primitive set, mainly for sweep-style testing.
enum class OpKind { matmul, add, mul, softmax, layer_norm, embedding, concat, slice, gelu, transpose };

struct PrimitiveArgs {
    int axis = 1;
    int start = 0;
    int len = 1;
    std::vector<int> ids;
};

const char* op_kind_name(OpKind k);
Tensor forward_primitive(OpKind kind, const std::vector<Tensor>& inputs,
                         const PrimitiveArgs& args = {});

}  // namespace rg4::core
