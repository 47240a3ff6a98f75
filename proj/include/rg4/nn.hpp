#pragma once

#include <string>
#include <vector>

#include "rg4/ops.hpp"
#include "rg4/params.hpp"
#include "rg4/rng.hpp"
#include "rg4/tensor.hpp"

namespace rg4::nn {

using core::ParamRegistry;
using core::Rng;
using core::Tensor;

struct Linear {
    Tensor w;  // (out, in)
    Tensor b;  // (out), optional
    bool has_bias = true;

    static Linear init(int in_dim, int out_dim, Rng& rng, bool bias = true, double std = 0.02);
    Tensor forward(const Tensor& x) const;  // (m, in) -> (m, out)
    void params(ParamRegistry& reg, const std::string& prefix, bool trainable = true);
    int in_dim() const { return w.cols(); }
    int out_dim() const { return w.rows(); }
};

struct LayerNorm {
    Tensor gain;
    Tensor bias;

    static LayerNorm init(int dim);
    Tensor forward(const Tensor& x) const;
    void params(ParamRegistry& reg, const std::string& prefix, bool trainable = true);
};

// Multi-head scaled dot-product over already-projected q/k/v. Heads are
// sliced out of the feature dimension; `mask` is additive (0 visible, large
// negative hidden) with shape (queries, keys). Output token count equals the
// query token count.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& mask, int heads);

// Attention with learned projections, heads sliced out of the model
// dimension.
struct MultiHeadAttention {
    int heads = 1;
    Linear wq, wk, wv, wo;

    static MultiHeadAttention init(int dim, int heads, Rng& rng);
    Tensor forward(const Tensor& q_in, const Tensor& kv_in, const Tensor& mask) const;
    void params(ParamRegistry& reg, const std::string& prefix, bool trainable = true);
};

struct FeedForward {
    Linear fc1, fc2;

    static FeedForward init(int dim, int hidden, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void params(ParamRegistry& reg, const std::string& prefix, bool trainable = true);
};

// Pre-norm self-attention block.
struct TransformerLayer {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    FeedForward ff;

    static TransformerLayer init(int dim, int heads, Rng& rng);
    Tensor forward(const Tensor& x, const Tensor& mask) const;
    void params(ParamRegistry& reg, const std::string& prefix, bool trainable = true);
};

constexpr double kMaskOff = -1e30;

// All-visible mask.
Tensor full_mask(int q_len, int k_len);
// Prefix positions see the whole prefix; report positions see the prefix and
// earlier report positions.
Tensor causal_prefix_mask(int prefix_len, int total_len);
// Throws if any position at or after `prefix_len` can see a later position.
// Debug builds call this on every decoder forward.
void validate_decoder_mask(const Tensor& mask, int prefix_len);

}  // namespace rg4::nn
