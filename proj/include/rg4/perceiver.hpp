#pragma once

#include "rg4/nn.hpp"

namespace rg4::nn {

struct PerceiverConfig {
    int num_latents = 128;  // N
    int dim = 0;            // D'
    int heads = 4;
    int layers = 1;
};

// Cross-attention resampler: a fixed set of query tokens attends to a
// variable-length input set, so the output token count is always the query
// count. Queries are supplied by the caller — learnable latents for the
// frontal stream, the frontal resample for the other streams.
struct PerceiverResampler {
    PerceiverConfig cfg;

    struct Block {
        LayerNorm ln_q, ln_kv, ln_ff;
        MultiHeadAttention cross;
        FeedForward ff;
    };
    std::vector<Block> blocks;

    static PerceiverResampler init(const PerceiverConfig& cfg, Rng& rng);
    // inputs: (M, D'), M >= 1; queries: (N, D'). Returns (N, D').
    Tensor forward(const Tensor& inputs, const Tensor& queries) const;
    void params(ParamRegistry& reg, const std::string& prefix, bool trainable = true);
};

}  // namespace rg4::nn
