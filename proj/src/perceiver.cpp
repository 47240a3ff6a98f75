#include "rg4/perceiver.hpp"

#include <stdexcept>

namespace rg4::nn {

PerceiverResampler PerceiverResampler::init(const PerceiverConfig& cfg, Rng& rng) {
    if (cfg.num_latents < 1) throw std::invalid_argument("perceiver: num_latents must be >= 1");
    PerceiverResampler p;
    p.cfg = cfg;
    p.blocks.reserve(static_cast<size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
        Block b;
        b.ln_q = LayerNorm::init(cfg.dim);
        b.ln_kv = LayerNorm::init(cfg.dim);
        b.ln_ff = LayerNorm::init(cfg.dim);
        b.cross = MultiHeadAttention::init(cfg.dim, cfg.heads, rng);
        b.ff = FeedForward::init(cfg.dim, 4 * cfg.dim, rng);
        p.blocks.push_back(std::move(b));
    }
    return p;
}

Tensor PerceiverResampler::forward(const Tensor& inputs, const Tensor& queries) const {
    if (!inputs.defined() || inputs.rows() == 0)
        throw std::invalid_argument("perceiver: empty input token set; absent modalities are "
                                    "handled upstream by zero substitution");
    if (queries.rows() != cfg.num_latents)
        throw std::invalid_argument("perceiver: " + std::to_string(queries.rows()) +
                                    " queries vs configured " + std::to_string(cfg.num_latents));
    Tensor x = queries;
    Tensor mask = full_mask(cfg.num_latents, inputs.rows());
    for (const auto& b : blocks) {
        x = core::add(x, b.cross.forward(b.ln_q.forward(x), b.ln_kv.forward(inputs), mask));
        x = core::add(x, b.ff.forward(b.ln_ff.forward(x)));
    }
    return x;
}

void PerceiverResampler::params(ParamRegistry& reg, const std::string& prefix, bool trainable) {
    for (size_t l = 0; l < blocks.size(); ++l) {
        const std::string p = prefix + ".block" + std::to_string(l);
        blocks[l].ln_q.params(reg, p + ".ln_q", trainable);
        blocks[l].ln_kv.params(reg, p + ".ln_kv", trainable);
        blocks[l].ln_ff.params(reg, p + ".ln_ff", trainable);
        blocks[l].cross.params(reg, p + ".cross", trainable);
        blocks[l].ff.params(reg, p + ".ff", trainable);
    }
}

}  // namespace rg4::nn
