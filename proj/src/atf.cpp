#include "rg4/atf.hpp"

namespace rg4::model {

using namespace rg4::core;
using namespace rg4::nn;

AtfModule AtfModule::init(const AtfConfig& cfg, Rng& rng) {
    AtfModule m;
    m.cfg = cfg;
    m.latent_queries = Tensor::zeros({cfg.num_latents, cfg.dp});
    for (auto& v : m.latent_queries.vec()) v = rng.normal(0.0, 0.02);
    PerceiverConfig pc;
    pc.num_latents = cfg.num_latents;
    pc.dim = cfg.dp;
    pc.heads = cfg.heads;
    pc.layers = cfg.perceiver_layers;
    m.pf = PerceiverResampler::init(pc, rng);
    m.pl = PerceiverResampler::init(pc, rng);
    m.pt = PerceiverResampler::init(pc, rng);
    m.lin_f = Linear::init(cfg.dp, cfg.d, rng);
    m.lin_l = Linear::init(cfg.dp, cfg.d, rng);
    m.lin_t = Linear::init(cfg.dp, cfg.d, rng);
    m.proj = Linear::init(3 * cfg.d, cfg.d, rng);
    return m;
}

Tensor AtfModule::frontal_latents(const Tensor& vf) const { return pf.forward(vf, latent_queries); }

FusedFeatures AtfModule::fuse(const Tensor& vf, const Tensor* vl, const Tensor* vt) const {
    FusedFeatures out;
    Tensor latents = frontal_latents(vf);
    Tensor h_f = lin_f.forward(latents);
    Tensor h_l = vl ? lin_l.forward(pl.forward(*vl, latents))
                    : Tensor::zeros({cfg.num_latents, cfg.d});
    Tensor h_t = vt ? lin_t.forward(pt.forward(*vt, latents))
                    : Tensor::zeros({cfg.num_latents, cfg.d});
    // fixed concatenation order: frontal, lateral, prior
    Tensor h_o = concat({h_f, h_l, h_t}, 1);  // (N, 3D)
    out.tokens = proj.forward(h_o);
    out.used_lateral = vl != nullptr;
    out.used_prior = vt != nullptr;
    return out;
}

void AtfModule::params(ParamRegistry& reg, const std::string& prefix, bool trainable) {
    reg.add(prefix + ".latent_queries", latent_queries, trainable);
    pf.params(reg, prefix + ".pf", trainable);
    pl.params(reg, prefix + ".pl", trainable);
    pt.params(reg, prefix + ".pt", trainable);
    lin_f.params(reg, prefix + ".lin_f", trainable);
    lin_l.params(reg, prefix + ".lin_l", trainable);
    lin_t.params(reg, prefix + ".lin_t", trainable);
    proj.params(reg, prefix + ".proj", trainable);
}

TokenBudget token_budget(int image_tokens, int prior_tokens, int num_latents, int instruction_tokens,
                         int ind_hist_tokens) {
    TokenBudget b;
    b.interleaved_max = instruction_tokens + 2 * image_tokens + prior_tokens + ind_hist_tokens;
    b.fused_max = instruction_tokens + num_latents + ind_hist_tokens;
    return b;
}

}  // namespace rg4::model
