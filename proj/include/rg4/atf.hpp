#pragma once

#include <optional>

#include "rg4/nn.hpp"
#include "rg4/perceiver.hpp"

namespace rg4::model {

struct AtfConfig {
    int num_latents = 16;  // N (128 at paper scale)
    int dp = 32;           // D'
    int d = 64;            // D, decoder dim
    int heads = 4;
    int perceiver_layers = 1;
};

struct FusedFeatures {
    core::Tensor tokens;  // (N, D)
    bool used_lateral = false;
    bool used_prior = false;
};

// Adaptive token fusion: the frontal stream is resampled through learnable
// latent queries; the lateral and prior streams are resampled through the
// frontal latents; streams are concatenated along the feature axis in the
// fixed order (frontal, lateral, prior) with zeros substituted for absent
// modalities, then projected 3D -> D. The output token count is N for every
// input combination.
struct AtfModule {
    AtfConfig cfg;
    core::Tensor latent_queries;  // V' (N, D'), learnable
    nn::PerceiverResampler pf, pl, pt;
    nn::Linear lin_f, lin_l, lin_t;  // D' -> D
    nn::Linear proj;                 // 3D -> D

    static AtfModule init(const AtfConfig& cfg, core::Rng& rng);

    // The frontal latents p_f(v_f, V'), computed once and reused as the
    // query set for the lateral and prior perceivers.
    core::Tensor frontal_latents(const core::Tensor& vf) const;
    FusedFeatures fuse(const core::Tensor& vf, const core::Tensor* vl, const core::Tensor* vt) const;

    void params(core::ParamRegistry& reg, const std::string& prefix, bool trainable);
};

struct TokenBudget {
    int interleaved_max = 0;  // instruction + N_I(frontal) + N_I(lateral) + N_T + ind/hist
    int fused_max = 0;        // instruction + N + ind/hist
    double reduction() const {
        return interleaved_max > 0 ? 1.0 - static_cast<double>(fused_max) / interleaved_max : 0.0;
    }
};

TokenBudget token_budget(int image_tokens, int prior_tokens, int num_latents, int instruction_tokens,
                         int ind_hist_tokens);

}  // namespace rg4::model
