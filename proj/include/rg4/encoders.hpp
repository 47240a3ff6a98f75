#pragma once

#include "rg4/data.hpp"
#include "rg4/nn.hpp"

namespace rg4::model {

struct EncoderConfig {
    int grid = 8;
    int grid_dim = 8;   // per-cell feature dim
    int dp = 32;        // D', shared encoder output dim
    int heads = 4;
    int layers = 2;
    int max_text_len = 96;
};

// Shared image encoder for frontal and lateral views.
struct ImageEncoder {
    EncoderConfig cfg;
    nn::Linear patch_proj;
    nn::Tensor pos_emb;
    std::vector<nn::TransformerLayer> layers;
    nn::LayerNorm ln_f;

    static ImageEncoder init(const EncoderConfig& cfg, core::Rng& rng);
    core::Tensor forward(const data::ImageGrid& grid) const;  // (cells, D')
    void params(core::ParamRegistry& reg, const std::string& prefix, bool trainable);
};

struct TextEncoder {
    EncoderConfig cfg;
    nn::Tensor tok_emb;
    nn::Tensor pos_emb;
    std::vector<nn::TransformerLayer> layers;
    nn::LayerNorm ln_f;

    static TextEncoder init(const EncoderConfig& cfg, int vocab, core::Rng& rng);
    core::Tensor forward(const std::vector<int>& tokens) const;  // (N_T, D')
    void params(core::ParamRegistry& reg, const std::string& prefix, bool trainable);
};

struct EncoderPretrainConfig {
    int steps = 400;
    int batch = 16;
    double lr = 1e-3;
    uint64_t seed = 11;
};

// Supervised pretext training (condition status from grids, labels from
// prior-report text); the encoders stand in for pretrained frozen encoders,
// so they are trained here once and frozen for the alignment stage.
void pretrain_encoders(ImageEncoder& ev, TextEncoder& et, const data::Corpus& corpus,
                       const EncoderPretrainConfig& cfg);

}  // namespace rg4::model
