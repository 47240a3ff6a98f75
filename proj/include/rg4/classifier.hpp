#pragma once

#include "rg4/nn.hpp"

namespace rg4::nn {

struct ClassifierConfig {
    int vocab = 0;
    int dim = 32;
    int heads = 4;
    int layers = 2;
    int max_len = 96;
    int hidden = 64;
    int out_heads = 14;  // one slot / category per head
    int classes = 4;     // classes per head
};

// Small bidirectional transformer with mean pooling and a bank of linear
// heads; the shared trunk behind the toy labeler and discriminator. The
// embedded-input entry point exists so attribution can interpolate token
// embeddings directly.
class TextClassifier {
public:
    static TextClassifier init(const ClassifierConfig& cfg, Rng& rng);

    const ClassifierConfig& config() const { return cfg_; }

    // Token-embedding lookup for `ids` (truncated to max_len); the
    // attribution input x. Positions are added inside forward_embedded.
    Tensor embed(const std::vector<int>& ids) const;
    // (L, dim) token embeddings -> (out_heads, classes) logits
    Tensor forward_embedded(const Tensor& token_embs) const;
    Tensor forward_ids(const std::vector<int>& ids) const;

    std::vector<int> clip(const std::vector<int>& ids) const;

    void params(ParamRegistry& reg, const std::string& prefix, bool trainable = true);

private:
    ClassifierConfig cfg_;
    Tensor tok_emb_;  // (vocab, dim)
    Tensor pos_emb_;  // (max_len, dim)
    std::vector<TransformerLayer> layers_;
    LayerNorm ln_f_;
    Linear pool_;
    Linear head_;
};

}  // namespace rg4::nn
