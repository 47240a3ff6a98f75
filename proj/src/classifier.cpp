#include "rg4/classifier.hpp"

#include <stdexcept>

namespace rg4::nn {

using namespace rg4::core;

TextClassifier TextClassifier::init(const ClassifierConfig& cfg, Rng& rng) {
    TextClassifier c;
    c.cfg_ = cfg;
    c.tok_emb_ = Tensor::zeros({cfg.vocab, cfg.dim});
    for (auto& v : c.tok_emb_.vec()) v = rng.normal(0.0, 0.02);
    c.pos_emb_ = Tensor::zeros({cfg.max_len, cfg.dim});
    for (auto& v : c.pos_emb_.vec()) v = rng.normal(0.0, 0.02);
    for (int l = 0; l < cfg.layers; ++l) c.layers_.push_back(TransformerLayer::init(cfg.dim, cfg.heads, rng));
    c.ln_f_ = LayerNorm::init(cfg.dim);
    c.pool_ = Linear::init(cfg.dim, cfg.hidden, rng);
    c.head_ = Linear::init(cfg.hidden, cfg.out_heads * cfg.classes, rng);
    return c;
}

std::vector<int> TextClassifier::clip(const std::vector<int>& ids) const {
    if (static_cast<int>(ids.size()) <= cfg_.max_len) return ids;
    return std::vector<int>(ids.begin(), ids.begin() + cfg_.max_len);
}

Tensor TextClassifier::embed(const std::vector<int>& ids) const {
    if (ids.empty()) throw std::invalid_argument("classifier: empty token sequence");
    return embedding(tok_emb_, clip(ids));
}

Tensor TextClassifier::forward_embedded(const Tensor& token_embs) const {
    const int L = token_embs.rows();
    if (L > cfg_.max_len)
        throw std::invalid_argument("classifier: sequence length " + std::to_string(L) +
                                    " exceeds max_len " + std::to_string(cfg_.max_len));
    Tensor x = add(token_embs, slice(pos_emb_, 0, 0, L));
    Tensor mask = full_mask(L, L);
    for (const auto& layer : layers_) x = layer.forward(x, mask);
    x = ln_f_.forward(x);
    Tensor pooled = gelu(pool_.forward(mean_rows(x)));  // (1, hidden)
    return head_.forward(pooled).reshape({cfg_.out_heads, cfg_.classes});
}

Tensor TextClassifier::forward_ids(const std::vector<int>& ids) const {
    return forward_embedded(embed(ids));
}

void TextClassifier::params(ParamRegistry& reg, const std::string& prefix, bool trainable) {
    reg.add(prefix + ".tok_emb", tok_emb_, trainable);
    reg.add(prefix + ".pos_emb", pos_emb_, trainable);
    for (size_t l = 0; l < layers_.size(); ++l)
        layers_[l].params(reg, prefix + ".layer" + std::to_string(l), trainable);
    ln_f_.params(reg, prefix + ".ln_f", trainable);
    pool_.params(reg, prefix + ".pool", trainable);
    head_.params(reg, prefix + ".head", trainable);
}

}  // namespace rg4::nn
