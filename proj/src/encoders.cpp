#include "rg4/encoders.hpp"

#include <stdexcept>

#include "rg4/adamw.hpp"
#include "rg4/autograd.hpp"
#include "rg4/world.hpp"

namespace rg4::model {

using namespace rg4::core;
using namespace rg4::nn;
using namespace rg4::data;

ImageEncoder ImageEncoder::init(const EncoderConfig& cfg, Rng& rng) {
    ImageEncoder e;
    e.cfg = cfg;
    e.patch_proj = Linear::init(cfg.grid_dim, cfg.dp, rng);
    e.pos_emb = Tensor::zeros({cfg.grid * cfg.grid, cfg.dp});
    for (auto& v : e.pos_emb.vec()) v = rng.normal(0.0, 0.02);
    for (int l = 0; l < cfg.layers; ++l) e.layers.push_back(TransformerLayer::init(cfg.dp, cfg.heads, rng));
    e.ln_f = LayerNorm::init(cfg.dp);
    return e;
}

Tensor ImageEncoder::forward(const ImageGrid& grid) const {
    if (grid.dim != cfg.grid_dim || grid.cells != cfg.grid * cfg.grid)
        throw std::invalid_argument("image encoder: grid " + std::to_string(grid.cells) + "x" +
                                    std::to_string(grid.dim) + " vs configured " +
                                    std::to_string(cfg.grid * cfg.grid) + "x" +
                                    std::to_string(cfg.grid_dim));
    Tensor cells = Tensor::from({grid.cells, grid.dim}, grid.values);
    Tensor x = add(patch_proj.forward(cells), pos_emb);
    Tensor mask = full_mask(grid.cells, grid.cells);
    for (const auto& layer : layers) x = layer.forward(x, mask);
    return ln_f.forward(x);
}

void ImageEncoder::params(ParamRegistry& reg, const std::string& prefix, bool trainable) {
    patch_proj.params(reg, prefix + ".patch_proj", trainable);
    reg.add(prefix + ".pos_emb", pos_emb, trainable);
    for (size_t l = 0; l < layers.size(); ++l)
        layers[l].params(reg, prefix + ".layer" + std::to_string(l), trainable);
    ln_f.params(reg, prefix + ".ln_f", trainable);
}

TextEncoder TextEncoder::init(const EncoderConfig& cfg, int vocab, Rng& rng) {
    TextEncoder e;
    e.cfg = cfg;
    e.tok_emb = Tensor::zeros({vocab, cfg.dp});
    for (auto& v : e.tok_emb.vec()) v = rng.normal(0.0, 0.02);
    e.pos_emb = Tensor::zeros({cfg.max_text_len, cfg.dp});
    for (auto& v : e.pos_emb.vec()) v = rng.normal(0.0, 0.02);
    for (int l = 0; l < cfg.layers; ++l) e.layers.push_back(TransformerLayer::init(cfg.dp, cfg.heads, rng));
    e.ln_f = LayerNorm::init(cfg.dp);
    return e;
}

Tensor TextEncoder::forward(const std::vector<int>& tokens) const {
    if (tokens.empty()) throw std::invalid_argument("text encoder: empty token sequence");
    std::vector<int> ids = tokens;
    if (static_cast<int>(ids.size()) > cfg.max_text_len) ids.resize(static_cast<size_t>(cfg.max_text_len));
    Tensor x = add(embedding(tok_emb, ids), slice(pos_emb, 0, 0, static_cast<int>(ids.size())));
    Tensor mask = full_mask(static_cast<int>(ids.size()), static_cast<int>(ids.size()));
    for (const auto& layer : layers) x = layer.forward(x, mask);
    return ln_f.forward(x);
}

void TextEncoder::params(ParamRegistry& reg, const std::string& prefix, bool trainable) {
    reg.add(prefix + ".tok_emb", tok_emb, trainable);
    reg.add(prefix + ".pos_emb", pos_emb, trainable);
    for (size_t l = 0; l < layers.size(); ++l)
        layers[l].params(reg, prefix + ".layer" + std::to_string(l), trainable);
    ln_f.params(reg, prefix + ".ln_f", trainable);
}

void pretrain_encoders(ImageEncoder& ev, TextEncoder& et, const Corpus& corpus,
                       const EncoderPretrainConfig& cfg) {
    if (corpus.studies.empty()) throw std::invalid_argument("pretrain_encoders: empty corpus");
    Rng rng(cfg.seed);

    // aux heads, discarded after pretraining: 3-way status per condition
    Linear img_head = Linear::init(ev.cfg.dp, synth::kNumConditions * 3, rng);
    Linear txt_head = Linear::init(et.cfg.dp, synth::kNumConditions * 3, rng);

    ParamRegistry reg;
    ev.params(reg, "ev", true);
    et.params(reg, "et", true);
    img_head.params(reg, "img_head", true);
    txt_head.params(reg, "txt_head", true);

    AdamWConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.total_steps = cfg.steps;
    AdamW opt(reg.trainable(), ocfg);

    auto status_targets = [](const StatusVector& st) {
        std::vector<int> t;
        for (const auto s : st)
            t.push_back(s == CondStatus::positive ? 2 : s == CondStatus::uncertain ? 1 : 0);
        return t;
    };

    auto& tape = active_tape();
    for (int step = 0; step < cfg.steps; ++step) {
        opt.zero_grad();
        for (int b = 0; b < cfg.batch; ++b) {
            const auto& st = corpus.studies[static_cast<size_t>(
                rng.uniform_int(static_cast<int>(corpus.studies.size())))];
            tape.clear();
            Tensor feats;
            std::vector<int> targets;
            const double r = rng.uniform();
            if (r < 0.45 || (!st.input.lateral && !st.input.prior_report)) {
                feats = img_head.forward(mean_rows(ev.forward(st.input.frontal)));
                targets = status_targets(st.current);
            } else if (r < 0.7 && st.input.lateral) {
                feats = img_head.forward(mean_rows(ev.forward(*st.input.lateral)));
                targets = status_targets(st.current);
            } else if (st.input.prior_report && st.prior) {
                const auto toks = synth::world_vocab().tokenize(*st.input.prior_report);
                feats = txt_head.forward(mean_rows(et.forward(toks)));
                targets = status_targets(*st.prior);
            } else {
                feats = img_head.forward(mean_rows(ev.forward(st.input.frontal)));
                targets = status_targets(st.current);
            }
            Tensor logits = feats.reshape({synth::kNumConditions, 3});
            Tensor loss = scale(cross_entropy_rows(logits, targets), 1.0 / cfg.batch);
            backward(tape, loss);
        }
        tape.clear();
        opt.step();
    }
}

}  // namespace rg4::model
