#include "rg4/model.hpp"

#include <cmath>
#include <stdexcept>

#include "rg4/checkpoint.hpp"

namespace rg4::model {

using namespace rg4::core;
using namespace rg4::nn;
using namespace rg4::data;

DecoderBlock DecoderBlock::init(int dim, int heads, Rng& rng) {
    DecoderBlock b;
    b.heads = heads;
    b.ln1 = LayerNorm::init(dim);
    b.ln2 = LayerNorm::init(dim);
    b.wq = LoraLinear::wrap(Linear::init(dim, dim, rng));
    b.wv = LoraLinear::wrap(Linear::init(dim, dim, rng));
    b.wk = Linear::init(dim, dim, rng);
    b.wo = Linear::init(dim, dim, rng);
    b.ff = FeedForward::init(dim, 4 * dim, rng);
    return b;
}

Tensor DecoderBlock::forward(const Tensor& x, const Tensor& mask) const {
    Tensor h = ln1.forward(x);
    Tensor att = nn::attention(wq.forward(h), wk.forward(h), wv.forward(h), mask, heads);
    Tensor y = add(x, wo.forward(att));
    return add(y, ff.forward(ln2.forward(y)));
}

void DecoderBlock::params(ParamRegistry& reg, const std::string& prefix, bool base_trainable,
                          bool lora_trainable) {
    ln1.params(reg, prefix + ".ln1", base_trainable);
    ln2.params(reg, prefix + ".ln2", base_trainable);
    wq.params(reg, prefix + ".wq", base_trainable, lora_trainable);
    wv.params(reg, prefix + ".wv", base_trainable, lora_trainable);
    wk.params(reg, prefix + ".wk", base_trainable);
    wo.params(reg, prefix + ".wo", base_trainable);
    ff.params(reg, prefix + ".ff", base_trainable);
}

DecoderLm DecoderLm::init(const DecoderConfig& cfg, Rng& rng) {
    DecoderLm d;
    d.cfg = cfg;
    d.tok_emb = Tensor::zeros({cfg.vocab, cfg.d});
    for (auto& v : d.tok_emb.vec()) v = rng.normal(0.0, 0.02);
    d.pos_emb = Tensor::zeros({cfg.max_positions, cfg.d});
    for (auto& v : d.pos_emb.vec()) v = rng.normal(0.0, 0.02);
    for (int l = 0; l < cfg.layers; ++l) d.blocks.push_back(DecoderBlock::init(cfg.d, cfg.heads, rng));
    d.ln_f = LayerNorm::init(cfg.d);
    d.lm_head = Linear::init(cfg.d, cfg.vocab, rng);
    return d;
}

void DecoderLm::enable_lora(int rank, double alpha, Rng& rng) {
    for (auto& b : blocks) {
        b.wq.enable(rank, alpha, rng);
        b.wv.enable(rank, alpha, rng);
    }
}

Tensor DecoderLm::forward_embs(const Tensor& embs, int prefix_len) const {
    const int S = embs.rows();
    if (S > cfg.max_positions)
        throw std::invalid_argument("decoder: sequence length " + std::to_string(S) +
                                    " exceeds position budget " + std::to_string(cfg.max_positions));
    Tensor x = add(embs, slice(pos_emb, 0, 0, S));
    Tensor mask = causal_prefix_mask(prefix_len, S);
#ifndef NDEBUG
    validate_decoder_mask(mask, prefix_len);
#endif
    for (const auto& b : blocks) x = b.forward(x, mask);
    return lm_head.forward(ln_f.forward(x));
}

void DecoderLm::params(ParamRegistry& reg, const std::string& prefix, bool base_trainable,
                       bool lora_trainable) {
    reg.add(prefix + ".tok_emb", tok_emb, base_trainable);
    reg.add(prefix + ".pos_emb", pos_emb, base_trainable);
    for (size_t l = 0; l < blocks.size(); ++l)
        blocks[l].params(reg, prefix + ".block" + std::to_string(l), base_trainable, lora_trainable);
    ln_f.params(reg, prefix + ".ln_f", base_trainable);
    lm_head.params(reg, prefix + ".lm_head", base_trainable);
}

Rg4Model Rg4Model::init(const ModelConfig& cfg, const Vocab& vocab, uint64_t seed) {
    Rg4Model m;
    m.cfg = cfg;
    m.vocab = &vocab;
    Rng rng(seed);
    Rng ev_rng = rng.fork("image-encoder");
    Rng et_rng = rng.fork("text-encoder");
    Rng atf_rng = rng.fork("atf");
    Rng dec_rng = rng.fork("decoder");
    m.ev = ImageEncoder::init(cfg.enc, ev_rng);
    m.et = TextEncoder::init(cfg.enc, vocab.size(), et_rng);
    m.atf = AtfModule::init(cfg.atf, atf_rng);
    DecoderConfig dc = cfg.dec;
    dc.vocab = vocab.size();
    m.dec = DecoderLm::init(dc, dec_rng);
    return m;
}

std::vector<int> Rg4Model::instruction_ids(Scenario sc) const {
    return vocab->tokenize("generate the report for scenario " + to_string(sc) + " .");
}

Encoded Rg4Model::encode_modalities(const StudyInput& study) const {
    study.validate();
    Encoded out;
    out.vf = ev.forward(study.frontal);
    if (study.lateral) out.vl = ev.forward(*study.lateral);
    if (study.prior_report) out.vt = et.forward(vocab->tokenize(*study.prior_report));
    return out;
}

FusedFeatures Rg4Model::fuse_adaptive(const Encoded& enc) const {
    return atf.fuse(enc.vf, enc.vl ? &*enc.vl : nullptr, enc.vt ? &*enc.vt : nullptr);
}

namespace {

Prefix build_prefix(const Rg4Model& m, const StudyInput& study, const Tensor& fused_tokens) {
    std::vector<Tensor> parts;
    const auto instr = m.instruction_ids(study.scenario);
    parts.push_back(embedding(m.dec.tok_emb, instr));
    parts.push_back(fused_tokens);
    int ih_len = 0;
    if (study.indication) {
        const auto ids = m.vocab->tokenize(*study.indication);
        parts.push_back(embedding(m.dec.tok_emb, ids));
        ih_len += static_cast<int>(ids.size());
    }
    if (study.history) {
        const auto ids = m.vocab->tokenize(*study.history);
        parts.push_back(embedding(m.dec.tok_emb, ids));
        ih_len += static_cast<int>(ids.size());
    }
    Prefix p;
    p.instruction_len = static_cast<int>(instr.size());
    p.len = p.instruction_len + fused_tokens.rows() + ih_len;
    if (p.len + 1 > m.dec.cfg.max_positions)
        throw std::invalid_argument("prompt: prefix length " + std::to_string(p.len) +
                                    " exceeds position budget " +
                                    std::to_string(m.dec.cfg.max_positions));
    p.embs = parts.size() == 1 ? parts[0] : concat(parts, 0);
    return p;
}

}  // namespace

Prefix Rg4Model::assemble_prompt(const StudyInput& study, const FusedFeatures& fused) const {
    if (instruction_ids(study.scenario).empty())
        throw std::invalid_argument("prompt: empty instruction");
    return build_prefix(*this, study, fused.tokens);
}

Prefix Rg4Model::assemble_prompt_zero_fused(const StudyInput& study) const {
    return build_prefix(*this, study, Tensor::zeros({cfg.atf.num_latents, cfg.atf.d}));
}

Tensor Rg4Model::report_logits(const Prefix& prefix, const std::vector<int>& report_tokens) const {
    Tensor embs = report_tokens.empty()
                      ? prefix.embs
                      : concat({prefix.embs, embedding(dec.tok_emb, report_tokens)}, 0);
    Tensor logits = dec.forward_embs(embs, prefix.len);
    // predictions start at the last prefix position
    return slice(logits, 0, prefix.len - 1, static_cast<int>(report_tokens.size()) + 1);
}

Tensor Rg4Model::logits_at(const Prefix& prefix, const std::vector<int>& report_tokens, int j) const {
    const int len = static_cast<int>(report_tokens.size());
    if (j < 1 || j > len + 1)
        throw std::invalid_argument("logits_at: j = " + std::to_string(j) + " outside [1, " +
                                    std::to_string(len + 1) + "]");
    std::vector<int> before(report_tokens.begin(), report_tokens.begin() + (j - 1));
    Tensor preds = report_logits(prefix, before);
    return slice(preds, 0, j - 1, 1);
}

ParamRegistry Rg4Model::registry(TrainStage stage) {
    ParamRegistry reg;
    const bool enc_tr = false;  // encoders are pretrained and frozen everywhere
    const bool atf_tr = stage == TrainStage::stage1 || stage == TrainStage::stage2;
    const bool dec_tr = stage == TrainStage::decoder_pretrain;
    const bool lora_tr = stage == TrainStage::stage2;
    ev.params(reg, "ev", enc_tr);
    et.params(reg, "et", enc_tr);
    atf.params(reg, "atf", atf_tr);
    dec.params(reg, "dec", dec_tr, lora_tr);
    return reg;
}

void Rg4Model::save(const std::string& path) {
    auto reg = registry(TrainStage::inference);
    auto items = reg.items();
    // adapter presence marker so load() can restore the right shape
    const bool lora = !dec.blocks.empty() && dec.blocks[0].wq.enabled;
    Tensor meta = Tensor::from({2}, {lora ? static_cast<double>(dec.blocks[0].wq.rank) : 0.0,
                                     lora ? dec.blocks[0].wq.alpha : 0.0});
    items.push_back({"meta.lora", &meta, false});
    save_checkpoint(path, items);
}

void Rg4Model::load(const std::string& path) {
    auto loaded = load_checkpoint(path);
    auto it = loaded.find("meta.lora");
    if (it != loaded.end() && it->second.vec()[0] >= 1.0 &&
        (dec.blocks.empty() || !dec.blocks[0].wq.enabled)) {
        Rng rng(0);
        dec.enable_lora(static_cast<int>(it->second.vec()[0]), it->second.vec()[1], rng);
    }
    auto reg = registry(TrainStage::inference);
    auto items = reg.items();
    load_into(path, items);
}

}  // namespace rg4::model
