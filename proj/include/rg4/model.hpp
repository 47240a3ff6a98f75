#pragma once

#include <optional>

#include "rg4/atf.hpp"
#include "rg4/data.hpp"
#include "rg4/encoders.hpp"
#include "rg4/lora.hpp"

namespace rg4::model {

struct DecoderConfig {
    int vocab = 0;
    int d = 64;
    int heads = 4;
    int layers = 2;
    int max_positions = 128;
};

// Pre-norm decoder block; the query and value projections carry optional
// low-rank adapters for the instruction-tuning stage.
struct DecoderBlock {
    int heads = 1;
    nn::LayerNorm ln1, ln2;
    nn::LoraLinear wq, wv;
    nn::Linear wk, wo;
    nn::FeedForward ff;

    static DecoderBlock init(int dim, int heads, core::Rng& rng);
    core::Tensor forward(const core::Tensor& x, const core::Tensor& mask) const;
    void params(core::ParamRegistry& reg, const std::string& prefix, bool base_trainable,
                bool lora_trainable);
};

struct DecoderLm {
    DecoderConfig cfg;
    core::Tensor tok_emb;  // (V, D)
    core::Tensor pos_emb;  // (P, D)
    std::vector<DecoderBlock> blocks;
    nn::LayerNorm ln_f;
    nn::Linear lm_head;  // D -> V

    static DecoderLm init(const DecoderConfig& cfg, core::Rng& rng);
    void enable_lora(int rank, double alpha, core::Rng& rng);  // on wq, wv
    // embs: (S, D) already includes soft tokens; returns logits (S, V)
    core::Tensor forward_embs(const core::Tensor& embs, int prefix_len) const;
    void params(core::ParamRegistry& reg, const std::string& prefix, bool base_trainable,
                bool lora_trainable);
};

struct ModelConfig {
    EncoderConfig enc;
    AtfConfig atf;
    DecoderConfig dec;
    int max_report_len = 48;
    int lora_rank = 32;
    double lora_alpha = 64.0;
};

enum class TrainStage {
    inference,        // everything frozen
    decoder_pretrain, // decoder base only
    stage1,           // ATF only (alignment)
    stage2,           // ATF + LoRA adapters
};

struct Encoded {
    core::Tensor vf;
    std::optional<core::Tensor> vl;
    std::optional<core::Tensor> vt;
};

struct Prefix {
    core::Tensor embs;  // (P, D)
    int len = 0;
    int instruction_len = 0;
};

struct Rg4Model {
    ModelConfig cfg;
    const data::Vocab* vocab = nullptr;
    ImageEncoder ev;
    TextEncoder et;
    AtfModule atf;
    DecoderLm dec;

    static Rg4Model init(const ModelConfig& cfg, const data::Vocab& vocab, uint64_t seed);

    std::vector<int> instruction_ids(data::Scenario sc) const;

    // Frozen encoders produce v_f / v_l / v_t; absent modalities stay absent
    // here (zero substitution happens inside fusion).
    Encoded encode_modalities(const data::StudyInput& study) const;
    FusedFeatures fuse_adaptive(const Encoded& enc) const;

    // Prefix order: instruction tokens, fused soft tokens, indication and
    // history tokens. Throws when the prefix exceeds the position budget.
    Prefix assemble_prompt(const data::StudyInput& study, const FusedFeatures& fused) const;
    // Decoder pretraining runs with an all-zeros fused block of the same shape.
    Prefix assemble_prompt_zero_fused(const data::StudyInput& study) const;

    // Teacher forcing: rows j = 0..L give the prediction logits for report
    // token j (row L predicts eos).
    core::Tensor report_logits(const Prefix& prefix, const std::vector<int>& report_tokens) const;
    // Logits at position j (1-based, j in [1, len+1]); depends only on the
    // prefix and tokens before j.
    core::Tensor logits_at(const Prefix& prefix, const std::vector<int>& report_tokens, int j) const;

    // Registry with trainability configured for the stage; includes every
    // parameter so checkpoints are complete.
    core::ParamRegistry registry(TrainStage stage);

    void save(const std::string& path);
    void load(const std::string& path);
};

}  // namespace rg4::model
