#pragma once

#include "rg4/generate.hpp"
#include "rg4/model.hpp"
#include "rg4/tlw.hpp"

namespace rg4::train {

struct TrainConfig {
    int epochs = 2;
    int batch = 8;
    double lr = 3e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double warmup_frac = 0.1;
    uint64_t seed = 1;
    bool tlw = false;
    tlw::TlwParams tlw_params;
    int max_report_len = 48;  // training truncation; evaluation stays untruncated
};

struct TrainStats {
    std::vector<double> epoch_loss;
    long steps = 0;
    double first_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.front(); }
    double last_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

// Language-model pretraining of the decoder on report text with an all-zero
// fused block; the stand-in for starting from a pretrained decoder.
TrainStats pretrain_decoder_lm(model::Rg4Model& model, const data::Corpus& corpus,
                               const TrainConfig& cfg);

// Alignment: trains the ATF (perceivers, projections, latent queries) only;
// encoders and decoder stay frozen.
TrainStats train_stage1(model::Rg4Model& model, const data::Corpus& corpus, const TrainConfig& cfg,
                        const synth::ToyLabeler* labeler);

// Instruction tuning on the scenario mix: ATF plus low-rank adapters on the
// decoder's query/value projections; the base decoder stays frozen. The
// epoch schedule upsamples non-sn scenarios to the sn count.
TrainStats train_stage2(model::Rg4Model& model, const data::Corpus& corpus, const TrainConfig& cfg,
                        const synth::ToyLabeler* labeler);

// Per-epoch index schedule: every sn study once plus each minority scenario
// resampled with replacement up to the sn count.
std::vector<size_t> upsampled_schedule(const data::Corpus& corpus, core::Rng& rng);

}  // namespace rg4::train
