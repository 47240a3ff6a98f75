#include "rg4/train.hpp"

#include <algorithm>
#include <stdexcept>

#include "rg4/adamw.hpp"
#include "rg4/autograd.hpp"
#include "rg4/world.hpp"

namespace rg4::train {

using namespace rg4::core;
using namespace rg4::data;
using model::Rg4Model;
using model::TrainStage;

namespace {

std::vector<int> truncated_report(const Study& st, int max_len) {
    auto toks = st.report.tokens;
    if (static_cast<int>(toks.size()) > max_len) toks.resize(static_cast<size_t>(max_len));
    return toks;
}

// weights for report tokens plus the trailing eos target
std::vector<double> loss_weights(const Study& st, const std::vector<int>& toks,
                                 const TrainConfig& cfg, const synth::ToyLabeler* labeler,
                                 tlw::WeightCache* cache) {
    std::vector<double> w(toks.size() + 1, 1.0);
    if (!cfg.tlw || !labeler) return w;
    const auto& tw = cache->get_or_compute(*labeler, st.report, cfg.tlw_params);
    for (size_t i = 0; i < toks.size() && i < tw.c.size(); ++i) w[i] = tw.c[i];
    return w;
}

TrainStats run_training(Rg4Model& model, const Corpus& corpus, const TrainConfig& cfg,
                        TrainStage stage, const synth::ToyLabeler* labeler) {
    if (corpus.studies.empty()) throw std::invalid_argument("train: empty corpus");
    auto reg = model.registry(stage);
    const long steps_per_epoch =
        stage == TrainStage::stage2
            ? 0  // computed per epoch from the schedule
            : (static_cast<long>(corpus.studies.size()) + cfg.batch - 1) / cfg.batch;

    AdamWConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    ocfg.beta1 = cfg.beta1;
    ocfg.beta2 = cfg.beta2;
    ocfg.warmup_frac = cfg.warmup_frac;
    ocfg.total_steps = std::max<long>(1, steps_per_epoch * cfg.epochs);
    AdamW opt(reg.trainable(), ocfg);

    tlw::WeightCache cache;
    Rng rng(cfg.seed);
    auto& tape = active_tape();
    TrainStats stats;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order;
        if (stage == TrainStage::stage2) {
            Rng erng = rng.fork("epoch-" + std::to_string(epoch));
            order = upsampled_schedule(corpus, erng);
        } else {
            order.resize(corpus.studies.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = i;
            rng.shuffle(order);
        }
        double epoch_loss = 0.0;
        long examples = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch));
            opt.zero_grad();
            for (size_t i = start; i < end; ++i) {
                const auto& st = corpus.studies[order[i]];
                tape.clear();
                model::Prefix prefix;
                if (stage == TrainStage::decoder_pretrain) {
                    prefix = model.assemble_prompt_zero_fused(st.input);
                } else {
                    const auto enc = model.encode_modalities(st.input);
                    prefix = model.assemble_prompt(st.input, model.fuse_adaptive(enc));
                }
                const auto toks = truncated_report(st, cfg.max_report_len);
                auto targets = toks;
                targets.push_back(model.vocab->eos());
                const auto w = loss_weights(st, toks, cfg, labeler, &cache);
                Tensor logits = model.report_logits(prefix, toks);
                Tensor loss = scale(tlw::weighted_mle_loss(logits, targets, w),
                                    1.0 / static_cast<double>(end - start));
                backward(tape, loss);
                epoch_loss += loss.item() * static_cast<double>(end - start);
                ++examples;
            }
            tape.clear();
            opt.step();
            ++stats.steps;
        }
        stats.epoch_loss.push_back(examples > 0 ? epoch_loss / examples : 0.0);
    }
    return stats;
}

}  // namespace

std::vector<size_t> upsampled_schedule(const Corpus& corpus, Rng& rng) {
    std::array<std::vector<size_t>, 4> by_scenario;
    for (size_t i = 0; i < corpus.studies.size(); ++i)
        by_scenario[static_cast<size_t>(corpus.studies[i].input.scenario)].push_back(i);
    const auto& sn = by_scenario[static_cast<size_t>(Scenario::sn)];
    const size_t target = sn.size();
    if (target == 0) throw std::invalid_argument("schedule: corpus has no sn studies");
    std::vector<size_t> order = sn;
    for (Scenario sc : {Scenario::sw, Scenario::mn, Scenario::mw}) {
        const auto& pool = by_scenario[static_cast<size_t>(sc)];
        if (pool.empty()) continue;
        for (size_t k = 0; k < target; ++k)
            order.push_back(pool[static_cast<size_t>(rng.uniform_int(static_cast<int>(pool.size())))]);
    }
    rng.shuffle(order);
    return order;
}

TrainStats pretrain_decoder_lm(Rg4Model& model, const Corpus& corpus, const TrainConfig& cfg) {
    return run_training(model, corpus, cfg, TrainStage::decoder_pretrain, nullptr);
}

TrainStats train_stage1(Rg4Model& model, const Corpus& corpus, const TrainConfig& cfg,
                        const synth::ToyLabeler* labeler) {
    return run_training(model, corpus, cfg, TrainStage::stage1, labeler);
}

TrainStats train_stage2(Rg4Model& model, const Corpus& corpus, const TrainConfig& cfg,
                        const synth::ToyLabeler* labeler) {
    if (!model.dec.blocks.empty() && !model.dec.blocks[0].wq.enabled) {
        Rng rng = Rng(cfg.seed).fork("lora-init");
        model.dec.enable_lora(model.cfg.lora_rank, model.cfg.lora_alpha, rng);
    }
    return run_training(model, corpus, cfg, TrainStage::stage2, labeler);
}

}  // namespace rg4::train
