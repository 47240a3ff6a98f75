#include "rg4/generate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rg4/autograd.hpp"

namespace rg4::model {

using namespace rg4::core;
using namespace rg4::data;

namespace {

struct Hypothesis {
    std::vector<int> tokens;
    double logprob = 0.0;
};

std::vector<double> step_logprobs(const Rg4Model& model, const Prefix& prefix,
                                  const Hypothesis& hyp, const GenParams& params) {
    Tensor preds = model.logits_at(prefix, hyp.tokens, static_cast<int>(hyp.tokens.size()) + 1);
    const int V = preds.cols();
    std::vector<double> logits(static_cast<size_t>(V));
    for (int v = 0; v < V; ++v) logits[static_cast<size_t>(v)] = preds.at(0, v);
    if (params.temperature > 0.0)
        for (auto& z : logits) z /= params.temperature;
    if (params.repetition_penalty != 1.0) {
        for (int tok : hyp.tokens) {
            double& z = logits[static_cast<size_t>(tok)];
            z = z > 0.0 ? z / params.repetition_penalty : z * params.repetition_penalty;
        }
    }
    if (static_cast<int>(hyp.tokens.size()) < params.min_len)
        logits[static_cast<size_t>(model.vocab->eos())] = nn::kMaskOff;
    double mx = logits[0];
    for (double z : logits) mx = std::max(mx, z);
    double lse = 0.0;
    for (double z : logits) lse += std::exp(z - mx);
    lse = mx + std::log(lse);
    for (auto& z : logits) z -= lse;
    return logits;
}

double final_score(const Hypothesis& hyp, double length_penalty) {
    const double len = std::max<size_t>(1, hyp.tokens.size());
    return hyp.logprob / std::pow(len, length_penalty);
}

}  // namespace

std::vector<int> beam_search(const Rg4Model& model, const Prefix& prefix, const GenParams& params) {
    if (params.num_beams < 1) throw std::invalid_argument("generate: num_beams must be >= 1");
    if (params.min_len < 0 || params.max_len < std::max(1, params.min_len))
        throw std::invalid_argument("generate: invalid min/max length");
    NoGradGuard ng;
    const int eos = model.vocab->eos();

    std::vector<Hypothesis> live = {{}};
    std::vector<Hypothesis> finished;

    for (int step = 0; step < params.max_len && !live.empty(); ++step) {
        struct Cand {
            size_t beam;
            int token;
            double logprob;
        };
        std::vector<Cand> cands;
        for (size_t b = 0; b < live.size(); ++b) {
            const auto lp = step_logprobs(model, prefix, live[b], params);
            for (int v = 0; v < static_cast<int>(lp.size()); ++v)
                cands.push_back({b, v, live[b].logprob + lp[static_cast<size_t>(v)]});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.logprob != b.logprob) return a.logprob > b.logprob;
            if (a.beam != b.beam) return a.beam < b.beam;
            return a.token < b.token;
        });
        std::vector<Hypothesis> next;
        for (const auto& c : cands) {
            if (static_cast<int>(next.size()) >= params.num_beams) break;
            Hypothesis h = live[c.beam];
            if (c.token == eos) {
                h.logprob = c.logprob;  // eos term included, token list unchanged
                finished.push_back(h);
                continue;
            }
            h.tokens.push_back(c.token);
            h.logprob = c.logprob;
            next.push_back(std::move(h));
        }
        live = std::move(next);
        // keep only hypotheses that can still reach max_len
        if (step + 1 == params.max_len) {
            for (auto& h : live) finished.push_back(h);  // truncation, no eos term
            live.clear();
        }
    }
    for (auto& h : live) finished.push_back(h);

    if (finished.empty()) throw std::runtime_error("generate: no finished hypothesis");
    const Hypothesis* best = &finished[0];
    for (const auto& h : finished) {
        const double s = final_score(h, params.length_penalty);
        const double bs = final_score(*best, params.length_penalty);
        if (s > bs || (s == bs && h.tokens < best->tokens)) best = &h;
    }
    return best->tokens;
}

GenRecord generate(const Rg4Model& model, const StudyInput& study, const GenParams& params) {
    NoGradGuard ng;
    const auto enc = model.encode_modalities(study);
    const auto fused = model.fuse_adaptive(enc);
    const auto prefix = model.assemble_prompt(study, fused);
    GenRecord rec;
    rec.id = study.id;
    rec.scenario = study.scenario;
    rec.tokens = beam_search(model, prefix, params);
    rec.text = model.vocab->detokenize(rec.tokens);
    return rec;
}

}  // namespace rg4::model
