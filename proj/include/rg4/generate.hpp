#pragma once

#include "rg4/model.hpp"

namespace rg4::model {

struct GenParams {
    int num_beams = 3;
    int max_len = 150;
    int min_len = 50;
    double repetition_penalty = 2.0;
    double length_penalty = 2.0;
    double temperature = 0.0;  // 0 = deterministic argmax-within-beam
};

// Scoring contract, shared with the exhaustive-search test oracle:
// - per-step log-probabilities come from log-softmax over adjusted logits;
//   when temperature > 0 logits are divided by it first;
// - the repetition penalty applies to every token already generated in the
//   hypothesis: its positive logit is divided by the penalty, its negative
//   logit multiplied;
// - eos is banned while the hypothesis has fewer than min_len tokens;
// - a hypothesis finalizes by emitting eos (eos log-probability included in
//   its score) or by reaching max_len tokens (no eos term);
// - final score = total log-probability / max(1, len)^length_penalty with
//   len counting content tokens; ties break to the lexicographically
//   smaller token sequence.
std::vector<int> beam_search(const Rg4Model& model, const Prefix& prefix, const GenParams& params);

data::GenRecord generate(const Rg4Model& model, const data::StudyInput& study,
                         const GenParams& params);

}  // namespace rg4::model
