#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rg4/data.hpp"
#include "rg4/labeler.hpp"
#include "rg4/tensor.hpp"

namespace rg4::tlw {

struct TlwParams {
    double threshold = 0.4;
    double lambda = 1.75;
    double sigma = 1.0;  // tokens; kernel truncated at 3 sigma and renormalized
    int ig_steps = 32;

    bool operator==(const TlwParams&) const = default;
};

// Per-token attribution for one label slot of the labeler.
struct AttributionMap {
    std::vector<double> scores;  // one per labeler-side token
    int steps = 0;
    double output = 0.0;           // f(x) for the attributed logit
    double baseline_output = 0.0;  // f(baseline)
    double completeness_gap() const;
};

// Core path integral: straight line from `baseline` to `x`, midpoint
// Riemann sum with `steps` points; gradients of the scalar `f` are averaged
// along the path, dotted with (x - baseline) and summed per row.
AttributionMap integrated_gradients(const std::function<core::Tensor(const core::Tensor&)>& f,
                                    const core::Tensor& x, const core::Tensor& baseline, int steps);

// Straight-line integrated gradients from an all-zeros embedding baseline.
// The target scalar is the logit of the predicted class (uncertain or
// positive) for the slot.
AttributionMap ig_attribution(const synth::ToyLabeler& labeler, const std::vector<int>& tokens,
                              int label_index, int steps);

// 1-D convolution with a truncated renormalized Gaussian, mirror boundary.
std::vector<double> gaussian_smooth(const std::vector<double>& scores, double sigma);

// Maps scores computed over one tokenization onto another by maximal
// character-span overlap; positions with no overlap keep `fill`.
std::vector<double> project_scores(const std::vector<double>& scores,
                                   const std::vector<std::string>& source_words,
                                   const std::vector<std::string>& target_words, double fill);

struct TokenWeights {
    std::vector<double> c;                          // per-token, in {1, lambda}
    std::vector<std::pair<int, int>> sentence_spans;
    std::vector<bool> flagged;
};

// Algorithm: initialize scores at -1; for every slot labeled uncertain or
// positive (no-finding slot excluded) take the token-wise max of the
// max-normalized attribution map; Gaussian-smooth; lift every sentence with
// a score above threshold to lambda, everything else to 1. When no slot
// qualifies the smoothing is skipped and all weights are 1.
TokenWeights compute_token_weights(const synth::ToyLabeler& labeler, const data::ReportDoc& report,
                                   const TlwParams& params);

// mean over tokens of c_j * cross-entropy at j
core::Tensor weighted_mle_loss(core::Tensor logits, const std::vector<int>& targets,
                               const std::vector<double>& weights);

// Weight cache keyed by (report hash, labeler hash, hyperparameters),
// persisted as line-delimited records.
class WeightCache {
public:
    WeightCache() = default;
    explicit WeightCache(std::string path) : path_(std::move(path)) {}

    const TokenWeights& get_or_compute(const synth::ToyLabeler& labeler,
                                       const data::ReportDoc& report, const TlwParams& params);
    void save() const;
    void load();
    size_t size() const { return entries_.size(); }

private:
    struct Key {
        uint64_t report_hash;
        uint64_t labeler_hash;
        double threshold, lambda, sigma;
        int steps;
        bool operator<(const Key& o) const;
    };
    std::string path_;
    std::map<Key, TokenWeights> entries_;
    mutable std::optional<uint64_t> labeler_hash_;
};

}  // namespace rg4::tlw
