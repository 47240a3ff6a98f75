#include "rg4/tlw.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "rg4/autograd.hpp"
#include "rg4/ops.hpp"
#include "rg4/world.hpp"

namespace rg4::tlw {

using namespace rg4::core;
using namespace rg4::data;
using synth::ToyLabeler;

double AttributionMap::completeness_gap() const {
    double s = 0.0;
    for (double v : scores) s += v;
    return std::abs(s - (output - baseline_output));
}

AttributionMap integrated_gradients(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                                    const Tensor& baseline, int steps) {
    if (steps < 1) throw std::invalid_argument("ig: steps must be >= 1");
    if (x.shape() != baseline.shape())
        throw std::invalid_argument("ig: baseline " + baseline.shape_str() + " vs input " +
                                    x.shape_str());
    const int L = x.rows(), dim = x.cols();

    AttributionMap map;
    map.steps = steps;
    {
        NoGradGuard ng;
        map.output = f(x).item();
        map.baseline_output = f(baseline).item();
    }

    std::vector<double> grad_sum(static_cast<size_t>(L) * dim, 0.0);
    auto& tape = active_tape();
    for (int k = 1; k <= steps; ++k) {
        const double alpha = (k - 0.5) / steps;  // midpoint rule
        Tensor xk = Tensor::zeros({L, dim}, true);
        for (size_t i = 0; i < xk.numel(); ++i)
            xk.vec()[i] = baseline.vec()[i] + alpha * (x.vec()[i] - baseline.vec()[i]);
        tape.clear();
        Tensor target = f(xk);
        if (!target.is_scalar()) throw std::invalid_argument("ig: target must be scalar");
        backward(tape, target);
        const auto& g = xk.grad();
        for (size_t i = 0; i < g.size(); ++i) grad_sum[i] += g[i];
        tape.clear();
    }

    map.scores.assign(static_cast<size_t>(L), 0.0);
    for (int i = 0; i < L; ++i) {
        double s = 0.0;
        for (int j = 0; j < dim; ++j)
            s += (x.at(i, j) - baseline.at(i, j)) * grad_sum[static_cast<size_t>(i) * dim + j] / steps;
        map.scores[static_cast<size_t>(i)] = s;
    }
    return map;
}

AttributionMap ig_attribution(const ToyLabeler& labeler, const std::vector<int>& tokens,
                              int label_index, int steps) {
    if (steps < 1) throw std::invalid_argument("ig: steps must be >= 1");
    if (label_index < 0 || label_index > 12)
        throw std::invalid_argument("ig: label index " + std::to_string(label_index) +
                                    " outside the 13 attributable slots");
    if (tokens.empty()) throw std::invalid_argument("ig: empty report");

    // the attributed scalar: logit of the predicted class for this slot
    int cls;
    {
        NoGradGuard ng;
        Tensor logits = labeler.net.forward_ids(tokens);
        cls = 0;
        for (int c = 1; c < 4; ++c)
            if (logits.at(label_index, c) > logits.at(label_index, cls)) cls = c;
    }

    Tensor x;
    {
        NoGradGuard ng;
        x = labeler.net.embed(tokens).clone();  // (L, dim) constant
    }
    auto logit_at = [&](const Tensor& input) {
        Tensor logits = labeler.net.forward_embedded(input);
        return slice(slice(logits, 0, label_index, 1), 1, cls, 1);
    };
    return integrated_gradients(logit_at, x, Tensor::zeros(x.shape()), steps);
}

std::vector<double> gaussian_smooth(const std::vector<double>& scores, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_smooth: sigma must be positive");
    const int L = static_cast<int>(scores.size());
    if (L == 0) return {};
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double norm = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double g = std::exp(-(static_cast<double>(k) * k) / (2.0 * sigma * sigma));
        kernel[static_cast<size_t>(k + radius)] = g;
        norm += g;
    }
    for (auto& g : kernel) g /= norm;

    auto reflect = [L](int i) {
        while (i < 0 || i >= L) {
            if (i < 0) i = -i - 1;
            if (i >= L) i = 2 * L - 1 - i;
        }
        return i;
    };
    std::vector<double> out(static_cast<size_t>(L), 0.0);
    for (int i = 0; i < L; ++i) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k)
            s += kernel[static_cast<size_t>(k + radius)] * scores[static_cast<size_t>(reflect(i + k))];
        out[static_cast<size_t>(i)] = s;
    }
    return out;
}

std::vector<double> project_scores(const std::vector<double>& scores,
                                   const std::vector<std::string>& source_words,
                                   const std::vector<std::string>& target_words, double fill) {
    // character spans of space-joined words
    auto spans = [](const std::vector<std::string>& words) {
        std::vector<std::pair<int, int>> out;
        int pos = 0;
        for (const auto& w : words) {
            out.emplace_back(pos, pos + static_cast<int>(w.size()));
            pos += static_cast<int>(w.size()) + 1;
        }
        return out;
    };
    const auto src = spans(source_words);
    const auto dst = spans(target_words);
    std::vector<double> out(target_words.size(), fill);
    for (size_t t = 0; t < dst.size(); ++t) {
        double best = fill;
        int best_overlap = 0;
        for (size_t s = 0; s < src.size() && s < scores.size(); ++s) {
            const int overlap = std::min(dst[t].second, src[s].second) -
                                std::max(dst[t].first, src[s].first);
            if (overlap > best_overlap || (overlap == best_overlap && overlap > 0 &&
                                           scores[s] > best)) {
                best_overlap = overlap;
                best = scores[s];
            }
        }
        if (best_overlap > 0) out[t] = best;
    }
    return out;
}

TokenWeights compute_token_weights(const ToyLabeler& labeler, const ReportDoc& report,
                                   const TlwParams& params) {
    if (params.lambda < 1.0) throw std::invalid_argument("tlw: lambda must be >= 1");
    const int L = static_cast<int>(report.tokens.size());
    TokenWeights tw;
    tw.c.assign(static_cast<size_t>(L), 1.0);
    for (const auto& s : report.sentences) tw.sentence_spans.emplace_back(s.begin, s.end);
    tw.flagged.assign(report.sentences.size(), false);
    if (L == 0) return tw;

    const auto labels = labeler.label_tokens(report.tokens);

    std::vector<double> scores(static_cast<size_t>(L), -1.0);
    bool any_qualifying = false;
    const auto& vocab = synth::world_vocab();
    const auto clipped = labeler.net.clip(report.tokens);
    for (int slot = 0; slot < 13; ++slot) {
        const int y = labels[static_cast<size_t>(slot)];
        if (y != -1 && y != 1) continue;
        any_qualifying = true;
        auto attr = ig_attribution(labeler, report.tokens, slot, params.ig_steps);
        // per-label normalization to max 1 so the threshold is comparable
        // across labels; maps with no positive mass cannot pass it anyway
        double mx = 0.0;
        for (double v : attr.scores) mx = std::max(mx, v);
        if (mx > 1e-12)
            for (auto& v : attr.scores) v /= mx;
        // labeler-side tokens may be a clipped view of the report; project
        // scores back by character-span overlap rather than dropping any
        std::vector<std::string> src_words, dst_words;
        for (int id : clipped) src_words.push_back(vocab.word(id));
        for (int id : report.tokens) dst_words.push_back(vocab.word(id));
        const auto projected = project_scores(attr.scores, src_words, dst_words, -1.0);
        for (int i = 0; i < L; ++i)
            scores[static_cast<size_t>(i)] = std::max(scores[static_cast<size_t>(i)],
                                                      projected[static_cast<size_t>(i)]);
    }

    if (any_qualifying) scores = gaussian_smooth(scores, params.sigma);

    for (size_t si = 0; si < tw.sentence_spans.size(); ++si) {
        const auto [b, e] = tw.sentence_spans[si];
        bool hit = false;
        for (int i = b; i < e; ++i)
            if (scores[static_cast<size_t>(i)] > params.threshold) hit = true;
        tw.flagged[si] = hit;
        const double w = hit ? params.lambda : 1.0;
        for (int i = b; i < e; ++i) tw.c[static_cast<size_t>(i)] = w;
    }
    return tw;
}

Tensor weighted_mle_loss(Tensor logits, const std::vector<int>& targets,
                         const std::vector<double>& weights) {
    if (targets.size() != weights.size() ||
        static_cast<size_t>(logits.rows()) != targets.size())
        throw std::invalid_argument("weighted_mle_loss: " + std::to_string(logits.rows()) +
                                    " logit rows vs " + std::to_string(targets.size()) +
                                    " targets vs " + std::to_string(weights.size()) + " weights");
    return cross_entropy_rows(logits, targets, weights);
}

bool WeightCache::Key::operator<(const Key& o) const {
    return std::tie(report_hash, labeler_hash, threshold, lambda, sigma, steps) <
           std::tie(o.report_hash, o.labeler_hash, o.threshold, o.lambda, o.sigma, o.steps);
}

const TokenWeights& WeightCache::get_or_compute(const ToyLabeler& labeler, const ReportDoc& report,
                                                const TlwParams& params) {
    if (!labeler_hash_) labeler_hash_ = labeler.weights_hash();
    Key key{report_hash(report), *labeler_hash_, params.threshold, params.lambda, params.sigma,
            params.ig_steps};
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
    return entries_.emplace(key, compute_token_weights(labeler, report, params)).first->second;
}

void WeightCache::save() const {
    if (path_.empty()) return;
    std::ofstream os(path_, std::ios::trunc);
    if (!os) throw std::runtime_error("weight cache: cannot open '" + path_ + "'");
    for (const auto& [key, tw] : entries_) {
        nlohmann::json spans = nlohmann::json::array();
        for (const auto& [b, e] : tw.sentence_spans) spans.push_back(nlohmann::json::array({b, e}));
        nlohmann::json j{{"report_hash", key.report_hash}, {"labeler_hash", key.labeler_hash},
                         {"threshold", key.threshold},     {"lambda", key.lambda},
                         {"sigma", key.sigma},             {"steps", key.steps},
                         {"spans", spans},                 {"flagged", tw.flagged}};
        os << j.dump() << '\n';
    }
}

void WeightCache::load() {
    if (path_.empty()) return;
    std::ifstream is(path_);
    if (!is) return;  // cache is optional
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        Key key{j.at("report_hash").get<uint64_t>(), j.at("labeler_hash").get<uint64_t>(),
                j.at("threshold").get<double>(),     j.at("lambda").get<double>(),
                j.at("sigma").get<double>(),         j.at("steps").get<int>()};
        TokenWeights tw;
        for (const auto& s : j.at("spans")) tw.sentence_spans.emplace_back(s[0].get<int>(), s[1].get<int>());
        tw.flagged = j.at("flagged").get<std::vector<bool>>();
        for (size_t si = 0; si < tw.sentence_spans.size(); ++si) {
            const auto [b, e] = tw.sentence_spans[si];
            while (static_cast<int>(tw.c.size()) < e) tw.c.push_back(1.0);
            const double w = tw.flagged[si] ? key.lambda : 1.0;
            for (int i = b; i < e; ++i) tw.c[static_cast<size_t>(i)] = w;
        }
        entries_[key] = std::move(tw);
    }
}

}  // namespace rg4::tlw
