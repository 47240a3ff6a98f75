#pragma once

#include <array>

#include "rg4/classifier.hpp"
#include "rg4/data.hpp"

namespace rg4::synth {

// 14 four-way heads over report text; the trained stand-in for the frozen
// label extractor. Class order per head: uncertain(-1), negative(0),
// positive(1), not mentioned(2).
struct ToyLabeler {
    nn::TextClassifier net;

    static int class_of_value(int value);
    static int value_of_class(int cls);

    // Per-slot argmax; an empty report maps to all-not-mentioned.
    data::LabelVector label_tokens(const std::vector<int>& tokens) const;
    data::LabelVector label_doc(const data::ReportDoc& doc) const;
    data::LabelVector label_impression(const data::ReportDoc& doc) const;

    void params(core::ParamRegistry& reg, bool trainable = false);
    uint64_t weights_hash() const;
};

// Four binary heads flagging the uninferable-content categories.
struct ToyDisc {
    nn::TextClassifier net;

    data::CategoryFlags judge_tokens(const std::vector<int>& tokens) const;
    data::CategoryFlags judge_doc(const data::ReportDoc& doc) const;

    void params(core::ParamRegistry& reg, bool trainable = false);
};

struct ClassifierTrainConfig {
    int steps = 900;
    int batch = 16;
    double lr = 1e-3;
    double weight_decay = 0.01;
    uint64_t seed = 7;
    double impression_frac = 0.3;  // labeler only: impression-span augmentation
};

ToyLabeler train_toy_labeler(const data::Corpus& corpus, const ClassifierTrainConfig& cfg);
ToyDisc train_toy_disc(const data::Corpus& corpus, const ClassifierTrainConfig& cfg);

// Fraction of slots matching the oracle labels.
double labeler_slot_accuracy(const ToyLabeler& labeler, const data::Corpus& corpus);

struct CategoryScores {
    std::array<double, 4> precision{};  // pc, pp, view, comm
    std::array<double, 4> recall{};
    std::array<double, 4> f1{};
};

// thin indirection so the template below does not need world.hpp
data::CategoryFlags oracle_flags_of(const data::ReportDoc& doc);

// Judge vs oracle flags over a corpus; works for any judge callable.
template <class Judge>
CategoryScores category_scores(Judge&& judge, const data::Corpus& corpus) {
    std::array<double, 4> tp{}, fp{}, fn{};
    for (const auto& st : corpus.studies) {
        const auto gold = oracle_flags_of(st.report);
        const data::CategoryFlags pred = judge(st.report);
        const bool g[4] = {gold.pc, gold.pp, gold.view, gold.comm};
        const bool p[4] = {pred.pc, pred.pp, pred.view, pred.comm};
        for (int k = 0; k < 4; ++k) {
            if (p[k] && g[k]) tp[static_cast<size_t>(k)] += 1;
            if (p[k] && !g[k]) fp[static_cast<size_t>(k)] += 1;
            if (!p[k] && g[k]) fn[static_cast<size_t>(k)] += 1;
        }
    }
    CategoryScores s;
    for (int k = 0; k < 4; ++k) {
        const double denom_p = tp[static_cast<size_t>(k)] + fp[static_cast<size_t>(k)];
        const double denom_r = tp[static_cast<size_t>(k)] + fn[static_cast<size_t>(k)];
        s.precision[static_cast<size_t>(k)] = denom_p > 0 ? tp[static_cast<size_t>(k)] / denom_p : 1.0;
        s.recall[static_cast<size_t>(k)] = denom_r > 0 ? tp[static_cast<size_t>(k)] / denom_r : 1.0;
        const double pr = s.precision[static_cast<size_t>(k)] + s.recall[static_cast<size_t>(k)];
        s.f1[static_cast<size_t>(k)] =
            pr > 0 ? 2 * s.precision[static_cast<size_t>(k)] * s.recall[static_cast<size_t>(k)] / pr : 0.0;
    }
    return s;
}

}  // namespace rg4::synth
