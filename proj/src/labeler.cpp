#include "rg4/labeler.hpp"

#include <stdexcept>

#include "rg4/adamw.hpp"
#include "rg4/autograd.hpp"
#include "rg4/checkpoint.hpp"
#include "rg4/world.hpp"

namespace rg4::synth {

using namespace rg4::core;
using namespace rg4::data;

int ToyLabeler::class_of_value(int value) {
    switch (value) {
        case -1: return 0;
        case 0: return 1;
        case 1: return 2;
        case 2: return 3;
    }
    throw std::invalid_argument("labeler: bad label value " + std::to_string(value));
}

int ToyLabeler::value_of_class(int cls) {
    static constexpr int values[4] = {-1, 0, 1, 2};
    if (cls < 0 || cls > 3) throw std::invalid_argument("labeler: bad class " + std::to_string(cls));
    return values[cls];
}

LabelVector ToyLabeler::label_tokens(const std::vector<int>& tokens) const {
    LabelVector out = not_mentioned_labels();
    if (tokens.empty()) return out;
    NoGradGuard ng;
    Tensor logits = net.forward_ids(tokens);  // (14, 4)
    for (int s = 0; s < 14; ++s) {
        int best = 0;
        for (int c = 1; c < 4; ++c)
            if (logits.at(s, c) > logits.at(s, best)) best = c;
        out[static_cast<size_t>(s)] = value_of_class(best);
    }
    return out;
}

LabelVector ToyLabeler::label_doc(const ReportDoc& doc) const { return label_tokens(doc.tokens); }

LabelVector ToyLabeler::label_impression(const ReportDoc& doc) const {
    return label_tokens(doc.impression_tokens());
}

void ToyLabeler::params(ParamRegistry& reg, bool trainable) {
    net.params(reg, "labeler", trainable);
}

uint64_t ToyLabeler::weights_hash() const {
    ParamRegistry reg;
    const_cast<ToyLabeler*>(this)->net.params(reg, "labeler", false);
    return params_hash(reg.items());
}

CategoryFlags ToyDisc::judge_tokens(const std::vector<int>& tokens) const {
    if (tokens.empty()) return {};
    NoGradGuard ng;
    Tensor logits = net.forward_ids(tokens);  // (4, 2)
    CategoryFlags f;
    f.pc = logits.at(0, 1) > logits.at(0, 0);
    f.pp = logits.at(1, 1) > logits.at(1, 0);
    f.view = logits.at(2, 1) > logits.at(2, 0);
    f.comm = logits.at(3, 1) > logits.at(3, 0);
    return f;
}

CategoryFlags ToyDisc::judge_doc(const ReportDoc& doc) const { return judge_tokens(doc.tokens); }

void ToyDisc::params(ParamRegistry& reg, bool trainable) { net.params(reg, "disc", trainable); }

CategoryFlags oracle_flags_of(const ReportDoc& doc) { return oracle_flags(doc); }

namespace {

struct Example {
    std::vector<int> tokens;
    std::vector<int> targets;  // one class per head
};

void train_classifier(nn::TextClassifier& net, const std::vector<Example>& examples,
                      const ClassifierTrainConfig& cfg, const char* what) {
    if (examples.empty()) throw std::invalid_argument(std::string(what) + ": empty training set");
    ParamRegistry reg;
    net.params(reg, what, true);
    AdamWConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.weight_decay = cfg.weight_decay;
    ocfg.total_steps = cfg.steps;
    AdamW opt(reg.trainable(), ocfg);
    Rng rng(cfg.seed);
    auto& tape = active_tape();
    for (int step = 0; step < cfg.steps; ++step) {
        opt.zero_grad();
        for (int b = 0; b < cfg.batch; ++b) {
            const auto& ex = examples[static_cast<size_t>(rng.uniform_int(static_cast<int>(examples.size())))];
            tape.clear();
            Tensor logits = net.forward_ids(ex.tokens);
            Tensor loss = scale(cross_entropy_rows(logits, ex.targets), 1.0 / cfg.batch);
            backward(tape, loss);
        }
        tape.clear();
        opt.step();
    }
}

}  // namespace

ToyLabeler train_toy_labeler(const Corpus& corpus, const ClassifierTrainConfig& cfg) {
    const auto& vocab = world_vocab();
    std::vector<Example> examples;
    for (const auto& st : corpus.studies) {
        Example full;
        full.tokens = st.report.tokens;
        for (int s = 0; s < 14; ++s)
            full.targets.push_back(ToyLabeler::class_of_value(st.report.labels[static_cast<size_t>(s)]));
        examples.push_back(std::move(full));

        // the label-consistency gate reads impression spans, so train on them too
        Rng r = Rng(cfg.seed).fork("impr-" + st.input.id);
        if (r.bernoulli(cfg.impression_frac)) {
            const auto toks = st.report.impression_tokens();
            if (!toks.empty()) {
                ReportDoc impr = ReportDoc::from_text(vocab, vocab.detokenize(toks));
                const auto labels = oracle_labels(impr).labels;
                Example e;
                e.tokens = impr.tokens;
                for (int s = 0; s < 14; ++s)
                    e.targets.push_back(ToyLabeler::class_of_value(labels[static_cast<size_t>(s)]));
                examples.push_back(std::move(e));
            }
        }
    }
    ToyLabeler labeler;
    nn::ClassifierConfig ncfg;
    ncfg.vocab = vocab.size();
    ncfg.out_heads = 14;
    ncfg.classes = 4;
    Rng init_rng(cfg.seed);
    labeler.net = nn::TextClassifier::init(ncfg, init_rng);
    train_classifier(labeler.net, examples, cfg, "labeler");
    return labeler;
}

ToyDisc train_toy_disc(const Corpus& corpus, const ClassifierTrainConfig& cfg) {
    const auto& vocab = world_vocab();
    std::vector<Example> examples;
    for (const auto& st : corpus.studies) {
        const auto flags = oracle_flags(st.report);
        Example e;
        e.tokens = st.report.tokens;
        e.targets = {flags.pc ? 1 : 0, flags.pp ? 1 : 0, flags.view ? 1 : 0, flags.comm ? 1 : 0};
        examples.push_back(std::move(e));
    }
    ToyDisc disc;
    nn::ClassifierConfig ncfg;
    ncfg.vocab = vocab.size();
    ncfg.out_heads = 4;
    ncfg.classes = 2;
    Rng init_rng(cfg.seed + 1);
    disc.net = nn::TextClassifier::init(ncfg, init_rng);
    train_classifier(disc.net, examples, cfg, "disc");
    return disc;
}

double labeler_slot_accuracy(const ToyLabeler& labeler, const Corpus& corpus) {
    if (corpus.studies.empty()) return 0.0;
    size_t correct = 0, total = 0;
    for (const auto& st : corpus.studies) {
        const auto pred = labeler.label_doc(st.report);
        for (int s = 0; s < 14; ++s) {
            correct += pred[static_cast<size_t>(s)] == st.report.labels[static_cast<size_t>(s)];
            ++total;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace rg4::synth
