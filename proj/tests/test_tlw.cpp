#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "gradcheck.hpp"
#include "rg4/labeler.hpp"
#include "rg4/tlw.hpp"
#include "rg4/world.hpp"

using namespace rg4::core;
using namespace rg4::data;
using namespace rg4::synth;
using namespace rg4::tlw;

namespace {

struct Fixture {
    Corpus corpus;
    ToyLabeler labeler;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        WorldConfig wc;
        wc.seed = 991;
        wc.num_studies = 200;
        wc.mix_sn = 1.0;
        wc.mix_sw = wc.mix_mn = wc.mix_mw = 0.0;
        Fixture fx;
        fx.corpus = generate_corpus(wc);
        ClassifierTrainConfig tc;
        tc.steps = 450;
        tc.batch = 12;
        tc.seed = 17;
        fx.labeler = train_toy_labeler(fx.corpus, tc);
        return fx;
    }();
    return f;
}

// Independent scalar re-implementation of the weight procedure: plain loops,
// its own path integral, its own convolution.
std::vector<double> naive_token_weights(const ToyLabeler& labeler, const ReportDoc& report,
                                        const TlwParams& p) {
    const size_t L = report.tokens.size();
    std::vector<double> c(L, -1.0);
    const auto labels = labeler.label_tokens(report.tokens);
    bool any = false;
    for (int slot = 0; slot < 13; ++slot) {
        if (labels[size_t(slot)] != 1 && labels[size_t(slot)] != -1) continue;
        any = true;
        // predicted class
        int cls = 0;
        {
            NoGradGuard ng;
            Tensor lg = labeler.net.forward_ids(report.tokens);
            for (int k = 1; k < 4; ++k)
                if (lg.at(slot, k) > lg.at(slot, cls)) cls = k;
        }
        Tensor x;
        {
            NoGradGuard ng;
            x = labeler.net.embed(report.tokens).clone();
        }
        const int rows = x.rows(), dim = x.cols();
        std::vector<double> gsum(size_t(rows) * size_t(dim), 0.0);
        auto& tape = active_tape();
        for (int k = 1; k <= p.ig_steps; ++k) {
            const double alpha = (k - 0.5) / p.ig_steps;
            Tensor xk = Tensor::zeros({rows, dim}, true);
            for (size_t i = 0; i < xk.numel(); ++i) xk.vec()[i] = alpha * x.vec()[i];
            tape.clear();
            Tensor lg = labeler.net.forward_embedded(xk);
            Tensor tgt = slice(slice(lg, 0, slot, 1), 1, cls, 1);
            backward(tape, tgt);
            for (size_t i = 0; i < gsum.size(); ++i) gsum[i] += xk.grad()[i];
            tape.clear();
        }
        std::vector<double> attr(size_t(rows), 0.0);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < dim; ++j)
                attr[size_t(i)] += x.at(i, j) * gsum[size_t(i) * size_t(dim) + size_t(j)] / p.ig_steps;
        double mx = 0.0;
        for (double v : attr) mx = std::max(mx, v);
        if (mx > 1e-12)
            for (auto& v : attr) v /= mx;
        for (size_t i = 0; i < L && i < attr.size(); ++i) c[i] = std::max(c[i], attr[i]);
    }
    if (any) {
        // direct-sum convolution with mirrored boundary
        const int radius = int(std::ceil(3.0 * p.sigma));
        std::vector<double> kern(size_t(2 * radius + 1));
        double norm = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            kern[size_t(k + radius)] = std::exp(-double(k) * k / (2.0 * p.sigma * p.sigma));
            norm += kern[size_t(k + radius)];
        }
        for (auto& g : kern) g /= norm;
        std::vector<double> sm(L, 0.0);
        for (int i = 0; i < int(L); ++i) {
            double s = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                int idx = i + k;
                while (idx < 0 || idx >= int(L)) {
                    if (idx < 0) idx = -idx - 1;
                    if (idx >= int(L)) idx = 2 * int(L) - 1 - idx;
                }
                s += kern[size_t(k + radius)] * c[size_t(idx)];
            }
            sm[size_t(i)] = s;
        }
        c = sm;
    }
    std::vector<double> w(L, 1.0);
    for (const auto& sent : report.sentences) {
        bool hit = false;
        for (int i = sent.begin; i < sent.end; ++i) hit = hit || c[size_t(i)] > p.threshold;
        for (int i = sent.begin; i < sent.end; ++i) w[size_t(i)] = hit ? p.lambda : 1.0;
    }
    return w;
}

}  // namespace

TEST_CASE("ig on a linear model recovers w_i * x_i at any step count") {
    Rng rng(31);
    Tensor w = gradcheck::random_tensor({4, 3}, rng, -1, 1, false);
    Tensor x = gradcheck::random_tensor({4, 3}, rng, -1, 1, false);
    auto f = [&](const Tensor& input) { return sum(mul(input, w)); };
    for (int steps : {1, 7}) {
        const auto map = integrated_gradients(f, x, Tensor::zeros({4, 3}), steps);
        for (int i = 0; i < 4; ++i) {
            double expect = 0.0;
            for (int j = 0; j < 3; ++j) expect += w.at(i, j) * x.at(i, j);
            CHECK(map.scores[size_t(i)] == doctest::Approx(expect).epsilon(1e-12));
        }
        CHECK(map.completeness_gap() < 1e-12);
    }
}

TEST_CASE("ig attributions vanish when input equals baseline") {
    Rng rng(32);
    Tensor w = gradcheck::random_tensor({3, 2}, rng, -1, 1, false);
    auto f = [&](const Tensor& input) { return sum(mul(gelu(input), w)); };
    Tensor x = gradcheck::random_tensor({3, 2}, rng, -1, 1, false);
    const auto map = integrated_gradients(f, x, x.clone(), 8);
    for (double s : map.scores) CHECK(s == 0.0);
}

TEST_CASE("ig rejects zero steps") {
    const auto& fx = fixture();
    const auto& doc = fx.corpus.studies[0].report;
    CHECK_THROWS_AS(ig_attribution(fx.labeler, doc.tokens, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(ig_attribution(fx.labeler, doc.tokens, 13, 8), std::invalid_argument);
}

TEST_CASE("ig completeness holds within one percent at 128 steps") {
    const auto& fx = fixture();
    int checked = 0;
    for (size_t i = 0; i < fx.corpus.studies.size() && checked < 5; ++i) {
        const auto& doc = fx.corpus.studies[i].report;
        const auto labels = fx.labeler.label_doc(doc);
        for (int slot = 0; slot < 13 && checked < 5; ++slot) {
            if (labels[size_t(slot)] != 1 && labels[size_t(slot)] != -1) continue;
            const auto map = ig_attribution(fx.labeler, doc.tokens, slot, 128);
            const double target = std::abs(map.output - map.baseline_output);
            REQUIRE(target > 1e-9);
            CHECK(map.completeness_gap() <= 0.01 * target);
            ++checked;
        }
    }
    CHECK(checked == 5);
}

TEST_CASE("gaussian smoothing preserves constants and spreads spikes symmetrically") {
    std::vector<double> flat(9, 0.7);
    const auto smoothed = gaussian_smooth(flat, 1.0);
    for (double v : smoothed) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));

    std::vector<double> spike(11, 0.0);
    spike[5] = 1.0;
    const auto sp = gaussian_smooth(spike, 1.0);
    for (int k = 1; k <= 3; ++k) CHECK(sp[size_t(5 - k)] == doctest::Approx(sp[size_t(5 + k)]).epsilon(1e-12));
    CHECK(sp[5] > sp[4]);
}

TEST_CASE("gaussian smoothing matches a direct-sum oracle") {
    Rng rng(33);
    std::vector<double> xs(20);
    for (auto& v : xs) v = rng.uniform(-2, 2);
    const double sigma = 1.3;
    const auto got = gaussian_smooth(xs, sigma);

    const int radius = int(std::ceil(3.0 * sigma));
    std::vector<double> kern(size_t(2 * radius + 1));
    double norm = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kern[size_t(k + radius)] = std::exp(-double(k) * k / (2.0 * sigma * sigma));
        norm += kern[size_t(k + radius)];
    }
    for (int i = 0; i < 20; ++i) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            int idx = i + k;
            while (idx < 0 || idx >= 20) {
                if (idx < 0) idx = -idx - 1;
                if (idx >= 20) idx = 39 - idx;
            }
            s += kern[size_t(k + radius)] / norm * xs[size_t(idx)];
        }
        CHECK(std::abs(got[size_t(i)] - s) < 1e-12);
    }
}

TEST_CASE("project_scores is identity for matching tokenizations and maps truncations") {
    std::vector<std::string> words = {"effusion", "is", "seen", "."};
    std::vector<double> scores = {0.9, 0.1, 0.2, 0.05};
    const auto same = project_scores(scores, words, words, -1.0);
    for (size_t i = 0; i < words.size(); ++i) CHECK(same[i] == scores[i]);

    std::vector<std::string> longer = {"effusion", "is", "seen", ".", "edema", "is", "seen", "."};
    const auto proj = project_scores(scores, words, longer, -1.0);
    CHECK(proj[0] == 0.9);
    CHECK(proj[3] == 0.05);
    // the unattributed tail keeps the fill value
    CHECK(proj[5] == -1.0);
    CHECK(proj[6] == -1.0);
}

TEST_CASE("all-negative reports keep every weight at one") {
    const auto& fx = fixture();
    const auto& vocab = world_vocab();
    ReportDoc doc = ReportDoc::from_text(
        vocab, "no evidence of effusion . there is no edema . impression . no acute findings .");
    const auto labels = fx.labeler.label_doc(doc);
    bool qualifying = false;
    for (int s = 0; s < 13; ++s) qualifying |= labels[size_t(s)] == 1 || labels[size_t(s)] == -1;
    REQUIRE_FALSE(qualifying);  // trained labeler reads it as negative/absent
    TlwParams p;
    p.ig_steps = 8;
    const auto tw = compute_token_weights(fx.labeler, doc, p);
    for (double c : tw.c) CHECK(c == 1.0);
    for (bool f : tw.flagged) CHECK_FALSE(f);
}

TEST_CASE("a positive diagnosis lifts its whole sentence to lambda") {
    const auto& fx = fixture();
    const auto& vocab = world_vocab();
    ReportDoc doc = ReportDoc::from_text(
        vocab,
        "there is effusion in the left lung . the remaining lungs are clear . impression . "
        "effusion is present .");
    TlwParams p;  // lambda 1.75, threshold 0.4
    p.ig_steps = 24;
    const auto tw = compute_token_weights(fx.labeler, doc, p);
    // weights take exactly the two values and are sentence-constant
    std::set<double> seen(tw.c.begin(), tw.c.end());
    for (double v : seen) CHECK((v == 1.0 || v == 1.75));
    for (size_t si = 0; si < tw.sentence_spans.size(); ++si) {
        const auto [b, e] = tw.sentence_spans[si];
        for (int i = b; i < e; ++i) CHECK(tw.c[size_t(i)] == (tw.flagged[si] ? 1.75 : 1.0));
    }
    // the effusion sentences carry the emphasis
    int flagged_with_effusion = 0;
    const int effusion = vocab.id("effusion");
    for (size_t si = 0; si < tw.flagged.size(); ++si) {
        if (!tw.flagged[si]) continue;
        const auto toks = doc.sentence_tokens(si);
        if (std::find(toks.begin(), toks.end(), effusion) != toks.end()) ++flagged_with_effusion;
    }
    CHECK(flagged_with_effusion >= 1);
}

TEST_CASE("vectorized weights match the naive scalar re-implementation") {
    const auto& fx = fixture();
    TlwParams p;
    p.ig_steps = 8;
    int compared = 0;
    for (size_t i = 0; i < fx.corpus.studies.size() && compared < 6; i += 30, ++compared) {
        const auto& doc = fx.corpus.studies[i].report;
        const auto got = compute_token_weights(fx.labeler, doc, p);
        const auto oracle = naive_token_weights(fx.labeler, doc, p);
        REQUIRE(got.c.size() == oracle.size());
        for (size_t t = 0; t < oracle.size(); ++t) CHECK(got.c[t] == oracle[t]);
    }
}

TEST_CASE("raising the threshold never adds lambda sentences") {
    const auto& fx = fixture();
    TlwParams lo;
    lo.ig_steps = 8;
    lo.threshold = 0.2;
    TlwParams hi = lo;
    hi.threshold = 0.6;
    for (size_t i = 0; i < 4; ++i) {
        const auto& doc = fx.corpus.studies[i * 7].report;
        const auto a = compute_token_weights(fx.labeler, doc, lo);
        const auto b = compute_token_weights(fx.labeler, doc, hi);
        for (size_t s = 0; s < a.flagged.size(); ++s)
            if (b.flagged[s]) CHECK(a.flagged[s]);  // set inclusion
    }
}

TEST_CASE("token weights are a pure function of their inputs") {
    const auto& fx = fixture();
    TlwParams p;
    p.ig_steps = 8;
    const auto& doc = fx.corpus.studies[3].report;
    const auto a = compute_token_weights(fx.labeler, doc, p);
    const auto b = compute_token_weights(fx.labeler, doc, p);
    CHECK(a.c == b.c);  // bitwise
    CHECK(a.flagged == b.flagged);
}

TEST_CASE("weighted loss reduces to cross entropy at unit weights and scales linearly") {
    Rng rng(34);
    Tensor logits = gradcheck::random_tensor({3, 5}, rng, -2, 2, false);
    std::vector<int> targets = {1, 4, 0};
    const double base = weighted_mle_loss(logits, targets, {1.0, 1.0, 1.0}).item();
    const double plain = cross_entropy_rows(logits, targets).item();
    CHECK(base == doctest::Approx(plain).epsilon(1e-15));
    const double doubled = weighted_mle_loss(logits, targets, {2.0, 2.0, 2.0}).item();
    CHECK(doubled == doctest::Approx(2.0 * base).epsilon(1e-12));
    CHECK_THROWS_AS(weighted_mle_loss(logits, targets, {1.0}), std::invalid_argument);
}

TEST_CASE("three-token weighted loss matches a hand computation") {
    // logits chosen so log-softmax is easy to evaluate manually
    Tensor logits = Tensor::from({3, 2}, {0.0, 0.0, 1.0, 0.0, 0.0, 2.0});
    std::vector<int> targets = {0, 0, 1};
    std::vector<double> w = {1.0, 1.75, 0.5};
    const double l0 = std::log(2.0);
    const double l1 = std::log(1.0 + std::exp(-1.0));
    const double l2 = std::log(1.0 + std::exp(-2.0));
    const double expect = (1.0 * l0 + 1.75 * l1 + 0.5 * l2) / 3.0;
    CHECK(std::abs(weighted_mle_loss(logits, targets, w).item() - expect) < 1e-12);
}

TEST_CASE("weight cache round-trips and reuses entries") {
    const auto& fx = fixture();
    TlwParams p;
    p.ig_steps = 8;
    const auto path = std::string("/tmp/rg4_weight_cache_test.jsonl");
    WeightCache cache(path);
    const auto& doc = fx.corpus.studies[5].report;
    const auto& a = cache.get_or_compute(fx.labeler, doc, p);
    const auto c_copy = a.c;
    const auto& b = cache.get_or_compute(fx.labeler, doc, p);
    CHECK(&a == &b);  // cache hit
    cache.save();
    WeightCache loaded(path);
    loaded.load();
    CHECK(loaded.size() == 1);
    const auto& c = loaded.get_or_compute(fx.labeler, doc, p);
    CHECK(c.c == c_copy);
    std::remove(path.c_str());
}
