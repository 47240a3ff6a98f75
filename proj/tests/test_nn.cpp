#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "rg4/lora.hpp"
#include "rg4/nn.hpp"
#include "rg4/perceiver.hpp"

using namespace rg4::core;
using namespace rg4::nn;

TEST_CASE("attention with one query and one key returns the value row") {
    Tensor q = Tensor::from({1, 4}, {0.3, -1.0, 2.0, 0.1});
    Tensor k = Tensor::from({1, 4}, {1.0, 1.0, -0.5, 0.0});
    Tensor v = Tensor::from({1, 4}, {5.0, -3.0, 2.5, 0.25});
    Tensor out = attention(q, k, v, full_mask(1, 1), 2);
    for (int j = 0; j < 4; ++j) CHECK(out.at(0, j) == v.at(0, j));
}

TEST_CASE("attention with all keys masked except one returns the unmasked value") {
    Rng rng(2);
    Tensor q = gradcheck::random_tensor({2, 4}, rng, -1, 1, false);
    Tensor k = gradcheck::random_tensor({3, 4}, rng, -1, 1, false);
    Tensor v = gradcheck::random_tensor({3, 4}, rng, -1, 1, false);
    Tensor mask = Tensor::full({2, 3}, kMaskOff);
    mask.at(0, 1) = 0.0;
    mask.at(1, 2) = 0.0;
    Tensor out = attention(q, k, v, mask, 1);
    for (int j = 0; j < 4; ++j) {
        CHECK(out.at(0, j) == doctest::Approx(v.at(1, j)).epsilon(1e-14));
        CHECK(out.at(1, j) == doctest::Approx(v.at(2, j)).epsilon(1e-14));
    }
}

TEST_CASE("attention matches a hand-computed two-token oracle") {
    // single head, dim 2: scores_ij = q_i . k_j / sqrt(2)
    Tensor q = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor k = Tensor::from({2, 2}, {2.0, 0.0, 0.0, 2.0});
    Tensor v = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor out = attention(q, k, v, full_mask(2, 2), 1);
    const double s = 2.0 / std::sqrt(2.0);
    const double w_same = std::exp(s) / (std::exp(s) + 1.0);
    const double w_other = 1.0 - w_same;
    CHECK(std::abs(out.at(0, 0) - (w_same * 1.0 + w_other * 3.0)) < 1e-10);
    CHECK(std::abs(out.at(0, 1) - (w_same * 2.0 + w_other * 4.0)) < 1e-10);
    CHECK(std::abs(out.at(1, 0) - (w_other * 1.0 + w_same * 3.0)) < 1e-10);
    CHECK(std::abs(out.at(1, 1) - (w_other * 2.0 + w_same * 4.0)) < 1e-10);
}

TEST_CASE("attention rejects a dim not divisible by heads") {
    Tensor q = Tensor::zeros({1, 6});
    CHECK_THROWS_AS(attention(q, q, q, full_mask(1, 1), 4), std::invalid_argument);
    Rng rng(3);
    CHECK_THROWS_AS(MultiHeadAttention::init(6, 4, rng), std::invalid_argument);
}

TEST_CASE("attention output token count equals query token count") {
    Rng rng(4);
    MultiHeadAttention mha = MultiHeadAttention::init(8, 2, rng);
    Tensor q = gradcheck::random_tensor({5, 8}, rng, -1, 1, false);
    Tensor kv = gradcheck::random_tensor({11, 8}, rng, -1, 1, false);
    Tensor out = mha.forward(q, kv, full_mask(5, 11));
    CHECK(out.rows() == 5);
    CHECK(out.cols() == 8);
}

TEST_CASE("perceiver always yields num_latents tokens") {
    Rng rng(5);
    PerceiverConfig cfg;
    cfg.num_latents = 16;
    cfg.dim = 8;
    cfg.heads = 2;
    PerceiverResampler p = PerceiverResampler::init(cfg, rng);
    Tensor queries = gradcheck::random_tensor({16, 8}, rng, -1, 1, false);
    for (int m : {1, 3, 16, 100, 500, 512}) {
        Tensor inputs = gradcheck::random_tensor({m, 8}, rng, -1, 1, false);
        Tensor out = p.forward(inputs, queries);
        CHECK(out.rows() == 16);
        CHECK(out.cols() == 8);
    }
}

TEST_CASE("perceiver rejects an empty modality") {
    Rng rng(6);
    PerceiverConfig cfg;
    cfg.num_latents = 4;
    cfg.dim = 8;
    cfg.heads = 2;
    PerceiverResampler p = PerceiverResampler::init(cfg, rng);
    Tensor queries = Tensor::zeros({4, 8});
    CHECK_THROWS_AS(p.forward(Tensor(), queries), std::invalid_argument);
}

TEST_CASE("perceiver gradient w.r.t. learnable queries matches finite differences") {
    Rng rng(7);
    PerceiverConfig cfg;
    cfg.num_latents = 3;
    cfg.dim = 4;
    cfg.heads = 2;
    PerceiverResampler p = PerceiverResampler::init(cfg, rng);
    Tensor inputs = gradcheck::random_tensor({6, 4}, rng, -1, 1, false);
    std::vector<Tensor> leaves = {gradcheck::random_tensor({3, 4}, rng, -1, 1, true)};
    auto fn = [&]() {
        Tensor out = p.forward(inputs, leaves[0]);
        return mean(mul(out, out));
    };
    auto res = gradcheck::check(leaves, fn);
    CAPTURE(res.where);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("lora with zero-initialized B equals the frozen base exactly") {
    Rng rng(8);
    LoraLinear lora = LoraLinear::wrap(Linear::init(6, 5, rng));
    Tensor x = gradcheck::random_tensor({3, 6}, rng, -1, 1, false);
    NoGradGuard ng;
    Tensor base_out = lora.base.forward(x);
    lora.enable(2, 4.0, rng);
    Tensor out = lora.forward(x);
    for (size_t i = 0; i < out.numel(); ++i) CHECK(out.vec()[i] == base_out.vec()[i]);
}

TEST_CASE("full-rank lora with identity A recovers base plus delta") {
    Rng rng(9);
    const int d = 4;
    LoraLinear lora = LoraLinear::wrap(Linear::init(d, d, rng, /*bias=*/false));
    lora.enable(d, static_cast<double>(d), rng);  // alpha = rank -> unit scaling
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) lora.a.at(i, j) = i == j ? 1.0 : 0.0;
    Tensor delta = gradcheck::random_tensor({d, d}, rng, -1, 1, false);
    lora.b = delta.clone();
    lora.b.set_requires_grad(false);
    Tensor x = gradcheck::random_tensor({2, d}, rng, -1, 1, false);
    NoGradGuard ng;
    Tensor got = lora.forward(x);
    Tensor manual = add(matmul(x, transpose(lora.base.w)), matmul(x, transpose(delta)));
    for (size_t i = 0; i < got.numel(); ++i)
        CHECK(got.vec()[i] == doctest::Approx(manual.vec()[i]).epsilon(1e-12));

    Tensor merged = lora.merged_weight();
    Tensor expect = add(lora.base.w, delta);
    for (size_t i = 0; i < merged.numel(); ++i)
        CHECK(merged.vec()[i] == doctest::Approx(expect.vec()[i]).epsilon(1e-12));
}

TEST_CASE("lora gradients flow to the adapter only") {
    Rng rng(10);
    LoraLinear lora = LoraLinear::wrap(Linear::init(4, 4, rng));
    lora.enable(2, 4.0, rng);
    ParamRegistry reg;
    lora.params(reg, "wq", /*base_trainable=*/false, /*adapter_trainable=*/true);
    auto& tape = active_tape();
    tape.clear();
    Tensor x = gradcheck::random_tensor({2, 4}, rng, -1, 1, false);
    Tensor loss = mean(mul(lora.forward(x), lora.forward(x)));
    backward(tape, loss);
    tape.clear();
    CHECK_FALSE(lora.base.w.has_grad());
    CHECK_FALSE(lora.base.b.has_grad());
    REQUIRE(lora.a.has_grad());
    REQUIRE(lora.b.has_grad());
    double asum = 0.0, bsum = 0.0;
    for (double g : lora.a.grad()) asum += std::abs(g);
    for (double g : lora.b.grad()) bsum += std::abs(g);
    CHECK(bsum > 0.0);  // B sees gradient immediately
    CHECK(asum == 0.0); // B is zero, so A's gradient is exactly zero at init
}

TEST_CASE("causal prefix mask blocks future report positions only") {
    Tensor m = causal_prefix_mask(2, 5);
    // prefix rows see the prefix, not the report
    CHECK(m.at(0, 1) == 0.0);
    CHECK(m.at(0, 3) == kMaskOff);
    // report rows see prefix and earlier report positions
    CHECK(m.at(3, 0) == 0.0);
    CHECK(m.at(3, 3) == 0.0);
    CHECK(m.at(3, 4) == kMaskOff);
    CHECK_NOTHROW(validate_decoder_mask(m, 2));
    Tensor bad = m.clone();
    bad.at(3, 4) = 0.0;
    CHECK_THROWS_AS(validate_decoder_mask(bad, 2), std::invalid_argument);
}

TEST_CASE("transformer layer gradients match finite differences end to end") {
    Rng rng(11);
    TransformerLayer layer = TransformerLayer::init(4, 2, rng);
    ParamRegistry reg;
    layer.params(reg, "layer", true);
    std::vector<Tensor> leaves = {gradcheck::random_tensor({3, 4}, rng, -1, 1, true)};
    Tensor mask = causal_prefix_mask(1, 3);
    auto fn = [&]() {
        Tensor out = layer.forward(leaves[0], mask);
        return mean(mul(out, out));
    };
    auto res = gradcheck::check(leaves, fn);
    CAPTURE(res.where);
    CHECK(res.max_rel_err < 1e-4);
}
