#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "rg4/adamw.hpp"
#include "rg4/autograd.hpp"
#include "rg4/checkpoint.hpp"
#include "rg4/ops.hpp"
#include "rg4/rng.hpp"

using namespace rg4::core;

namespace {

Tensor identity(int n) {
    Tensor t = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

}  // namespace

TEST_CASE("matmul against identity is identity") {
    Rng rng(1);
    Tensor x = gradcheck::random_tensor({2, 3}, rng, -2, 2, false);
    Tensor y = matmul(identity(2), x);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) CHECK(y.at(i, j) == doctest::Approx(x.at(i, j)).epsilon(1e-15));
}

TEST_CASE("matmul shape mismatch names op and shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: shape (2,3) incompatible with (4,5)",
                         std::invalid_argument);
}

TEST_CASE("softmax of equal logits is uniform and rows sum to one") {
    Tensor z = Tensor::from({1, 2}, {0.0, 0.0});
    Tensor s = softmax(z);
    CHECK(s.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

    Rng rng(7);
    Tensor a = gradcheck::random_tensor({5, 9}, rng, -4, 4, false);
    Tensor p = softmax(a);
    for (int i = 0; i < 5; ++i) {
        double rowsum = 0.0;
        for (int j = 0; j < 9; ++j) rowsum += p.at(i, j);
        CHECK(std::abs(rowsum - 1.0) < 1e-12);
    }
}

TEST_CASE("layer norm rows have near-zero mean") {
    Rng rng(11);
    Tensor x = gradcheck::random_tensor({4, 16}, rng, -2, 2, false);
    Tensor g = Tensor::full({16}, 1.0);
    Tensor b = Tensor::zeros({16});
    Tensor y = layer_norm(x, g, b);
    for (int i = 0; i < 4; ++i) {
        double mu = 0.0;
        for (int j = 0; j < 16; ++j) mu += y.at(i, j);
        CHECK(std::abs(mu / 16.0) < 1e-10);
    }
}

TEST_CASE("concat of (2x3) and (2x5) along axis 1 is (2x8)") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 5});
    Tensor c = concat({a, b}, 1);
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 8);
}

TEST_CASE("backward of product recovers partner values") {
    auto& tape = active_tape();
    tape.clear();
    Tensor x = Tensor::from({1, 1}, {2.0}, true);
    Tensor y = Tensor::from({1, 1}, {3.0}, true);
    Tensor loss = sum(mul(x, y));
    backward(tape, loss);
    CHECK(x.grad()[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(y.grad()[0] == doctest::Approx(2.0).epsilon(1e-15));
    tape.clear();
}

TEST_CASE("backward of sum(softmax) is zero") {
    auto& tape = active_tape();
    tape.clear();
    Rng rng(3);
    Tensor z = gradcheck::random_tensor({1, 6}, rng);
    Tensor loss = sum(softmax(z));
    backward(tape, loss);
    for (double g : z.grad()) CHECK(std::abs(g) < 1e-12);
    tape.clear();
}

TEST_CASE("backward rejects non-scalar loss") {
    auto& tape = active_tape();
    tape.clear();
    Tensor x = Tensor::from({1, 2}, {1.0, 2.0}, true);
    Tensor y = scale(x, 2.0);
    CHECK_THROWS_AS(backward(tape, y), std::invalid_argument);
    tape.clear();
}

TEST_CASE("tensors without requires_grad never accumulate") {
    auto& tape = active_tape();
    tape.clear();
    Tensor x = Tensor::from({1, 2}, {1.0, 2.0}, true);
    Tensor frozen = Tensor::from({1, 2}, {5.0, 5.0}, false);
    Tensor loss = sum(mul(x, frozen));
    backward(tape, loss);
    CHECK_FALSE(frozen.has_grad());
    CHECK(x.has_grad());
    tape.clear();
}

TEST_CASE("every primitive passes central finite differences") {
    Rng rng(42);
    struct Case {
        OpKind kind;
        std::vector<std::vector<int>> shapes;
        PrimitiveArgs args;
    };
    std::vector<Case> cases = {
        {OpKind::matmul, {{3, 4}, {4, 2}}, {}},
        {OpKind::add, {{3, 4}, {3, 4}}, {}},
        {OpKind::mul, {{3, 4}, {3, 4}}, {}},
        {OpKind::softmax, {{3, 5}}, {}},
        {OpKind::layer_norm, {{3, 8}, {8}, {8}}, {}},
        {OpKind::embedding, {{6, 4}}, {.ids = {1, 0, 5, 2}}},
        {OpKind::concat, {{2, 3}, {2, 5}}, {.axis = 1}},
        {OpKind::concat, {{2, 4}, {3, 4}}, {.axis = 0}},
        {OpKind::slice, {{4, 6}}, {.axis = 1, .start = 2, .len = 3}},
        {OpKind::slice, {{5, 3}}, {.axis = 0, .start = 1, .len = 2}},
        {OpKind::gelu, {{3, 4}}, {}},
        {OpKind::transpose, {{3, 4}}, {}},
    };
    for (const auto& c : cases) {
        CAPTURE(op_kind_name(c.kind));
        std::vector<Tensor> leaves;
        for (const auto& s : c.shapes) leaves.push_back(gradcheck::random_tensor(s, rng));
        // reduce through mean of a squared-ish mix to avoid constant gradients
        auto fn = [&]() {
            Tensor out = forward_primitive(c.kind, leaves, c.args);
            return mean(mul(out, out));
        };
        auto res = gradcheck::check(leaves, fn);
        CAPTURE(res.where);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("extra reductions and fused cross entropy pass finite differences") {
    Rng rng(43);
    {
        std::vector<Tensor> leaves = {gradcheck::random_tensor({3, 4}, rng),
                                      gradcheck::random_tensor({4}, rng)};
        auto fn = [&]() { return mean(mul(add_rowwise(leaves[0], leaves[1]), leaves[0])); };
        CHECK(gradcheck::check(leaves, fn).max_rel_err < 1e-4);
    }
    {
        std::vector<Tensor> leaves = {gradcheck::random_tensor({4, 5}, rng)};
        auto fn = [&]() { return mean(mul(mean_rows(leaves[0]), mean_rows(leaves[0]))); };
        CHECK(gradcheck::check(leaves, fn).max_rel_err < 1e-4);
    }
    {
        std::vector<Tensor> leaves = {gradcheck::random_tensor({4, 6}, rng)};
        std::vector<int> targets = {1, 0, 5, 3};
        std::vector<double> weights = {1.0, 1.75, 1.0, 0.5};
        auto fn = [&]() { return cross_entropy_rows(leaves[0], targets, weights); };
        CHECK(gradcheck::check(leaves, fn).max_rel_err < 1e-4);
    }
    {
        std::vector<Tensor> leaves = {gradcheck::random_tensor({3, 3}, rng)};
        auto fn = [&]() { return scale(sum(leaves[0]), 0.5); };
        CHECK(gradcheck::check(leaves, fn).max_rel_err < 1e-4);
    }
}

TEST_CASE("random 3-layer MLP matches finite differences") {
    Rng rng(1234);
    std::vector<Tensor> leaves = {
        gradcheck::random_tensor({2, 6}, rng),   // input
        gradcheck::random_tensor({6, 8}, rng),   // w1
        gradcheck::random_tensor({8}, rng),      // b1
        gradcheck::random_tensor({8, 8}, rng),   // w2
        gradcheck::random_tensor({8}, rng),      // b2
        gradcheck::random_tensor({8, 3}, rng),   // w3
    };
    auto fn = [&]() {
        Tensor h1 = gelu(add_rowwise(matmul(leaves[0], leaves[1]), leaves[2]));
        Tensor h2 = gelu(add_rowwise(matmul(h1, leaves[3]), leaves[4]));
        Tensor out = softmax(matmul(h2, leaves[5]));
        return mean(mul(out, out));
    };
    auto res = gradcheck::check(leaves, fn);
    CAPTURE(res.where);
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("adamw: zero gradient and zero decay leave params unchanged") {
    Tensor w = Tensor::from({2}, {1.5, -0.5}, true);
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    cfg.total_steps = 0;
    AdamW opt({{"w", &w, true}}, cfg);
    w.zero_grad();
    opt.step();
    CHECK(w.vec()[0] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(w.vec()[1] == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adamw: one step on f(w)=w^2 decreases f") {
    auto& tape = active_tape();
    tape.clear();
    Tensor w = Tensor::from({1, 1}, {1.0}, true);
    AdamWConfig cfg;
    AdamW opt({{"w", &w, true}}, cfg);
    Tensor loss = sum(mul(w, w));
    backward(tape, loss);
    opt.step();
    tape.clear();
    CHECK(w.vec()[0] * w.vec()[0] < 1.0);
}

TEST_CASE("adamw: three steps on a quadratic match a scalar oracle") {
    auto& tape = active_tape();
    AdamWConfig cfg;
    cfg.lr = 3e-4;
    cfg.weight_decay = 0.01;
    cfg.total_steps = 0;
    Tensor w = Tensor::from({1, 1}, {0.7}, true);
    AdamW opt({{"w", &w, true}}, cfg);

    // independent scalar AdamW
    double ow = 0.7, om = 0.0, ov = 0.0;
    for (int t = 1; t <= 3; ++t) {
        tape.clear();
        w.zero_grad();
        Tensor loss = sum(mul(w, w));
        backward(tape, loss);
        opt.step();

        const double g = 2.0 * ow;
        om = cfg.beta1 * om + (1 - cfg.beta1) * g;
        ov = cfg.beta2 * ov + (1 - cfg.beta2) * g * g;
        const double mhat = om / (1 - std::pow(cfg.beta1, t));
        const double vhat = ov / (1 - std::pow(cfg.beta2, t));
        ow -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * ow);
        CHECK(std::abs(w.vec()[0] - ow) < 1e-12);
    }
    tape.clear();
}

TEST_CASE("adamw: non-finite gradient names the parameter") {
    Tensor w = Tensor::from({1}, {1.0}, true);
    AdamW opt({{"blocks.0.w", &w, true}}, {});
    w.grad()[0] = std::nan("");
    CHECK_THROWS_WITH_AS(opt.step(), "adamw: non-finite gradient in parameter 'blocks.0.w'",
                         std::runtime_error);
}

TEST_CASE("adamw: warmup ramps linearly then holds") {
    Tensor w = Tensor::from({1}, {1.0}, true);
    AdamWConfig cfg;
    cfg.lr = 1e-3;
    cfg.total_steps = 100;
    cfg.warmup_frac = 0.1;
    AdamW opt({{"w", &w, true}}, cfg);
    double prev = 0.0;
    for (long t = 1; t <= 10; ++t) {
        const double lr = opt.lr_at(t);
        CHECK(lr >= prev);
        prev = lr;
    }
    CHECK(opt.lr_at(10) == doctest::Approx(1e-3));
    CHECK(opt.lr_at(55) == doctest::Approx(1e-3));
    CHECK(opt.lr_at(1) == doctest::Approx(1e-4));
}

TEST_CASE("replay determinism: identical seeds give bit-identical loss") {
    auto run = [](uint64_t seed) {
        auto& tape = active_tape();
        Rng rng(seed);
        Tensor w = gradcheck::random_tensor({4, 4}, rng);
        Tensor x = gradcheck::random_tensor({2, 4}, rng, -1, 1, false);
        AdamWConfig cfg;
        AdamW opt({{"w", &w, true}}, cfg);
        double last = 0.0;
        for (int step = 0; step < 5; ++step) {
            tape.clear();
            w.zero_grad();
            Tensor y = matmul(x, w);
            Tensor loss = mean(mul(y, y));
            backward(tape, loss);
            opt.step();
            last = loss.item();
        }
        tape.clear();
        return last;
    };
    const double a = run(99);
    const double b = run(99);
    CHECK(a == b);  // bitwise
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    Rng rng(5);
    Tensor a = gradcheck::random_tensor({3, 7}, rng, -10, 10, false);
    Tensor b = gradcheck::random_tensor({13}, rng, -1, 1, false);
    // exercise non-trivial doubles
    a.vec()[0] = 0.1 + 0.2;
    b.vec()[1] = 1e-308;
    const std::string path = (std::filesystem::temp_directory_path() / "rg4_ckpt_test.bin").string();
    std::vector<NamedParam> params = {{"enc.w", &a, true}, {"enc.b", &b, true}};
    save_checkpoint(path, params);
    auto loaded = load_checkpoint(path);
    REQUIRE(loaded.count("enc.w") == 1);
    REQUIRE(loaded.count("enc.b") == 1);
    CHECK(loaded["enc.w"].shape() == a.shape());
    for (size_t i = 0; i < a.numel(); ++i) CHECK(loaded["enc.w"].vec()[i] == a.vec()[i]);
    for (size_t i = 0; i < b.numel(); ++i) CHECK(loaded["enc.b"].vec()[i] == b.vec()[i]);

    // second write of the loaded data is byte-identical
    const std::string path2 = path + ".2";
    std::vector<NamedParam> params2 = {{"enc.w", &loaded["enc.w"], true}, {"enc.b", &loaded["enc.b"], true}};
    save_checkpoint(path2, params2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("load_into rejects shape mismatch and missing names") {
    Rng rng(6);
    Tensor a = gradcheck::random_tensor({2, 2}, rng, -1, 1, false);
    const std::string path = (std::filesystem::temp_directory_path() / "rg4_ckpt_test3.bin").string();
    std::vector<NamedParam> params = {{"w", &a, true}};
    save_checkpoint(path, params);

    Tensor wrong = Tensor::zeros({3, 2});
    std::vector<NamedParam> bad = {{"w", &wrong, true}};
    CHECK_THROWS_AS(load_into(path, bad), std::runtime_error);

    Tensor other = Tensor::zeros({2, 2});
    std::vector<NamedParam> missing = {{"nope", &other, true}};
    CHECK_THROWS_AS(load_into(path, missing), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("rng forks are independent of parent consumption") {
    Rng a(123);
    Rng b(123);
    (void)a.uniform();
    (void)a.uniform();
    Rng fa = a.fork("child");
    Rng fb = b.fork("child");
    CHECK(fa.next_u64() == fb.next_u64());
}
