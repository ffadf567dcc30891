#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "delicate/error.hpp"
#include "delicate/rng.hpp"
#include "delicate/tensor/adam.hpp"
#include "delicate/tensor/grad_check.hpp"
#include "delicate/tensor/tape.hpp"
#include "support/oracles.hpp"

using namespace delicate;
using namespace delicate::tensor;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.gaussian() * scale;
    return t;
}

}  // namespace

TEST_CASE("forward op examples") {
    Tape tape;
    SUBCASE("gelu(0) = 0, and the tanh approximation at 1") {
        Var x = tape.leaf(Tensor({3}, {0.0, 1.0, -1.0}));
        Var y = gelu(x);
        CHECK(tape.value(y).data()[0] == 0.0);
        double u = std::sqrt(2.0 / M_PI) * (1.0 + 0.044715);
        CHECK(tape.value(y).data()[1] == doctest::Approx(0.5 * (1.0 + std::tanh(u))).epsilon(1e-12));
    }
    SUBCASE("softmax of a constant row is uniform; rows sum to 1") {
        Var x = tape.leaf(Tensor({1, 3}, {0.0, 0.0, 0.0}));
        Var y = softmax(x, -1);
        for (int j = 0; j < 3; ++j)
            CHECK(tape.value(y).data()[j] == doctest::Approx(1.0 / 3).epsilon(1e-12));
        Rng rng(1, 0);
        Var r = tape.leaf(random_tensor({4, 7}, rng, 3.0));
        Var sr = softmax(r, -1);
        for (int i = 0; i < 4; ++i) {
            double row = 0.0;
            for (int j = 0; j < 7; ++j) row += tape.value(sr).data()[i * 7 + j];
            CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    SUBCASE("layernorm output rows have mean 0 and variance 1") {
        Rng rng(2, 0);
        Var x = tape.leaf(random_tensor({5, 8}, rng, 2.0));
        Var gamma = tape.leaf(Tensor::full({8}, 1.0));
        Var beta = tape.leaf(Tensor({8}));
        Var y = layer_norm(x, gamma, beta);
        for (int r = 0; r < 5; ++r) {
            double mean = 0.0, var = 0.0;
            for (int j = 0; j < 8; ++j) mean += tape.value(y).data()[r * 8 + j];
            mean /= 8;
            for (int j = 0; j < 8; ++j) {
                double d = tape.value(y).data()[r * 8 + j] - mean;
                var += d * d;
            }
            var /= 8;
            CHECK(std::fabs(mean) < 1e-9);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    SUBCASE("dropout is identity when the tape is in eval mode") {
        Var x = tape.leaf(Tensor({4}, {1.0, 2.0, 3.0, 4.0}));
        Var y = dropout(x, 0.5);
        CHECK(y.id == x.id);
    }
    SUBCASE("dropout in training mode zeroes and rescales") {
        Rng drop_rng(3, Rng::kDropout);
        Tape train_tape(Precision::f64, true, &drop_rng);
        Var x = train_tape.leaf(Tensor::full({10000}, 1.0));
        Var y = dropout(x, 0.25);
        std::int64_t zeros = 0;
        for (std::int64_t i = 0; i < 10000; ++i) {
            double v = train_tape.value(y).data()[i];
            if (v == 0.0) ++zeros;
            else CHECK(v == doctest::Approx(1.0 / 0.75).epsilon(1e-12));
        }
        CHECK(zeros > 2200);
        CHECK(zeros < 2800);
    }
    SUBCASE("shape mismatches name both shapes") {
        Var a = tape.leaf(Tensor({2, 3}));
        Var b = tape.leaf(Tensor({3, 3}));
        CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2, 3]"), Error);
        CHECK_THROWS_WITH_AS(matmul(a, tape.leaf(Tensor({2, 3}))), doctest::Contains("[2, 3]"),
                             Error);
    }
}

TEST_CASE("loss op examples") {
    Tape tape;
    SUBCASE("uniform logits give cross-entropy ln(V)") {
        for (int v : {2, 7, 42}) {
            Var logits = tape.leaf(Tensor({3, v}));
            Var loss = masked_cross_entropy(logits, {0, v - 1, -1});
            CHECK(tape.value(loss).item() == doctest::Approx(std::log(v)).epsilon(1e-12));
        }
    }
    SUBCASE("confident correct logits give a vanishing loss") {
        Var logits = tape.leaf(Tensor({1, 2}, {10.0, -10.0}));
        Var loss = masked_cross_entropy(logits, {0});
        CHECK(tape.value(loss).item() == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
        CHECK(tape.value(loss).item() == doctest::Approx(2.061e-9).epsilon(1e-3));
    }
    SUBCASE("mse of identical tensors is zero") {
        Rng rng(4, 0);
        Tensor x = random_tensor({5, 3}, rng);
        CHECK(tape.value(mse(tape.leaf(x), tape.leaf(x))).item() == 0.0);
    }
    SUBCASE("cross-entropy requires a labeled position") {
        Var logits = tape.leaf(Tensor({2, 4}));
        CHECK_THROWS_AS(masked_cross_entropy(logits, {-1, -1}), Error);
    }
    SUBCASE("perturbing unlabeled logits leaves the loss unchanged") {
        Rng rng(5, 0);
        Tensor base = random_tensor({4, 6}, rng);
        std::vector<int> targets = {2, -1, 4, -1};
        Var l1 = masked_cross_entropy(tape.leaf(base), targets);
        Tensor perturbed = base;
        for (int j = 0; j < 6; ++j) {
            perturbed.data()[1 * 6 + j] += 17.0;
            perturbed.data()[3 * 6 + j] -= 4.0;
        }
        Var l2 = masked_cross_entropy(tape.leaf(perturbed), targets);
        CHECK(tape.value(l1).item() == tape.value(l2).item());
    }
}

TEST_CASE("backward basics") {
    SUBCASE("d/dx sum(x*x) = 2x") {
        ParamMap params;
        params.emplace("x", Param(Tensor({1}, {3.0})));
        Tape tape;
        Var x = tape.param(params.at("x"));
        Var loss = sum_all(mul(x, x));
        tape.backward(loss);
        CHECK(params.at("x").grad.data()[0] == doctest::Approx(6.0).epsilon(1e-15));
    }
    SUBCASE("a parameter used at two tape sites accumulates both gradients") {
        ParamMap params;
        params.emplace("w", Param(Tensor({1}, {5.0})));
        Tape tape;
        Var w1 = tape.param(params.at("w"));
        Var w2 = tape.param(params.at("w"));
        CHECK(w1.id == w2.id);  // same node: shared storage
        Var loss = sum_all(add(w1, w2));
        tape.backward(loss);
        CHECK(params.at("w").grad.data()[0] == 2.0);
    }
    SUBCASE("backward twice doubles parameter gradients exactly") {
        Rng rng(6, 0);
        ParamMap params;
        params.emplace("a", Param(random_tensor({3, 4}, rng)));
        params.emplace("b", Param(random_tensor({4, 2}, rng)));
        Tape tape;
        Var loss = mse(matmul(tape.param(params.at("a")), tape.param(params.at("b"))),
                       tape.leaf(Tensor({3, 2})));
        tape.backward(loss);
        Tensor once_a = params.at("a").grad;
        tape.backward(loss);
        for (std::int64_t i = 0; i < once_a.numel(); ++i)
            CHECK(params.at("a").grad.data()[i] == 2.0 * once_a.data()[i]);
    }
    SUBCASE("backward rejects non-scalar losses") {
        Tape tape;
        Var x = tape.leaf(Tensor({2, 2}));
        CHECK_THROWS_AS(tape.backward(x), Error);
    }
}

TEST_CASE("gradient checks for every primitive") {
    Rng rng(7, 0);
    auto check = [&](const char* name, const LossFn& f, ParamMap params, double tol = 1e-6) {
        double err = grad_check(f, std::move(params));
        CHECK_MESSAGE(err < tol, name, " worst relative error ", err);
    };

    {
        ParamMap p;
        p.emplace("a", Param(random_tensor({3, 4}, rng)));
        p.emplace("b", Param(random_tensor({4, 5}, rng)));
        check("matmul", [](Tape& t, ParamMap& p) {
            return mse(matmul(t.param(p.at("a")), t.param(p.at("b"))), t.leaf(Tensor({3, 5})));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("a", Param(random_tensor({2, 2, 3, 4}, rng)));
        p.emplace("b", Param(random_tensor({2, 2, 4, 3}, rng)));
        check("batched matmul", [](Tape& t, ParamMap& p) {
            return mse(matmul(t.param(p.at("a")), t.param(p.at("b"))),
                       t.leaf(Tensor({2, 2, 3, 3})));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("a", Param(random_tensor({4, 6}, rng)));
        p.emplace("bias", Param(random_tensor({6}, rng)));
        check("add_bias+gelu", [](Tape& t, ParamMap& p) {
            return mse(gelu(add_bias(t.param(p.at("a")), t.param(p.at("bias")))),
                       t.leaf(Tensor({4, 6})));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("a", Param(random_tensor({5, 3}, rng)));
        p.emplace("b", Param(random_tensor({5, 3}, rng)));
        check("mul+scale+add", [](Tape& t, ParamMap& p) {
            Var a = t.param(p.at("a"));
            Var b = t.param(p.at("b"));
            return mse(add(scale(mul(a, b), 1.7), a), t.leaf(Tensor({5, 3})));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("a", Param(random_tensor({2, 3, 4}, rng)));
        check("transpose+permute+reshape", [](Tape& t, ParamMap& p) {
            Var x = transpose_last2(t.param(p.at("a")));       // [2,4,3]
            x = permute(x, {1, 0, 2});                         // [4,2,3]
            x = reshape(x, {4, 6});
            return mse(x, t.leaf(Tensor({4, 6})));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("a", Param(random_tensor({2, 5}, rng)));
        p.emplace("b", Param(random_tensor({3, 5}, rng)));
        check("concat+slice", [](Tape& t, ParamMap& p) {
            Var c = concat({t.param(p.at("a")), t.param(p.at("b"))}, 0);   // [5,5]
            return mse(slice(c, 0, 1, 3), t.leaf(Tensor({3, 5})));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("table", Param(random_tensor({7, 4}, rng)));
        check("embedding+gather", [](Tape& t, ParamMap& p) {
            Var e = embedding(t.param(p.at("table")), {1, 5, 1, 6, 0, 2}, {6});  // [6,4]
            return mse(gather_rows(e, {0, 2, 5}), t.leaf(Tensor({3, 4})));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("x", Param(random_tensor({4, 6}, rng, 2.0)));
        p.emplace("gamma", Param(random_tensor({6}, rng, 0.3)));
        p.emplace("beta", Param(random_tensor({6}, rng, 0.3)));
        check("layer_norm", [](Tape& t, ParamMap& p) {
            return mse(layer_norm(t.param(p.at("x")), t.param(p.at("gamma")), t.param(p.at("beta"))),
                       t.leaf(Tensor({4, 6})));
        }, p, 1e-5);
    }
    {
        ParamMap p;
        p.emplace("x", Param(random_tensor({3, 5}, rng)));
        check("gelu sum", [](Tape& t, ParamMap& p) {
            return sum_all(gelu(t.param(p.at("x"))));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("x", Param(random_tensor({3, 5}, rng)));
        check("tanh", [](Tape& t, ParamMap& p) {
            return mse(tanh_act(t.param(p.at("x"))), t.leaf(Tensor({3, 5})));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("x", Param(random_tensor({2, 3, 4}, rng, 2.0)));
        check("softmax axis 1", [](Tape& t, ParamMap& p) {
            return mse(softmax(t.param(p.at("x")), 1), t.leaf(Tensor({2, 3, 4})));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("logits", Param(random_tensor({6, 9}, rng, 2.0)));
        std::vector<int> targets = {1, -1, 4, 8, -1, 0};
        check("softmax + cross-entropy", [targets](Tape& t, ParamMap& p) {
            return masked_cross_entropy(t.param(p.at("logits")), targets);
        }, p);
    }
    {
        ParamMap p;
        p.emplace("scores", Param(random_tensor({2, 2, 3, 3}, rng)));
        std::vector<std::uint8_t> key_real = {1, 1, 0, 1, 1, 1};
        check("attention mask + softmax", [key_real](Tape& t, ParamMap& p) {
            Var masked = mask_attention_scores(t.param(p.at("scores")), key_real);
            return mse(softmax(masked, -1), t.leaf(Tensor({2, 2, 3, 3})));
        }, p);
    }
    {
        ParamMap p;
        p.emplace("logits", Param(random_tensor({5}, rng, 2.0)));
        std::vector<double> targets = {1.0, 0.0, 1.0, 1.0, 0.0};
        check("bce_with_logits", [targets](Tape& t, ParamMap& p) {
            return bce_with_logits(t.param(p.at("logits")), targets);
        }, p);
    }
}

TEST_CASE("grad_check of the identity is exact up to rounding") {
    ParamMap p;
    p.emplace("x", Param(Tensor({4}, {1.0, -2.0, 0.5, 3.0})));
    double err = grad_check([](Tape& t, ParamMap& p) { return sum_all(t.param(p.at("x"))); }, p);
    CHECK(err < 1e-10);
}

TEST_CASE("adam") {
    SUBCASE("first step moves by about -lr * sign(g)") {
        ParamMap params;
        params.emplace("w", Param(Tensor({3}, {1.0, 2.0, 3.0})));
        params.at("w").grad = Tensor({3}, {0.5, -2.0, 1e-3});
        AdamState adam(AdamConfig{0.01});
        adam.step(params);
        CHECK(params.at("w").value.data()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
        CHECK(params.at("w").value.data()[1] == doctest::Approx(2.0 + 0.01).epsilon(1e-6));
        CHECK(params.at("w").value.data()[2] == doctest::Approx(3.0 - 0.01).epsilon(1e-4));
    }
    SUBCASE("zero gradient leaves parameters unchanged") {
        ParamMap params;
        params.emplace("w", Param(Tensor({2}, {1.5, -0.5})));
        AdamState adam;
        adam.step(params);
        CHECK(params.at("w").value.data()[0] == 1.5);
        CHECK(params.at("w").value.data()[1] == -0.5);
    }
    SUBCASE("two steps with constant gradient match the hand recurrence") {
        ParamMap params;
        params.emplace("w", Param(Tensor({1}, {0.7})));
        AdamConfig cfg{0.05, 0.9, 0.999, 1e-8};
        AdamState adam(cfg);
        params.at("w").grad.data()[0] = 1.3;
        adam.step(params);
        params.at("w").grad.data()[0] = 1.3;
        adam.step(params);
        double expected = oracles::adam_two_steps(0.7, 1.3, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
        CHECK(params.at("w").value.data()[0] == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("f32 mode rounds every op output to float") {
    Tape tape(Precision::f32);
    Var x = tape.leaf(Tensor({1}, {1.0}));
    Var y = scale(x, 1.0 / 3.0);
    double v = tape.value(y).item();
    CHECK(v == static_cast<double>(static_cast<float>(1.0 / 3.0)));
    CHECK(v != 1.0 / 3.0);
}

TEST_CASE("non-finite op results raise a numeric error") {
    Tape tape;
    Var x = tape.leaf(Tensor({1}, {1e308}));
    CHECK_THROWS_AS(scale(x, 1e10), Error);
}
