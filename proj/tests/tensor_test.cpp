#include <catch2/catch_amalgamated.hpp>

#include "id3/model.hpp"
#include "id3/rng.hpp"
#include "id3/tensor.hpp"

using namespace id3;

TEST_CASE("matmul identity and inner product") {
    Tape tape;
    auto a = tape.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    auto eye = tape.leaf(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    auto c = tape.matmul(a, eye);
    CHECK(tape.value(c).data() == std::vector<double>{1, 2, 3, 4});

    auto col = tape.leaf(Tensor::matrix(2, 1, {5, 7}));
    auto d = tape.matmul(eye, col);
    CHECK(tape.value(d).data() == std::vector<double>{5, 7});

    auto row = tape.leaf(Tensor::matrix(1, 2, {1, 2}));
    auto col2 = tape.leaf(Tensor::matrix(2, 1, {3, 4}));
    auto e = tape.matmul(row, col2);
    CHECK(tape.value(e)[0] == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tape tape;
    auto a = tape.leaf(Tensor::matrix(2, 3, std::vector<double>(6, 0.0)));
    auto b = tape.leaf(Tensor::matrix(2, 2, std::vector<double>(4, 0.0)));
    CHECK_THROWS_AS(tape.matmul(a, b), DimensionError);
    CHECK_THROWS_WITH(tape.matmul(a, b), Catch::Matchers::ContainsSubstring("[2x3]") &&
                                             Catch::Matchers::ContainsSubstring("[2x2]"));
}

TEST_CASE("elementwise ops") {
    Tape tape;
    auto x = tape.leaf(Tensor::vec({-1, 0, 2}));
    CHECK(tape.value(tape.relu(x)).data() == std::vector<double>{0, 0, 2});

    auto a = tape.leaf(Tensor::vec({1, 2}));
    auto b = tape.leaf(Tensor::vec({3, 4}));
    CHECK(tape.value(tape.add(a, b)).data() == std::vector<double>{4, 6});

    auto z = tape.leaf(Tensor::vec({0}));
    CHECK(tape.value(tape.tanh(z))[0] == 0.0);

    auto m = tape.leaf(Tensor::matrix(1, 3, {0, 0, 0}));
    CHECK_THROWS_AS(tape.add(m, a), DimensionError);
}

TEST_CASE("bias-add broadcast") {
    Tape tape;
    auto m = tape.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    auto b = tape.leaf(Tensor::vec({10, 20}));
    auto s = tape.add(m, b);
    CHECK(tape.value(s).data() == std::vector<double>{11, 22, 13, 24});
    tape.backward(tape.softmax_cross_entropy(s, {0, 1}));
    // bias grad sums over the batch rows
    const Tensor& gm = tape.grad(m);
    const Tensor& gb = tape.grad(b);
    CHECK(gb[0] == Catch::Approx(gm.at(0, 0) + gm.at(1, 0)));
    CHECK(gb[1] == Catch::Approx(gm.at(0, 1) + gm.at(1, 1)));
}

TEST_CASE("softmax cross entropy values") {
    Tape tape;
    auto uniform = tape.leaf(Tensor::matrix(1, 2, {0, 0}));
    CHECK(tape.value(tape.softmax_cross_entropy(uniform, {0}))[0] ==
          Catch::Approx(std::log(2.0)).epsilon(1e-12));

    auto saturated = tape.leaf(Tensor::matrix(1, 2, {100, 0}));
    CHECK(tape.value(tape.softmax_cross_entropy(saturated, {0}))[0] < 1e-10);

    auto three = tape.leaf(Tensor::matrix(1, 3, {1, 1, 1}));
    CHECK(tape.value(tape.softmax_cross_entropy(three, {2}))[0] ==
          Catch::Approx(std::log(3.0)).epsilon(1e-12));

    CHECK_THROWS_AS(tape.softmax_cross_entropy(three, {3}), InputError);
}

TEST_CASE("backward basics") {
    SECTION("sum of squares via matmul") {
        Tape tape;
        auto x = tape.leaf(Tensor::matrix(1, 2, {1, 2}));
        auto xt = tape.leaf(Tensor::matrix(2, 1, {1, 2}));
        auto loss = tape.matmul(x, xt);
        tape.backward(loss);
        CHECK(tape.grad(x).data() == std::vector<double>{1, 2});
        CHECK(tape.grad(xt).data() == std::vector<double>{1, 2});
    }
    SECTION("x*y product") {
        Tape tape;
        auto x = tape.leaf(Tensor::matrix(1, 1, {3}));
        auto y = tape.leaf(Tensor::matrix(1, 1, {5}));
        auto loss = tape.matmul(x, y);
        tape.backward(loss);
        CHECK(tape.grad(x)[0] == 5.0);
        CHECK(tape.grad(y)[0] == 3.0);
    }
    SECTION("constant loss gives zero grads") {
        Tape tape;
        auto x = tape.leaf(Tensor::vec({1, 2}));
        auto c = tape.leaf(Tensor({1}, {7.0}));
        tape.backward(c);
        CHECK(tape.grad(x).data() == std::vector<double>{0, 0});
    }
    SECTION("backward on non-scalar is a usage error") {
        Tape tape;
        auto x = tape.leaf(Tensor::vec({1, 2}));
        CHECK_THROWS_AS(tape.backward(x), UsageError);
    }
}

TEST_CASE("finite difference on scalar functions") {
    Tensor x = Tensor::vec({1.0});
    auto square = [&] { return x[0] * x[0]; };
    CHECK(finite_diff_grad(x, square)[0] == Catch::Approx(2.0).margin(1e-8));

    auto constant = [] { return 3.0; };
    CHECK(finite_diff_grad(x, constant)[0] == Catch::Approx(0.0).margin(1e-10));
}

namespace {

double mlp_loss(Model& model, const Tensor& batch, const std::vector<std::size_t>& labels) {
    auto fp = model.forward(batch);
    return fp.tape.value(fp.tape.softmax_cross_entropy(fp.logits, labels))[0];
}

}  // namespace

TEST_CASE("autodiff matches central differences on random MLPs") {
    Rng rng(2024);
    for (int trial = 0; trial < 5; ++trial) {
        ModelConfig mc;
        mc.widths = {3, 8, 3};
        mc.activation = Activation::tanh;
        mc.init_seed = 100 + static_cast<std::uint64_t>(trial);
        Model model = Model::build_mlp(mc);
        Tensor batch({4, 3});
        for (auto& v : batch.data()) v = rng.uniform(-1.0, 1.0);
        std::vector<std::size_t> labels = {0, 1, 2, 1};

        auto fp = model.forward(batch);
        fp.tape.backward(fp.tape.softmax_cross_entropy(fp.logits, labels));

        for (std::size_t t = 0; t < model.tensor_count(); ++t) {
            Tensor& param = model.registry_mut()[t].value;
            Tensor fd = finite_diff_grad(
                param, [&] { return mlp_loss(model, batch, labels); }, 1e-5);
            const Tensor& ad = fp.tape.grad(fp.param_nodes[t]);
            for (std::size_t i = 0; i < fd.size(); ++i) {
                const double rel = std::abs(ad[i] - fd[i]) / std::max(std::abs(fd[i]), 1.0);
                REQUIRE(rel < 1e-6);
            }
        }
    }
}

TEST_CASE("two backward passes are bitwise identical") {
    ModelConfig mc;
    mc.widths = {2, 4, 2};
    mc.init_seed = 9;
    Model model = Model::build_mlp(mc);
    Tensor batch = Tensor::matrix(2, 2, {0.3, -0.7, 0.1, 0.9});
    std::vector<std::size_t> labels = {0, 1};

    auto fp1 = model.forward(batch);
    fp1.tape.backward(fp1.tape.softmax_cross_entropy(fp1.logits, labels));
    auto fp2 = model.forward(batch);
    fp2.tape.backward(fp2.tape.softmax_cross_entropy(fp2.logits, labels));
    for (std::size_t t = 0; t < model.tensor_count(); ++t) {
        CHECK(fp1.tape.grad(fp1.param_nodes[t]).data() ==
              fp2.tape.grad(fp2.param_nodes[t]).data());
    }
}

TEST_CASE("nodes off the loss path get exactly zero gradient") {
    Tape tape;
    auto x = tape.leaf(Tensor::matrix(1, 1, {3}));
    auto y = tape.leaf(Tensor::matrix(1, 1, {5}));
    auto unused = tape.leaf(Tensor::matrix(1, 1, {11}));
    auto loss = tape.matmul(x, y);
    tape.backward(loss);
    CHECK(tape.grad(unused)[0] == 0.0);
}
