#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "splatcast/adam.hpp"
#include "splatcast/ops.hpp"
#include "splatcast/tensor.hpp"
#include "support/grad_check.hpp"

using namespace splatcast::diff;
using testsupport::check_gradients;
using testsupport::random_values;

namespace {

// Generic per-op gradient check: scalar objective = sum(out * fixed random
// weights), analytic backward vs central finite differences.
void check_op_gradients(const std::vector<Tensor>& inputs,
                        const std::function<Tensor(Tape&)>& op, unsigned seed = 99,
                        double tol = 1e-4) {
    std::mt19937_64 rng(seed);
    Tensor weights;  // fixed after the first forward
    auto forward = [&]() {
        Tape tape;
        Tensor out = op(tape);
        if (!weights.defined()) {
            weights = Tensor::constant(out.shape(), random_values(out.values().size(), rng));
        }
        Tensor s = sum(tape, mul(tape, out, weights));
        return s.scalar();
    };
    forward();  // fix weights
    {
        Tape tape;
        Tensor out = op(tape);
        Tensor s = sum(tape, mul(tape, out, weights));
        for (const auto& in : inputs) const_cast<Tensor&>(in).zero_grad();
        tape.backward(s);
    }
    std::vector<std::vector<double>> grads;
    for (const auto& in : inputs)
        grads.push_back(in.has_grad() ? in.grad() : std::vector<double>(in.values().size(), 0.0));
    auto r = check_gradients(
        inputs, forward, [&](std::size_t k) -> const std::vector<double>& { return grads[k]; },
        1e-5, tol);
    INFO("worst: " << r.worst << " max_rel_err=" << r.max_rel_err);
    CHECK(r.ok);
}

}  // namespace

TEST_CASE("tensor construction rejects non-positive dims and size mismatch") {
    CHECK_THROWS_AS(Tensor::constant({0}, {}), OpError);
    CHECK_THROWS_AS(Tensor::constant({2, -1}, {1, 2}), OpError);
    CHECK_THROWS_AS(Tensor::constant({2, 2}, {1.0, 2.0, 3.0}), OpError);
}

TEST_CASE("shape errors name the op and both shapes") {
    Tape tape;
    Tensor a = Tensor::constant({2}, {1, 2});
    Tensor b = Tensor::constant({3}, {1, 2, 3});
    try {
        add(tape, a, b);
        FAIL("expected OpError");
    } catch (const OpError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("add") != std::string::npos);
        CHECK(msg.find("[2]") != std::string::npos);
        CHECK(msg.find("[3]") != std::string::npos);
    }
    std::mt19937_64 rng(1);
    Tensor m = Tensor::constant({2, 3}, random_values(6, rng));
    Tensor n = Tensor::constant({2, 3}, random_values(6, rng));
    CHECK_THROWS_AS(matmul(tape, m, n), OpError);
}

TEST_CASE("softmax of zeros is uniform") {
    Tape tape;
    Tensor x = Tensor::constant({3}, {0, 0, 0});
    Tensor y = softmax(tape, x, 0);
    for (double v : y.values()) CHECK(v == 1.0 / 3.0);
    CHECK_THROWS_AS(softmax(tape, x, 1), OpError);
}

TEST_CASE("bilinear resize of a constant grid is exactly constant") {
    Tape tape;
    const double c = 3.7251;
    Tensor x = Tensor::constant({2, 2}, {c, c, c, c});
    Tensor y = bilinear_resize(tape, x, 5, 5);
    CHECK(y.shape() == Shape{5, 5});
    for (double v : y.values()) CHECK(v == c);
}

TEST_CASE("conv2d with identity-center kernel preserves the input") {
    std::mt19937_64 rng(7);
    Tape tape;
    Tensor x = Tensor::constant({1, 4, 5}, random_values(20, rng));
    std::vector<double> k(9, 0.0);
    k[4] = 1.0;  // 3x3 center
    Tensor w = Tensor::constant({1, 1, 3, 3}, k);
    Tensor b = Tensor::constant({1}, {0.0});
    Tensor y = conv2d(tape, x, w, b, 1);
    CHECK(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.values().size(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("matmul hand-computed example") {
    Tape tape;
    Tensor a = Tensor::constant({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::constant({2, 1}, {5, 6});
    Tensor c = matmul(tape, a, b);
    CHECK(c.values() == std::vector<double>{17, 39});
}

TEST_CASE("conv2d stride-2 output dims") {
    Tape tape;
    Tensor x = Tensor::constant({1, 8, 8}, std::vector<double>(64, 1.0));
    Tensor w = Tensor::constant({2, 1, 3, 3}, std::vector<double>(18, 0.1));
    Tensor b = Tensor::constant({2}, {0.0, 0.0});
    Tensor y = conv2d(tape, x, w, b, 2);
    CHECK(y.shape() == Shape{2, 4, 4});
}

TEST_CASE("conv_transpose2d doubles spatial dims; 1x1 kernel zero-stuffs") {
    Tape tape;
    Tensor x = Tensor::constant({1, 2, 2}, {1, 2, 3, 4});
    Tensor w = Tensor::constant({1, 1, 1, 1}, {2.0});
    Tensor b = Tensor::constant({1}, {0.0});
    Tensor y = conv_transpose2d(tape, x, w, b);
    CHECK(y.shape() == Shape{1, 4, 4});
    // even (row,col) positions carry 2*x, everything else stays zero
    CHECK(y.values()[0] == 2.0);
    CHECK(y.values()[2] == 4.0);
    CHECK(y.values()[8] == 6.0);
    CHECK(y.values()[10] == 8.0);
    CHECK(y.values()[1] == 0.0);
    CHECK(y.values()[5] == 0.0);
}

TEST_CASE("maxpool2x2 forward picks block maxima") {
    Tape tape;
    Tensor x = Tensor::constant({1, 2, 4}, {1, 5, 2, 0, 3, -1, 8, 4});
    Tensor y = maxpool2x2(tape, x);
    CHECK(y.shape() == Shape{1, 1, 2});
    CHECK(y.values() == std::vector<double>{5, 8});
}

TEST_CASE("backward: d sum(x*x)/dx = 2x") {
    Tape tape;
    Tensor x = Tensor::param({3}, {1, 2, 3});
    Tensor root = sum(tape, mul(tape, x, x));
    tape.backward(root);
    CHECK(x.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("backward: fan-out accumulates (a + a)") {
    Tape tape;
    Tensor a = Tensor::param({1}, {5.0});
    Tensor root = add(tape, a, a);
    tape.backward(root);
    CHECK(a.grad() == std::vector<double>{2.0});
}

TEST_CASE("backward: shared node equals duplicated-node graph") {
    std::mt19937_64 rng(11);
    auto xv = random_values(6, rng);
    auto c1 = random_values(6, rng);
    auto c2 = random_values(6, rng);
    // shared: x feeds two consumers
    Tensor x = Tensor::param({6}, xv);
    {
        Tape tape;
        Tensor t1 = mul(tape, x, Tensor::constant({6}, c1));
        Tensor t2 = mul(tape, x, Tensor::constant({6}, c2));
        Tensor root = add(tape, sum(tape, t1), sum(tape, t2));
        tape.backward(root);
    }
    // duplicated: two leaves with the same values
    Tensor xa = Tensor::param({6}, xv);
    Tensor xb = Tensor::param({6}, xv);
    {
        Tape tape;
        Tensor t1 = mul(tape, xa, Tensor::constant({6}, c1));
        Tensor t2 = mul(tape, xb, Tensor::constant({6}, c2));
        Tensor root = add(tape, sum(tape, t1), sum(tape, t2));
        tape.backward(root);
    }
    for (int i = 0; i < 6; ++i) CHECK(x.grad()[i] == xa.grad()[i] + xb.grad()[i]);
}

TEST_CASE("backward rejects non-scalar roots and empty tapes") {
    Tensor x = Tensor::param({3}, {1, 2, 3});
    {
        Tape tape;
        Tensor y = mul(tape, x, x);
        CHECK_THROWS_AS(tape.backward(y), OpError);
    }
    {
        Tape tape;
        CHECK_THROWS_AS(tape.backward(x), OpError);
    }
}

// ---------------------------------------------------------------------------
// Finite-difference oracle over the whole op set
// ---------------------------------------------------------------------------

TEST_CASE("gradients: elementwise ops") {
    std::mt19937_64 rng(21);
    Tensor a = Tensor::param({2, 3}, random_values(6, rng));
    Tensor b = Tensor::param({2, 3}, random_values(6, rng));
    Tensor s = Tensor::param({1}, random_values(1, rng));

    check_op_gradients({a, b}, [&](Tape& t) { return add(t, a, b); });
    check_op_gradients({a, b}, [&](Tape& t) { return sub(t, a, b); });
    check_op_gradients({a, b}, [&](Tape& t) { return mul(t, a, b); });
    check_op_gradients({a, s}, [&](Tape& t) { return mul(t, a, s); });
    check_op_gradients({s, a}, [&](Tape& t) { return mul(t, s, a); });
    check_op_gradients({a}, [&](Tape& t) { return scalar_mul(t, a, -1.37); });
    check_op_gradients({a}, [&](Tape& t) { return splatcast::diff::exp(t, a); });
    check_op_gradients({a}, [&](Tape& t) { return square(t, a); });
    check_op_gradients({a}, [&](Tape& t) { return gelu(t, a); });
    check_op_gradients({a}, [&](Tape& t) { return splatcast::diff::abs(t, a); });
}

TEST_CASE("gradients: matmul, transpose, add_bias, slice_row") {
    std::mt19937_64 rng(22);
    Tensor a = Tensor::param({3, 4}, random_values(12, rng));
    Tensor b = Tensor::param({4, 2}, random_values(8, rng));
    Tensor bias = Tensor::param({4}, random_values(4, rng));
    check_op_gradients({a, b}, [&](Tape& t) { return matmul(t, a, b); });
    check_op_gradients({a}, [&](Tape& t) { return transpose(t, a); });
    check_op_gradients({a, bias}, [&](Tape& t) { return add_bias(t, a, bias); });
    check_op_gradients({a}, [&](Tape& t) { return slice_row(t, a, 1); });
}

TEST_CASE("gradients: reductions and softmax along every axis") {
    std::mt19937_64 rng(23);
    Tensor a = Tensor::param({2, 3, 4}, random_values(24, rng));
    check_op_gradients({a}, [&](Tape& t) { return mean(t, a); });
    check_op_gradients({a}, [&](Tape& t) { return sum(t, a); });
    for (int axis = 0; axis < 3; ++axis) {
        check_op_gradients({a}, [&](Tape& t) { return softmax(t, a, axis); });
    }
}

TEST_CASE("gradients: conv2d stride 1 and 2") {
    std::mt19937_64 rng(24);
    Tensor x = Tensor::param({2, 5, 6}, random_values(60, rng));
    Tensor w = Tensor::param({3, 2, 3, 3}, random_values(54, rng));
    Tensor b = Tensor::param({3}, random_values(3, rng));
    check_op_gradients({x, w, b}, [&](Tape& t) { return conv2d(t, x, w, b, 1); });
    Tensor x2 = Tensor::param({2, 6, 8}, random_values(96, rng));
    check_op_gradients({x2, w, b}, [&](Tape& t) { return conv2d(t, x2, w, b, 2); });
}

TEST_CASE("gradients: conv_transpose2d") {
    std::mt19937_64 rng(25);
    Tensor x = Tensor::param({2, 3, 4}, random_values(24, rng));
    Tensor w = Tensor::param({2, 3, 3, 3}, random_values(54, rng));
    Tensor b = Tensor::param({3}, random_values(3, rng));
    check_op_gradients({x, w, b}, [&](Tape& t) { return conv_transpose2d(t, x, w, b); });
}

TEST_CASE("gradients: maxpool2x2") {
    std::mt19937_64 rng(26);
    Tensor x = Tensor::param({2, 4, 6}, random_values(48, rng));
    check_op_gradients({x}, [&](Tape& t) { return maxpool2x2(t, x); });
}

TEST_CASE("gradients: concat0, reshape, flatten") {
    std::mt19937_64 rng(27);
    Tensor a = Tensor::param({2, 3, 2}, random_values(12, rng));
    Tensor b = Tensor::param({1, 3, 2}, random_values(6, rng));
    check_op_gradients({a, b}, [&](Tape& t) { return concat0(t, {a, b}); });
    check_op_gradients({a}, [&](Tape& t) { return reshape(t, a, {4, 3}); });
    check_op_gradients({a}, [&](Tape& t) { return flatten(t, a); });
}

TEST_CASE("gradients: bilinear resize up and down") {
    std::mt19937_64 rng(28);
    Tensor x = Tensor::param({2, 3, 4}, random_values(24, rng));
    check_op_gradients({x}, [&](Tape& t) { return bilinear_resize(t, x, 5, 7); });
    check_op_gradients({x}, [&](Tape& t) { return bilinear_resize(t, x, 2, 3); });
    Tensor r2 = Tensor::param({3, 5}, random_values(15, rng));
    check_op_gradients({r2}, [&](Tape& t) { return bilinear_resize(t, r2, 6, 2); });
}

TEST_CASE("composite graph gradient matches finite differences and stays finite") {
    std::mt19937_64 rng(31);
    Tensor x = Tensor::param({1, 4, 4}, random_values(16, rng));
    Tensor w = Tensor::param({2, 1, 3, 3}, random_values(18, rng));
    Tensor b = Tensor::param({2}, random_values(2, rng));
    Tensor lin = Tensor::param({32, 3}, random_values(96, rng, -0.5, 0.5));
    check_op_gradients({x, w, b, lin}, [&](Tape& t) {
        Tensor h = gelu(t, conv2d(t, x, w, b, 1));
        Tensor f = flatten(t, h);
        Tensor z = matmul(t, f, lin);
        return softmax(t, z, 1);
    });
    // finiteness after backward
    Tape tape;
    Tensor h = gelu(tape, conv2d(tape, x, w, b, 1));
    Tensor root = mean(tape, matmul(tape, flatten(tape, h), lin));
    x.zero_grad(); w.zero_grad(); b.zero_grad(); lin.zero_grad();
    tape.backward(root);
    for (double v : x.grad()) CHECK(std::isfinite(v));
    for (double v : w.grad()) CHECK(std::isfinite(v));
}

TEST_CASE("two identical runs are bitwise identical") {
    auto run = [](std::vector<double>* grads) {
        std::mt19937_64 rng(404);
        Tensor x = Tensor::param({2, 4, 4}, random_values(32, rng));
        Tensor w = Tensor::param({2, 2, 3, 3}, random_values(36, rng));
        Tensor b = Tensor::param({2}, random_values(2, rng));
        Tape tape;
        Tensor y = gelu(tape, conv2d(tape, x, w, b, 1));
        Tensor root = mean(tape, square(tape, y));
        tape.backward(root);
        grads->insert(grads->end(), x.grad().begin(), x.grad().end());
        grads->insert(grads->end(), w.grad().begin(), w.grad().end());
        return root.scalar();
    };
    std::vector<double> g1, g2;
    const double v1 = run(&g1);
    const double v2 = run(&g2);
    CHECK(std::memcmp(&v1, &v2, sizeof(double)) == 0);
    REQUIRE(g1.size() == g2.size());
    CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

TEST_CASE("adam: hand-computed first step") {
    Tensor p = Tensor::param({1}, {1.0});
    Adam opt({{"p", p}}, AdamConfig{0.1, 0.9, 0.999, 1e-8});
    p.grad_mut()[0] = 1.0;
    opt.step();
    // m=0.1, v=0.001, mhat=1, vhat=1 -> p = 1 - 0.1/(1+1e-8)
    CHECK(p.values()[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(opt.step_count() == 1);
    CHECK_FALSE(p.has_grad());  // grads cleared after the step
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    std::mt19937_64 rng(5);
    auto vals = random_values(4, rng);
    Tensor p = Tensor::param({4}, vals);
    Adam opt({{"p", p}}, AdamConfig{0.05, 0.9, 0.999, 1e-8});
    for (int s = 0; s < 3; ++s) {
        p.grad_mut();  // present, all zeros
        opt.step();
    }
    CHECK(p.values() == vals);
    CHECK(opt.step_count() == 3);
}

TEST_CASE("adam: missing gradient errors with the parameter name") {
    Tensor p = Tensor::param({2}, {1.0, 2.0});
    Adam opt({{"enc.w", p}}, AdamConfig{});
    try {
        opt.step();
        FAIL("expected OpError");
    } catch (const OpError& e) {
        CHECK(std::string(e.what()).find("enc.w") != std::string::npos);
    }
}

TEST_CASE("adam: converges on a quadratic") {
    Tensor p = Tensor::param({1}, {4.0});
    Adam opt({{"p", p}}, AdamConfig{0.1, 0.9, 0.999, 1e-8});
    for (int s = 0; s < 500; ++s) {
        Tape tape;
        Tensor loss = square(tape, p);
        tape.backward(loss);
        opt.step();
    }
    CHECK(std::fabs(p.values()[0]) < 1e-2);
}
