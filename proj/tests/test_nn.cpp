#include "vcoder/error.hpp"
#include "vcoder/nn.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace vcoder;
using namespace vcoder::nn;

namespace {

Network random_network(std::mt19937_64& rng, std::vector<std::size_t> dims, Activation hidden, Activation out) {
    Network net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        net.push_back(make_layer(dims[i], dims[i + 1], i + 2 == dims.size() ? out : hidden, rng));
        // Non-zero biases so their gradients are exercised.
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (auto& b : net.back().bias) b = u(rng);
    }
    return net;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

} // namespace

TEST_CASE("sigmoid stays strictly inside (0, 1) and is stable") {
    for (double x : {-30.0, -5.0, 0.0, 3.0, 30.0}) {
        const double s = sigmoid(x);
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }
    CHECK(sigmoid(0.0) == doctest::Approx(0.5));
    CHECK(std::isfinite(sigmoid(-1000.0)));
    CHECK(std::isfinite(sigmoid(1000.0)));
    CHECK(sigmoid(2.0) + sigmoid(-2.0) == doctest::Approx(1.0));
}

TEST_CASE("glorot initialization stays within its limit") {
    std::mt19937_64 rng(1);
    const auto layer = make_layer(10, 6, Activation::sigmoid, rng);
    const double limit = std::sqrt(6.0 / 16.0);
    CHECK(layer.weights.rows == 6);
    CHECK(layer.weights.cols == 10);
    for (double w : layer.weights.data) CHECK(std::abs(w) <= limit);
    for (double b : layer.bias) CHECK(b == 0.0);
}

TEST_CASE("hand-computed gradient of a single linear unit") {
    // y = 2 x0 + 3 x1 + 1 = 9 at x = (1, 2); target 10; loss (10 - 9)^2 = 1;
    // dL/dy = 2 (y - t) = -2, so dW = (-2, -4), db = -2, dx = (-4, -6).
    DenseLayer layer;
    layer.weights = Matrix(1, 2);
    layer.weights.data = {2.0, 3.0};
    layer.bias = {1.0};
    layer.activation = Activation::identity;
    const Network net{layer};
    const std::vector<double> x{1.0, 2.0}, target{10.0};
    const auto r = backward(net, x, target);
    CHECK(r.loss == doctest::Approx(1.0));
    CHECK(r.grads.layers[0].weights.data[0] == doctest::Approx(-2.0));
    CHECK(r.grads.layers[0].weights.data[1] == doctest::Approx(-4.0));
    CHECK(r.grads.layers[0].bias[0] == doctest::Approx(-2.0));
    CHECK(r.grads.input[0] == doctest::Approx(-4.0));
    CHECK(r.grads.input[1] == doctest::Approx(-6.0));
}

TEST_CASE("sparse and dense inputs give the same forward pass") {
    std::mt19937_64 rng(3);
    const auto net = random_network(rng, {100, 8, 100}, Activation::sigmoid, Activation::sigmoid);
    std::vector<double> x(100, 0.0);
    x[3] = 1.0;
    x[70] = 1.0;
    const auto y = forward(net, x);
    // Dense reference computed by hand.
    std::vector<double> h(8);
    for (std::size_t o = 0; o < 8; ++o) {
        double s = net[0].bias[o];
        for (std::size_t i = 0; i < 100; ++i) s += net[0].weights(o, i) * x[i];
        h[o] = sigmoid(s);
    }
    for (std::size_t o = 0; o < 100; ++o) {
        double s = net[1].bias[o];
        for (std::size_t i = 0; i < 8; ++i) s += net[1].weights(o, i) * h[i];
        CHECK(y[o] == doctest::Approx(sigmoid(s)).epsilon(1e-14));
    }
}

TEST_CASE("finite-difference check") {
    std::mt19937_64 rng(7);
    SUBCASE("linear network is differenced exactly") {
        const auto net = random_network(rng, {4, 3, 2}, Activation::identity, Activation::identity);
        const auto x = random_vector(rng, 4);
        const auto t = random_vector(rng, 2);
        CHECK(finite_diff_check(net, x, t, 1e-4) < 1e-8);
    }
    SUBCASE("sigmoid network at h = 1e-5") {
        const auto net = random_network(rng, {6, 5, 6}, Activation::sigmoid, Activation::sigmoid);
        const auto x = random_vector(rng, 6, 0.0, 1.0);
        const auto t = random_vector(rng, 6, 0.0, 1.0);
        CHECK(finite_diff_check(net, x, t, 1e-5) < 1e-4);
    }
    SUBCASE("step out of range") {
        const auto net = random_network(rng, {2, 2}, Activation::identity, Activation::identity);
        const std::vector<double> x{1, 1}, t{0, 0};
        CHECK_THROWS_AS(finite_diff_check(net, x, t, 1.0), DomainError);
        CHECK_THROWS_AS(finite_diff_check(net, x, t, 1e-9), DomainError);
    }
}

TEST_CASE("gradient exactness on random small networks") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> width(1, 32);
    std::uniform_int_distribution<int> depth(1, 3);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<std::size_t> dims{width(rng)};
        const int layers = depth(rng);
        for (int l = 0; l < layers; ++l) dims.push_back(width(rng));
        const auto hidden = trial % 2 ? Activation::sigmoid : Activation::identity;
        const auto net = random_network(rng, dims, hidden, Activation::sigmoid);
        const auto x = random_vector(rng, dims.front(), 0.0, 1.0);
        const auto t = random_vector(rng, dims.back(), 0.0, 1.0);
        CHECK(finite_diff_check(net, x, t, 1e-5) < 1e-4);
    }
}

TEST_CASE("adam") {
    std::vector<double> p{0.5, -1.5, 2.0};
    const std::vector<double> zero(3, 0.0);
    const auto run = [&](AdamOptions o, const std::vector<double>& g, int steps) {
        AdamState adam(o);
        for (int i = 0; i < steps; ++i) {
            const std::span<double> params[] = {p};
            const std::span<const double> grads[] = {g};
            adam.step(params, grads);
        }
        return adam;
    };

    SUBCASE("zero gradient, zero weight decay leaves parameters unchanged") {
        const auto before = p;
        run(AdamOptions{}, zero, 5);
        CHECK(p == before);
    }
    SUBCASE("first step moves each parameter by about lr against the gradient") {
        // m_hat = g and v_hat = g^2 after bias correction, so the step is
        // lr * g / (|g| + eps).
        const auto before = p;
        const std::vector<double> g{0.3, -2.0, 1e-3};
        AdamOptions o;
        o.learning_rate = 0.01;
        run(o, g, 1);
        for (std::size_t i = 0; i < 3; ++i) {
            const double expected = before[i] - 0.01 * g[i] / (std::abs(g[i]) + 1e-8);
            CHECK(p[i] == doctest::Approx(expected).epsilon(1e-12));
            CHECK(std::abs(before[i] - p[i]) == doctest::Approx(0.01).epsilon(1e-4));
        }
    }
    SUBCASE("weight decay shrinks a zero-gradient parameter by (1 - lr * wd)") {
        const auto before = p;
        AdamOptions o;
        o.learning_rate = 0.01;
        o.weight_decay = 0.001;
        run(o, zero, 3);
        const double f = 1.0 - 0.01 * 0.001;
        for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(before[i] * f * f * f).epsilon(1e-15));
    }
    SUBCASE("lr = 0 is the identity") {
        const auto before = p;
        AdamOptions o;
        o.learning_rate = 0.0;
        o.weight_decay = 0.001;
        run(o, std::vector<double>{1.0, -1.0, 5.0}, 4);
        CHECK(p == before);
    }
    SUBCASE("extend_block duplicates moments") {
        AdamOptions o;
        auto adam = run(o, std::vector<double>{1.0, 2.0, 3.0}, 2);
        adam.extend_block(0, 1, 2);
        REQUIRE(adam.first_moments()[0].size() == 5);
        CHECK(adam.first_moments()[0][3] == adam.first_moments()[0][1]);
        CHECK(adam.second_moments()[0][4] == adam.second_moments()[0][2]);
        CHECK_THROWS_AS(adam.extend_block(0, 4, 3), ShapeError);
    }
    SUBCASE("shape mismatch") {
        AdamState adam;
        std::vector<double> g(2, 0.0);
        const std::span<double> params[] = {p};
        const std::span<const double> grads[] = {g};
        CHECK_THROWS_AS(adam.step(params, grads), ShapeError);
    }
}

TEST_CASE("identical seeds give bitwise-identical parameters after k steps") {
    const auto train = [] {
        std::mt19937_64 rng(5);
        auto net = random_network(rng, {5, 4, 5}, Activation::sigmoid, Activation::sigmoid);
        AdamState adam;
        const auto x = random_vector(rng, 5, 0.0, 1.0);
        for (int k = 0; k < 10; ++k) {
            const auto r = backward(net, x, x);
            adam.step(parameter_blocks(net), gradient_blocks(r.grads));
        }
        return net;
    };
    const auto a = train();
    const auto b = train();
    for (std::size_t l = 0; l < a.size(); ++l) {
        CHECK(a[l].weights.data == b[l].weights.data);
        CHECK(a[l].bias == b[l].bias);
    }
}

TEST_CASE("non-finite outputs are rejected") {
    DenseLayer layer;
    layer.weights = Matrix(1, 1);
    layer.weights.data = {std::nan("")};
    layer.bias = {0.0};
    layer.activation = Activation::identity;
    const std::vector<double> x{1.0}, t{0.0};
    CHECK_THROWS_AS(backward(Network{layer}, x, t), NumericError);
}
