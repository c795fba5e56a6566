#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gmn/metric_net.hpp"
#include "oracles.hpp"

using namespace gmn;

namespace {

Matrix random_matrix(int rows, int cols, RngStream& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("zero parameters give zero logits") {
    MetricNetParams params;
    params.layer1 = DenseLayer(3, 4);
    params.layer2 = DenseLayer(2, 3);
    RngStream rng(1);
    const auto fwd = mnet_forward(params, random_matrix(5, 4, rng));
    for (double v : fwd.logits.data) CHECK(v == 0.0);
}

TEST_CASE("hand-set 2-2-2 network matches the scalar oracle") {
    MetricNetParams params;
    params.layer1 = DenseLayer(2, 2);
    params.layer1.weight(0, 0) = 1.0;
    params.layer1.weight(0, 1) = -2.0;
    params.layer1.weight(1, 0) = 0.5;
    params.layer1.weight(1, 1) = 0.25;
    params.layer1.bias = {0.1, -0.3};
    params.layer2 = DenseLayer(2, 2);
    params.layer2.weight(0, 0) = -1.0;
    params.layer2.weight(0, 1) = 2.0;
    params.layer2.weight(1, 0) = 3.0;
    params.layer2.weight(1, 1) = -0.5;
    params.layer2.bias = {0.2, 0.0};

    Matrix f(1, 2);
    f(0, 0) = 0.7;
    f(0, 1) = -0.4;
    const auto fwd = mnet_forward(params, f);
    const auto expect = oracle::scalar_mnet_logits(params, {0.7, -0.4});
    CHECK(fwd.logits(0, 0) == doctest::Approx(expect[0]).epsilon(1e-12));
    CHECK(fwd.logits(0, 1) == doctest::Approx(expect[1]).epsilon(1e-12));
}

TEST_CASE("batched forward equals per-row forward") {
    RngStream rng(4);
    const MetricNetParams params = make_metric_net(6, 3, rng);
    const Matrix f = random_matrix(9, 6, rng);
    const auto batched = mnet_forward(params, f);
    for (int r = 0; r < f.rows; ++r) {
        Matrix one(1, 6);
        std::copy(f.row(r).begin(), f.row(r).end(), one.data.begin());
        const auto single = mnet_forward(params, one);
        CHECK(batched.logits(r, 0) == single.logits(0, 0));
        CHECK(batched.logits(r, 1) == single.logits(0, 1));
    }
}

TEST_CASE("similarity basics") {
    CHECK(similarity(0.0, 0.0) == doctest::Approx(0.5));
    CHECK(similarity(3.0, 3.0) == doctest::Approx(0.5));
    CHECK(similarity(0.0, 50.0) == doctest::Approx(1.0).epsilon(1e-20));
    CHECK(similarity(1.0, 2.0) == doctest::Approx(0.7310585786).epsilon(1e-9));
    CHECK_THROWS_AS(similarity(std::nan(""), 0.0), NumericError);

    // Invariance to a shared logit offset, monotone in the gap.
    CHECK(similarity(1.0, 2.0) == doctest::Approx(similarity(101.0, 102.0)).epsilon(1e-12));
    CHECK(similarity(0.0, 1.0) < similarity(0.0, 2.0));

    // No overflow at extreme logits.
    CHECK(similarity(-1e4, 1e4) == doctest::Approx(1.0));
    CHECK(similarity(1e4, -1e4) == doctest::Approx(0.0));
}

TEST_CASE("similarity equals a high-precision sigmoid of the logit gap") {
    RngStream rng(6);
    for (int i = 0; i < 1000; ++i) {
        const double z0 = rng.uniform(-1e4, 1e4);
        const double z1 = rng.uniform(-1e4, 1e4);
        const double got = similarity(z0, z1);
        const double expect = static_cast<double>(oracle::sigmoid_long(
            static_cast<long double>(z1) - static_cast<long double>(z0)));
        CHECK(std::abs(got - expect) < 1e-9);
        CHECK(std::isfinite(got));
    }
}

TEST_CASE("backward gradients match finite differences, including the input path") {
    RngStream rng(15);
    MetricNetParams params = make_metric_net(5, 4, rng);
    Matrix f = random_matrix(6, 5, rng);
    const Matrix upstream = random_matrix(6, 2, rng);

    const auto fwd = mnet_forward(params, f);
    const auto bwd = mnet_backward(params, fwd.cache, upstream);

    ModelParams model;
    model.encoder.layers.emplace_back(1, 1);  // placeholder trunk, zero weights
    model.encoder.classifier = DenseLayer(1, 1);
    model.mnet = params;
    ModelGrads grads;
    grads.encoder.layers.emplace_back(1, 1);
    grads.encoder.classifier = DenseLayer(1, 1);
    grads.mnet = bwd.grads;

    auto loss = [&]() {
        const auto out = mnet_forward(*model.mnet, f);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.logits.data.size(); ++i)
            acc += out.logits.data[i] * upstream.data[i];
        return acc;
    };
    const auto check = oracle::finite_difference_check(model, grads, loss);
    CHECK(check.checked > 0);
    CHECK(check.max_rel_err < 1e-4);

    // Finite differences on one input coordinate.
    const double step = 1e-6;
    const double saved = f(2, 3);
    f(2, 3) = saved + step;
    const double up = loss();
    f(2, 3) = saved - step;
    const double down = loss();
    f(2, 3) = saved;
    const double numeric = (up - down) / (2 * step);
    CHECK(bwd.d_input(2, 3) == doctest::Approx(numeric).epsilon(1e-4));
    CHECK(std::abs(bwd.d_input(2, 3)) > 0.0);

    const auto zero = mnet_backward(params, fwd.cache, Matrix(6, 2));
    for (double v : zero.grads.layer1.weight.data) CHECK(v == 0.0);
    for (double v : zero.grads.layer2.weight.data) CHECK(v == 0.0);
}

TEST_CASE("similarity matrix: tiling is transparent and matches the serial path") {
    RngStream rng(23);
    const MetricNetParams params = make_metric_net(4, 2, rng);
    const Matrix probe = random_matrix(5, 4, rng);
    const Matrix gallery = random_matrix(5, 4, rng);

    const Matrix untiled = similarity_matrix(params, probe, gallery, PairOp::SquaredDiff, 1000);
    for (int tile : {1, 2, 3, 5}) {
        const Matrix tiled = similarity_matrix(params, probe, gallery, PairOp::SquaredDiff, tile);
        CHECK(tiled == untiled);
    }
    CHECK(untiled == similarity_matrix_serial(params, probe, gallery, PairOp::SquaredDiff));
    CHECK_THROWS_AS(similarity_matrix(params, probe, gallery, PairOp::SquaredDiff, 0), ConfigError);
}

TEST_CASE("similarity matrix composes the per-pair scalar pipeline") {
    RngStream rng(27);
    const MetricNetParams params = make_metric_net(3, 2, rng);
    const Matrix probe = random_matrix(3, 3, rng);
    const Matrix gallery = random_matrix(4, 3, rng);
    const Matrix s = similarity_matrix(params, probe, gallery, PairOp::SquaredDiff, 2);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) {
            std::vector<double> f(3);
            for (int c = 0; c < 3; ++c) {
                const double diff = probe(i, c) - gallery(j, c);
                f[c] = diff * diff;
            }
            const auto z = oracle::scalar_mnet_logits(params, f);
            const double expect = static_cast<double>(
                oracle::sigmoid_long(static_cast<long double>(z[1]) - z[0]));
            CHECK(s(i, j) == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("probe == gallery gives a symmetric matrix under symmetric ops") {
    RngStream rng(31);
    const MetricNetParams params = make_metric_net(4, 2, rng);
    const Matrix set = random_matrix(6, 4, rng);
    for (PairOp op : {PairOp::SquaredDiff, PairOp::Abs, PairOp::Mul, PairOp::Add}) {
        const Matrix s = similarity_matrix(params, set, set, op, 3);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) CHECK(s(i, j) == s(j, i));
    }
}

TEST_CASE("identical probe and gallery rows score the zero pair feature") {
    RngStream rng(37);
    const MetricNetParams params = make_metric_net(4, 2, rng);
    Matrix probe = random_matrix(2, 4, rng);
    Matrix gallery = random_matrix(3, 4, rng);
    for (int c = 0; c < 4; ++c) gallery(1, c) = probe(0, c);  // duplicate
    const Matrix s = similarity_matrix(params, probe, gallery, PairOp::SquaredDiff, 2);
    const auto z = oracle::scalar_mnet_logits(params, {0, 0, 0, 0});
    const double zero_sim =
        static_cast<double>(oracle::sigmoid_long(static_cast<long double>(z[1]) - z[0]));
    CHECK(s(0, 1) == doctest::Approx(zero_sim).epsilon(1e-12));
}

TEST_CASE("parameter count formula") {
    RngStream rng(41);
    const int d = 32, h = default_hidden_width(32);
    CHECK(h == 8);
    const MetricNetParams params = make_metric_net(d, h, rng);
    CHECK(mnet_param_count(params) == static_cast<std::size_t>(d * h + h + h * 2 + 2));
    CHECK(default_hidden_width(2048) == 512);
    CHECK(default_hidden_width(2) == 1);
}
