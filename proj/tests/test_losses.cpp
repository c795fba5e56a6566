#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gmn/losses.hpp"
#include "gmn/rng.hpp"
#include "oracles.hpp"

using namespace gmn;

namespace {

Matrix random_matrix(int rows, int cols, RngStream& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = rng.normal();
    return m;
}

// Finite differences on a logit matrix.
void check_logit_grads(const Matrix& logits, const Matrix& analytic,
                       const std::function<double(const Matrix&)>& loss, double tol) {
    Matrix perturbed = logits;
    const double step = 1e-6;
    for (std::size_t i = 0; i < logits.data.size(); ++i) {
        perturbed.data[i] = logits.data[i] + step;
        const double up = loss(perturbed);
        perturbed.data[i] = logits.data[i] - step;
        const double down = loss(perturbed);
        perturbed.data[i] = logits.data[i];
        const double numeric = (up - down) / (2 * step);
        const double denom = std::max({std::abs(numeric), std::abs(analytic.data[i]), 1e-8});
        CHECK(std::abs(numeric - analytic.data[i]) / denom < tol);
    }
}

}  // namespace

TEST_CASE("pair classification loss values") {
    Matrix logits(1, 2);
    CHECK(gmn_loss(logits, {0}).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(gmn_loss(logits, {1}).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    logits(0, 0) = 0.0;
    logits(0, 1) = 10.0;
    // -log softmax[1] = log(1 + e^-10)
    CHECK(gmn_loss(logits, {1}).value ==
          doctest::Approx(std::log1p(std::exp(-10.0))).epsilon(1e-10));
    CHECK(gmn_loss(logits, {1}).value == doctest::Approx(4.54e-5).epsilon(1e-2));

    CHECK_THROWS_AS(gmn_loss(logits, {2}), DataError);
}

TEST_CASE("pair classification gradients match finite differences") {
    RngStream rng(3);
    const Matrix logits = random_matrix(8, 2, rng);
    std::vector<int> labels(8);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(2));
    const auto lg = gmn_loss(logits, labels);
    check_logit_grads(logits, lg.d_logits,
                      [&](const Matrix& z) { return gmn_loss(z, labels).value; }, 1e-6);
}

TEST_CASE("cross entropy values and gradients") {
    Matrix uniform(1, 5);
    CHECK(cross_entropy(uniform, {3}).value == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    Matrix peaked(1, 3);
    peaked(0, 0) = 10.0;
    CHECK(cross_entropy(peaked, {0}).value ==
          doctest::Approx(std::log1p(2.0 * std::exp(-10.0))).epsilon(1e-10));
    CHECK(cross_entropy(peaked, {0}).value == doctest::Approx(9.08e-5).epsilon(1e-2));

    RngStream rng(5);
    const Matrix logits = random_matrix(6, 4, rng);
    std::vector<int> labels(6);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(4));
    const auto ce = cross_entropy(logits, labels);
    check_logit_grads(logits, ce.d_logits,
                      [&](const Matrix& z) { return cross_entropy(z, labels).value; }, 1e-6);
    CHECK_THROWS_AS(cross_entropy(logits, {0, 1, 2, 3, 4, 9}), DataError);
}

TEST_CASE("batch-hard triplet: degenerate and hand cases") {
    Matrix all_equal(4, 2, 1.5);
    const std::vector<int> ids{0, 0, 1, 1};
    CHECK(triplet_loss_batch_hard(all_equal, ids, 0.3).value == doctest::Approx(0.3));

    // 2 ids x 2 samples, hand-set points; compare to exhaustive mining.
    Matrix emb(4, 2);
    emb(0, 0) = 0.0; emb(0, 1) = 0.0;
    emb(1, 0) = 1.0; emb(1, 1) = 0.0;
    emb(2, 0) = 4.0; emb(2, 1) = 0.0;
    emb(3, 0) = 4.0; emb(3, 1) = 2.0;
    const double got = triplet_loss_batch_hard(emb, ids, 0.3).value;
    CHECK(got == doctest::Approx(oracle::brute_force_batch_hard(emb, ids, 0.3)).epsilon(1e-12));
}

TEST_CASE("batch-hard triplet matches exhaustive mining on random batches") {
    RngStream rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int groups = 2 + static_cast<int>(rng.uniform_int(3));
        const int per = 2 + static_cast<int>(rng.uniform_int(3));
        Matrix emb(groups * per, 3);
        std::vector<int> ids(groups * per);
        for (int r = 0; r < emb.rows; ++r) {
            ids[r] = r / per;
            for (int c = 0; c < 3; ++c) emb(r, c) = rng.normal();
        }
        const double got = triplet_loss_batch_hard(emb, ids, 0.3).value;
        const double expect = oracle::brute_force_batch_hard(emb, ids, 0.3);
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("triplet gradients match finite differences away from ties") {
    RngStream rng(13);
    Matrix emb(6, 3);
    std::vector<int> ids{0, 0, 1, 1, 2, 2};
    for (auto& v : emb.data) v = rng.normal();
    const auto res = triplet_loss_batch_hard(emb, ids, 0.5);

    const double step = 1e-6;
    for (std::size_t i = 0; i < emb.data.size(); ++i) {
        const double saved = emb.data[i];
        emb.data[i] = saved + step;
        const double up = triplet_loss_batch_hard(emb, ids, 0.5).value;
        emb.data[i] = saved - step;
        const double down = triplet_loss_batch_hard(emb, ids, 0.5).value;
        emb.data[i] = saved;
        const double numeric = (up - down) / (2 * step);
        const double denom = std::max({std::abs(numeric), std::abs(res.d_embeddings.data[i]), 1e-6});
        CHECK(std::abs(numeric - res.d_embeddings.data[i]) / denom < 1e-4);
    }
}

TEST_CASE("triplet mining errors") {
    Matrix emb(3, 2);
    CHECK_THROWS_AS(triplet_loss_batch_hard(emb, {0, 0, 0}, 0.3), DataError);  // no negative
    CHECK_THROWS_AS(triplet_loss_batch_hard(emb, {0, 1, 2}, 0.3), DataError);  // no positive
}

TEST_CASE("pair-identity consistency loss: hand values") {
    std::vector<std::array<std::vector<double>, 3>> pos(1);
    pos[0] = {std::vector<double>{0, 0}, {3, 4}, {3, 4}};
    std::vector<std::array<std::vector<double>, 4>> neg;
    const auto res = pic_loss(pos, neg);
    CHECK(res.pos == doctest::Approx(10.0 / 3.0).epsilon(1e-12));
    CHECK(res.neg == 0.0);

    // Coincident variants: zero loss.
    pos[0] = {std::vector<double>{1, 2}, {1, 2}, {1, 2}};
    CHECK(pic_loss(pos, neg).pos == 0.0);
}

TEST_CASE("pic loss is invariant to permuting variant indices") {
    RngStream rng(17);
    std::vector<std::array<std::vector<double>, 3>> pos(2);
    std::vector<std::array<std::vector<double>, 4>> neg(2);
    for (auto& a : pos)
        for (auto& v : a) {
            v.resize(3);
            for (auto& x : v) x = rng.normal();
        }
    for (auto& a : neg)
        for (auto& v : a) {
            v.resize(3);
            for (auto& x : v) x = rng.normal();
        }
    const auto base = pic_loss(pos, neg);

    std::swap(pos[0][0], pos[0][2]);
    std::swap(neg[1][1], neg[1][3]);
    std::swap(neg[0][0], neg[0][2]);
    const auto permuted = pic_loss(pos, neg);
    CHECK(base.pos == doctest::Approx(permuted.pos).epsilon(1e-12));
    CHECK(base.neg == doctest::Approx(permuted.neg).epsilon(1e-12));
}

TEST_CASE("pic gradients match finite differences") {
    RngStream rng(19);
    std::vector<std::array<std::vector<double>, 3>> pos(2);
    std::vector<std::array<std::vector<double>, 4>> neg(2);
    for (auto& a : pos)
        for (auto& v : a) {
            v.resize(4);
            for (auto& x : v) x = rng.normal();
        }
    for (auto& a : neg)
        for (auto& v : a) {
            v.resize(4);
            for (auto& x : v) x = rng.normal();
        }
    const auto res = pic_loss(pos, neg);

    const double step = 1e-6;
    for (std::size_t a = 0; a < pos.size(); ++a) {
        for (int i = 0; i < 3; ++i) {
            for (int c = 0; c < 4; ++c) {
                const double saved = pos[a][i][c];
                pos[a][i][c] = saved + step;
                const double up = pic_loss(pos, neg).pos;
                pos[a][i][c] = saved - step;
                const double down = pic_loss(pos, neg).pos;
                pos[a][i][c] = saved;
                const double numeric = (up - down) / (2 * step);
                const double analytic = res.pos_grads[a][i][c];
                const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
                CHECK(std::abs(numeric - analytic) / denom < 1e-4);
            }
        }
    }
    for (std::size_t a = 0; a < neg.size(); ++a) {
        for (int i = 0; i < 4; ++i) {
            for (int c = 0; c < 4; ++c) {
                const double saved = neg[a][i][c];
                neg[a][i][c] = saved + step;
                const double up = pic_loss(pos, neg).neg;
                neg[a][i][c] = saved - step;
                const double down = pic_loss(pos, neg).neg;
                neg[a][i][c] = saved;
                const double numeric = (up - down) / (2 * step);
                const double analytic = res.neg_grads[a][i][c];
                const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
                CHECK(std::abs(numeric - analytic) / denom < 1e-4);
            }
        }
    }
}

TEST_CASE("total loss arithmetic and error naming") {
    const auto t1 = total_loss(1.0, 1.0, 1.0, 0.5, 0.5, 1.0);
    CHECK(t1.total == doctest::Approx(4.0));
    const auto t2 = total_loss(1.0, 1.0, 1.0, 0.5, 0.5, 0.0);
    CHECK(t2.total == doctest::Approx(3.0));
    const auto t3 = total_loss(0.5, 0.25, 0.125, 0.4, 0.6, 1.5);
    CHECK(t3.total == doctest::Approx(0.5 + 0.25 + 0.125 + 1.5 * 1.0));
    CHECK_THROWS_WITH_AS(total_loss(1.0, std::nan(""), 0.0, 0.0, 0.0, 1.0),
                         doctest::Contains("l_tri"), NumericError);
}
