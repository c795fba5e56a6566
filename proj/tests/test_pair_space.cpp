#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "gmn/pair_space.hpp"
#include "oracles.hpp"

using namespace gmn;

namespace {

// Scalar-loop reference for each combination rule.
std::vector<double> pair_oracle(const std::vector<double>& x, const std::vector<double>& y,
                                PairOp op) {
    std::vector<double> out(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) {
        switch (op) {
            case PairOp::SquaredDiff: out[c] = (x[c] - y[c]) * (x[c] - y[c]); break;
            case PairOp::Abs: out[c] = std::abs(x[c] - y[c]); break;
            case PairOp::Mul: out[c] = x[c] * y[c]; break;
            case PairOp::Add: out[c] = x[c] + y[c]; break;
        }
    }
    return out;
}

Matrix toy_batch(const std::vector<std::vector<double>>& rows) {
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), m.data.begin() + r * rows[0].size());
    return m;
}

}  // namespace

TEST_CASE("pair_feature hand cases") {
    const std::vector<double> x{1, 2}, y{3, 0};
    CHECK(pair_feature(x, y, PairOp::SquaredDiff) == std::vector<double>{4, 4});
    CHECK(pair_feature(x, y, PairOp::Abs) == std::vector<double>{2, 2});
    CHECK(pair_feature(x, y, PairOp::Mul) == std::vector<double>{3, 0});
    CHECK(pair_feature(x, y, PairOp::Add) == std::vector<double>{4, 2});
    CHECK(pair_feature(x, x, PairOp::SquaredDiff) == std::vector<double>{0, 0});
    CHECK_THROWS_AS(pair_feature(x, std::vector<double>{1.0}, PairOp::Add), DataError);
}

TEST_CASE("pair ops: symmetry, non-negativity, zero-at-identity on random pairs") {
    RngStream rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + static_cast<int>(rng.uniform_int(16));
        std::vector<double> x(d), y(d);
        for (auto& v : x) v = rng.normal();
        for (auto& v : y) v = rng.normal();
        for (PairOp op : {PairOp::SquaredDiff, PairOp::Abs, PairOp::Mul, PairOp::Add}) {
            const auto xy = pair_feature(x, y, op);
            const auto yx = pair_feature(y, x, op);
            CHECK(xy == yx);
            CHECK(xy == pair_oracle(x, y, op));
            if (op == PairOp::SquaredDiff || op == PairOp::Abs)
                for (double v : xy) CHECK(v >= 0.0);
        }
        const auto self = pair_feature(x, x, PairOp::SquaredDiff);
        for (double v : self) CHECK(v == 0.0);
        if (x != y) {
            double sum = 0.0;
            for (double v : pair_feature(x, y, PairOp::SquaredDiff)) sum += v;
            CHECK(sum > 0.0);
        }
    }
}

TEST_CASE("sample_pairs enumerates positives exhaustively and balances negatives") {
    // 2 identities x 2 samples, one domain.
    const Matrix emb = toy_batch({{0, 0}, {1, 0}, {0, 1}, {1, 1}});
    const std::vector<int> ids{0, 0, 1, 1}, doms{0, 0, 0, 0};
    const std::vector<std::int64_t> sids{10, 11, 12, 13};
    RngStream rng(5);
    const auto pairs =
        sample_pairs(emb, ids, doms, sids, PairSamplingScheme{}, PairOp::SquaredDiff, rng);
    int pos = 0, neg = 0;
    for (const auto& p : pairs) (p.label ? pos : neg) += 1;
    CHECK(pos == 2);
    CHECK(neg == 2);
    for (const auto& p : pairs) {
        CHECK(p.label == (p.pair_identity.first == p.pair_identity.second ? 1 : 0));
        const auto [a, b] = p.source_rows;
        CHECK(p.vector == pair_feature(emb.row(a), emb.row(b), PairOp::SquaredDiff));
    }
}

TEST_CASE("sampling schemes respect domain constraints") {
    const Matrix emb = toy_batch({{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 2}, {3, 3}});
    const std::vector<int> ids{0, 0, 1, 1, 2, 2};
    const std::vector<int> doms{0, 0, 0, 1, 1, 1};
    const std::vector<std::int64_t> sids{0, 1, 2, 3, 4, 5};

    PairSamplingScheme scheme;
    scheme.negatives_per_positive = 3;

    scheme.variant = NegativeSampling::InterDomain;
    RngStream rng(7);
    for (const auto& p : sample_pairs(emb, ids, doms, sids, scheme, PairOp::SquaredDiff, rng)) {
        if (p.label == 0) CHECK(doms[p.source_rows.first] != doms[p.source_rows.second]);
    }

    scheme.variant = NegativeSampling::IntraDomain;
    for (const auto& p : sample_pairs(emb, ids, doms, sids, scheme, PairOp::SquaredDiff, rng)) {
        if (p.label == 0) CHECK(doms[p.source_rows.first] == doms[p.source_rows.second]);
    }
}

TEST_CASE("unsatisfiable schemes raise a sampling error") {
    const Matrix emb = toy_batch({{0, 0}, {1, 0}, {2, 0}, {3, 0}});
    const std::vector<int> ids{0, 0, 1, 1};
    const std::vector<int> one_domain{0, 0, 0, 0};
    const std::vector<std::int64_t> sids{0, 1, 2, 3};
    PairSamplingScheme scheme;
    scheme.variant = NegativeSampling::InterDomain;
    RngStream rng(1);
    CHECK_THROWS_AS(sample_pairs(emb, ids, one_domain, sids, scheme, PairOp::SquaredDiff, rng),
                    DataError);

    // One identity only: no scheme works.
    const std::vector<int> single{0, 0, 0, 0};
    scheme.variant = NegativeSampling::Random;
    CHECK_THROWS_AS(sample_pairs(emb, single, one_domain, sids, scheme, PairOp::SquaredDiff, rng),
                    DataError);
}

TEST_CASE("sampling is deterministic under one seed") {
    const Matrix emb = toy_batch({{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 2}, {3, 3}});
    const std::vector<int> ids{0, 0, 1, 1, 2, 2};
    const std::vector<int> doms{0, 0, 0, 1, 1, 1};
    const std::vector<std::int64_t> sids{0, 1, 2, 3, 4, 5};
    PairSamplingScheme scheme;
    scheme.negatives_per_positive = 2;
    RngStream r1(42), r2(42);
    const auto a = sample_pairs(emb, ids, doms, sids, scheme, PairOp::SquaredDiff, r1);
    const auto b = sample_pairs(emb, ids, doms, sids, scheme, PairOp::SquaredDiff, r2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].source_rows == b[i].source_rows);
        CHECK(a[i].vector == b[i].vector);
    }
}

TEST_CASE("identity centroids") {
    const Matrix emb = toy_batch({{0, 0}, {2, 4}, {5, 5}});
    const std::vector<int> ids{3, 3, 9};
    const auto cen = identity_centroids(emb, ids);
    CHECK(cen.at(3) == std::vector<double>{1, 2});
    CHECK(cen.at(9) == std::vector<double>{5, 5});

    // Centering identity: per-identity mean of (sample - centroid) is zero.
    std::vector<double> resid(2, 0.0);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) resid[c] += emb(r, c) - cen.at(3)[c];
    CHECK(resid[0] == doctest::Approx(0.0));
    CHECK(resid[1] == doctest::Approx(0.0));
}

TEST_CASE("pic variants match a scalar recomputation") {
    const Matrix emb = toy_batch({{1, 0}, {3, 2}, {0, 5}, {4, 1}});
    const std::vector<int> ids{0, 0, 1, 1};
    RngStream rng(9);
    const auto pv = pic_pair_variants(emb, ids, rng);
    REQUIRE(pv.anchors.size() == 4);  // every row has a same-identity partner

    for (const auto& a : pv.anchors) {
        std::vector<double> fp(emb.row(a.p).begin(), emb.row(a.p).end());
        std::vector<double> fpp(emb.row(a.p_pos).begin(), emb.row(a.p_pos).end());
        std::vector<double> fq(emb.row(a.q).begin(), emb.row(a.q).end());
        const auto& cp = pv.centroids.at(a.id_p);
        const auto& cq = pv.centroids.at(a.id_q);
        auto sq = [](const std::vector<double>& u, const std::vector<double>& w) {
            std::vector<double> out(u.size());
            for (std::size_t c = 0; c < u.size(); ++c) out[c] = (u[c] - w[c]) * (u[c] - w[c]);
            return out;
        };
        CHECK(a.positive[0] == sq(fp, fpp));
        CHECK(a.positive[1] == sq(fp, cp));
        CHECK(a.positive[2] == sq(cp, fpp));
        CHECK(a.negative[0] == sq(fp, fq));
        CHECK(a.negative[1] == sq(fp, cq));
        CHECK(a.negative[2] == sq(cp, fq));
        CHECK(a.negative[3] == sq(cp, cq));
        CHECK(ids[a.p] == ids[a.p_pos]);
        CHECK(ids[a.p] != ids[a.q]);
        CHECK(a.p != a.p_pos);
    }
}

TEST_CASE("degenerate positives: identical same-identity samples give zero variants") {
    const Matrix emb = toy_batch({{2, 2}, {2, 2}, {7, 1}, {7, 1}});
    const std::vector<int> ids{0, 0, 1, 1};
    RngStream rng(2);
    const auto pv = pic_pair_variants(emb, ids, rng);
    for (const auto& a : pv.anchors)
        for (const auto& v : a.positive)
            for (double x : v) CHECK(x == 0.0);
}

TEST_CASE("the centroid-only negative variant ignores sample permutations") {
    // f4- depends only on the two centroids.
    const Matrix emb1 = toy_batch({{1, 0}, {3, 2}, {0, 5}, {4, 1}});
    const Matrix emb2 = toy_batch({{3, 2}, {1, 0}, {4, 1}, {0, 5}});  // swapped within identities
    const std::vector<int> ids{0, 0, 1, 1};
    RngStream r1(9), r2(9);
    const auto pv1 = pic_pair_variants(emb1, ids, r1);
    const auto pv2 = pic_pair_variants(emb2, ids, r2);
    for (std::size_t a = 0; a < pv1.anchors.size(); ++a) {
        if (pv1.anchors[a].id_q == pv2.anchors[a].id_q)
            CHECK(pv1.anchors[a].negative[3] == pv2.anchors[a].negative[3]);
    }
}

TEST_CASE("pic sampling preconditions") {
    const Matrix no_pos = toy_batch({{0, 0}, {1, 1}});
    RngStream rng(4);
    CHECK_THROWS_AS(pic_pair_variants(no_pos, {0, 1}, rng), DataError);
    const Matrix one_id = toy_batch({{0, 0}, {1, 1}});
    CHECK_THROWS_AS(pic_pair_variants(one_id, {0, 0}, rng), DataError);
}
