#include "gmn/pair_space.hpp"

#include <algorithm>
#include <cassert>
#include <string>
#include <unordered_map>

namespace gmn {

const char* pair_op_name(PairOp op) {
    switch (op) {
        case PairOp::SquaredDiff: return "squared_diff";
        case PairOp::Abs: return "abs";
        case PairOp::Mul: return "mul";
        case PairOp::Add: return "add";
    }
    return "?";
}

const char* sampling_name(NegativeSampling v) {
    switch (v) {
        case NegativeSampling::Random: return "random";
        case NegativeSampling::InterDomain: return "inter_domain";
        case NegativeSampling::IntraDomain: return "intra_domain";
    }
    return "?";
}

std::vector<double> pair_feature(std::span<const double> x, std::span<const double> y, PairOp op) {
    if (x.size() != y.size())
        throw DataError("pair_feature: dimension mismatch " + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()));
    std::vector<double> out(x.size());
    switch (op) {
        case PairOp::SquaredDiff:
            for (std::size_t c = 0; c < x.size(); ++c) {
                const double d = x[c] - y[c];
                out[c] = d * d;
            }
            break;
        case PairOp::Abs:
            for (std::size_t c = 0; c < x.size(); ++c) out[c] = std::abs(x[c] - y[c]);
            break;
        case PairOp::Mul:
            for (std::size_t c = 0; c < x.size(); ++c) out[c] = x[c] * y[c];
            break;
        case PairOp::Add:
            for (std::size_t c = 0; c < x.size(); ++c) out[c] = x[c] + y[c];
            break;
    }
    return out;
}

void pair_feature_backward(std::span<const double> x, std::span<const double> y, PairOp op,
                           std::span<const double> d_out, std::span<double> dx, std::span<double> dy) {
    assert(x.size() == y.size() && x.size() == d_out.size());
    switch (op) {
        case PairOp::SquaredDiff:
            for (std::size_t c = 0; c < x.size(); ++c) {
                const double g = 2.0 * (x[c] - y[c]) * d_out[c];
                dx[c] += g;
                dy[c] -= g;
            }
            break;
        case PairOp::Abs:
            for (std::size_t c = 0; c < x.size(); ++c) {
                const double diff = x[c] - y[c];
                const double s = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                dx[c] += s * d_out[c];
                dy[c] -= s * d_out[c];
            }
            break;
        case PairOp::Mul:
            for (std::size_t c = 0; c < x.size(); ++c) {
                dx[c] += y[c] * d_out[c];
                dy[c] += x[c] * d_out[c];
            }
            break;
        case PairOp::Add:
            for (std::size_t c = 0; c < x.size(); ++c) {
                dx[c] += d_out[c];
                dy[c] += d_out[c];
            }
            break;
    }
}

namespace {

std::map<int, std::vector<int>> rows_by_identity(const std::vector<int>& identity) {
    std::map<int, std::vector<int>> groups;
    for (std::size_t i = 0; i < identity.size(); ++i)
        groups[identity[i]].push_back(static_cast<int>(i));
    return groups;
}

bool partner_ok(NegativeSampling v, int id_a, int dom_a, int id_b, int dom_b) {
    if (id_a == id_b) return false;
    switch (v) {
        case NegativeSampling::Random: return true;
        case NegativeSampling::InterDomain: return dom_a != dom_b;
        case NegativeSampling::IntraDomain: return dom_a == dom_b;
    }
    return false;
}

}  // namespace

std::vector<PairFeature> sample_pairs(const Matrix& embeddings, const std::vector<int>& identity,
                                      const std::vector<int>& domain,
                                      const std::vector<std::int64_t>& sample_ids,
                                      const PairSamplingScheme& scheme, PairOp op, RngStream& rng) {
    const int b = embeddings.rows;
    if (static_cast<int>(identity.size()) != b || static_cast<int>(domain.size()) != b ||
        static_cast<int>(sample_ids.size()) != b)
        throw DataError("sample_pairs: label arrays must match the batch size");
    if (scheme.negatives_per_positive < 1)
        throw ConfigError("sample_pairs: negatives_per_positive must be >= 1");

    const auto groups = rows_by_identity(identity);
    if (groups.size() < 2) throw DataError("pair sampling: batch must contain >= 2 identities");

    auto make_pair_feature = [&](int ra, int rb, int label) {
        PairFeature pf;
        pf.vector = pair_feature(embeddings.row(ra), embeddings.row(rb), op);
        pf.label = label;
        pf.pair_identity = {identity[ra], identity[rb]};
        pf.source_ids = {sample_ids[ra], sample_ids[rb]};
        pf.source_rows = {ra, rb};
        return pf;
    };

    std::vector<PairFeature> out;
    for (const auto& [id, rows] : groups) {
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = i + 1; j < rows.size(); ++j)
                out.push_back(make_pair_feature(rows[i], rows[j], 1));
    }
    const std::size_t num_positive = out.size();

    // Anchors eligible for negative sampling: rows with at least one
    // admissible partner under the scheme.
    std::vector<int> eligible;
    std::unordered_map<int, std::vector<int>> partners;
    for (int a = 0; a < b; ++a) {
        for (int p = 0; p < b; ++p) {
            if (partner_ok(scheme.variant, identity[a], domain[a], identity[p], domain[p])) {
                eligible.push_back(a);
                break;
            }
        }
    }
    if (eligible.empty())
        throw DataError(std::string("pair sampling: scheme '") + sampling_name(scheme.variant) +
                        "' is unsatisfiable for this batch");

    const std::size_t num_negative = num_positive * static_cast<std::size_t>(scheme.negatives_per_positive);
    for (std::size_t n = 0; n < num_negative; ++n) {
        const int a = eligible[rng.uniform_int(eligible.size())];
        auto it = partners.find(a);
        if (it == partners.end()) {
            std::vector<int> list;
            for (int p = 0; p < b; ++p)
                if (partner_ok(scheme.variant, identity[a], domain[a], identity[p], domain[p]))
                    list.push_back(p);
            it = partners.emplace(a, std::move(list)).first;
        }
        const int p = it->second[rng.uniform_int(it->second.size())];
        out.push_back(make_pair_feature(a, p, 0));
    }
    return out;
}

std::map<int, std::vector<double>> identity_centroids(const Matrix& embeddings,
                                                      const std::vector<int>& identity) {
    if (embeddings.rows == 0) throw DataError("identity_centroids: empty batch");
    std::map<int, std::vector<double>> out;
    std::map<int, int> counts;
    for (int r = 0; r < embeddings.rows; ++r) {
        auto& acc = out[identity[r]];
        if (acc.empty()) acc.assign(embeddings.cols, 0.0);
        const auto row = embeddings.row(r);
        for (int c = 0; c < embeddings.cols; ++c) acc[c] += row[c];
        ++counts[identity[r]];
    }
    for (auto& [id, acc] : out) {
        const double inv = 1.0 / counts[id];
        for (auto& v : acc) v *= inv;
    }
    return out;
}

PicVariants pic_pair_variants(const Matrix& embeddings, const std::vector<int>& identity,
                              RngStream& rng) {
    const int b = embeddings.rows;
    if (static_cast<int>(identity.size()) != b)
        throw DataError("pic_pair_variants: label array must match the batch size");

    PicVariants pv;
    pv.identity_rows = rows_by_identity(identity);
    if (pv.identity_rows.size() < 2)
        throw DataError("pic sampling: batch must contain >= 2 identities");
    bool any_pair = false;
    for (const auto& [id, rows] : pv.identity_rows) any_pair |= rows.size() >= 2;
    if (!any_pair) throw DataError("pic sampling: no identity has >= 2 samples in the batch");

    pv.centroids = identity_centroids(embeddings, identity);

    std::map<int, std::vector<int>> complements;  // rows with a different identity
    auto complement = [&](int id) -> const std::vector<int>& {
        auto it = complements.find(id);
        if (it == complements.end()) {
            std::vector<int> rows;
            for (int r = 0; r < b; ++r)
                if (identity[r] != id) rows.push_back(r);
            it = complements.emplace(id, std::move(rows)).first;
        }
        return it->second;
    };

    auto sq = [](std::span<const double> u, std::span<const double> w) {
        return pair_feature(u, w, PairOp::SquaredDiff);
    };

    for (int p = 0; p < b; ++p) {
        const auto& same = pv.identity_rows[identity[p]];
        if (same.size() < 2) continue;

        // Positive partner: uniform among same-identity rows other than p.
        int pick = static_cast<int>(rng.uniform_int(same.size() - 1));
        int p_pos = -1;
        for (int r : same) {
            if (r == p) continue;
            if (pick-- == 0) {
                p_pos = r;
                break;
            }
        }
        const auto& others = complement(identity[p]);
        const int q = others[rng.uniform_int(others.size())];

        const auto& cen_p = pv.centroids[identity[p]];
        const auto& cen_q = pv.centroids[identity[q]];
        PicAnchor anchor;
        anchor.p = p;
        anchor.p_pos = p_pos;
        anchor.q = q;
        anchor.id_p = identity[p];
        anchor.id_q = identity[q];
        anchor.positive = {sq(embeddings.row(p), embeddings.row(p_pos)),
                           sq(embeddings.row(p), cen_p), sq(cen_p, embeddings.row(p_pos))};
        anchor.negative = {sq(embeddings.row(p), embeddings.row(q)), sq(embeddings.row(p), cen_q),
                           sq(cen_p, embeddings.row(q)), sq(cen_p, cen_q)};
        pv.anchors.push_back(std::move(anchor));
    }
    return pv;
}

namespace {

// One endpoint of a squared-difference variant: either a batch row or an
// identity centroid.
struct Endpoint {
    bool is_centroid;
    int index;  // row or identity label
};

void scatter_sq_grad(const Matrix& embeddings, const PicVariants& pv, Endpoint u, Endpoint w,
                     std::span<const double> grad, Matrix& d_embeddings) {
    const int d = embeddings.cols;
    auto values = [&](Endpoint e) -> std::span<const double> {
        if (e.is_centroid) return pv.centroids.at(e.index);
        return embeddings.row(e.index);
    };
    const auto uv = values(u);
    const auto wv = values(w);
    std::vector<double> g(d);
    for (int c = 0; c < d; ++c) g[c] = 2.0 * (uv[c] - wv[c]) * grad[c];

    auto add_to = [&](Endpoint e, double sign) {
        if (!e.is_centroid) {
            auto row = d_embeddings.row(e.index);
            for (int c = 0; c < d; ++c) row[c] += sign * g[c];
        } else {
            const auto& rows = pv.identity_rows.at(e.index);
            const double inv = sign / static_cast<double>(rows.size());
            for (int r : rows) {
                auto row = d_embeddings.row(r);
                for (int c = 0; c < d; ++c) row[c] += inv * g[c];
            }
        }
    };
    add_to(u, 1.0);
    add_to(w, -1.0);
}

}  // namespace

void pic_variants_backward(const Matrix& embeddings, const PicVariants& variants,
                           const std::vector<std::array<std::vector<double>, 3>>& pos_grads,
                           const std::vector<std::array<std::vector<double>, 4>>& neg_grads,
                           Matrix& d_embeddings) {
    assert(pos_grads.size() == variants.anchors.size());
    assert(neg_grads.size() == variants.anchors.size());
    assert(d_embeddings.same_shape(embeddings));
    for (std::size_t a = 0; a < variants.anchors.size(); ++a) {
        const auto& anchor = variants.anchors[a];
        const Endpoint row_p{false, anchor.p};
        const Endpoint row_pp{false, anchor.p_pos};
        const Endpoint row_q{false, anchor.q};
        const Endpoint cen_p{true, anchor.id_p};
        const Endpoint cen_q{true, anchor.id_q};

        scatter_sq_grad(embeddings, variants, row_p, row_pp, pos_grads[a][0], d_embeddings);
        scatter_sq_grad(embeddings, variants, row_p, cen_p, pos_grads[a][1], d_embeddings);
        scatter_sq_grad(embeddings, variants, cen_p, row_pp, pos_grads[a][2], d_embeddings);

        scatter_sq_grad(embeddings, variants, row_p, row_q, neg_grads[a][0], d_embeddings);
        scatter_sq_grad(embeddings, variants, row_p, cen_q, neg_grads[a][1], d_embeddings);
        scatter_sq_grad(embeddings, variants, cen_p, row_q, neg_grads[a][2], d_embeddings);
        scatter_sq_grad(embeddings, variants, cen_p, cen_q, neg_grads[a][3], d_embeddings);
    }
}

}  // namespace gmn
