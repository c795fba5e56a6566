// Test-only reference implementations, independent of the library's kernels:
// scalar-loop forwards, finite differences, brute-force retrieval metrics,
// exhaustive triplet mining.
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "gmn/matrix.hpp"
#include "gmn/model.hpp"

namespace oracle {

// y = W x + b, one row at a time.
inline std::vector<double> scalar_dense(const gmn::Matrix& weight, const std::vector<double>& bias,
                                        const std::vector<double>& x) {
    std::vector<double> y(weight.rows);
    for (int o = 0; o < weight.rows; ++o) {
        double acc = bias[o];
        for (int c = 0; c < weight.cols; ++c) acc += weight(o, c) * x[c];
        y[o] = acc;
    }
    return y;
}

inline std::vector<double> relu(std::vector<double> v) {
    for (auto& x : v) x = x > 0.0 ? x : 0.0;
    return v;
}

// Encoder forward for one sample, optional per-sample dropout mask applied at
// the configured site.
inline std::vector<double> scalar_encoder_embedding(const gmn::EncoderParams& params,
                                                    const std::vector<double>& x,
                                                    const std::vector<double>* mask = nullptr) {
    std::vector<double> h = x;
    const int layers = static_cast<int>(params.layers.size());
    for (int l = 0; l < layers; ++l) {
        h = scalar_dense(params.layers[l].weight, params.layers[l].bias, h);
        if (l + 1 < layers) h = relu(h);
        if (mask && l == params.dp_site)
            for (std::size_t c = 0; c < h.size(); ++c) h[c] *= (*mask)[c];
    }
    return h;
}

inline std::array<double, 2> scalar_mnet_logits(const gmn::MetricNetParams& params,
                                                const std::vector<double>& f) {
    const auto hidden = relu(scalar_dense(params.layer1.weight, params.layer1.bias, f));
    const auto z = scalar_dense(params.layer2.weight, params.layer2.bias, hidden);
    return {z[0], z[1]};
}

inline long double sigmoid_long(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

// Central finite differences over every parameter of the model.
struct FdCheckResult {
    double max_rel_err = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
};

inline FdCheckResult finite_difference_check(gmn::ModelParams& model,
                                             const gmn::ModelGrads& analytic,
                                             const std::function<double()>& loss_fn,
                                             double step = 1e-5, double abs_floor = 1e-7) {
    FdCheckResult result;
    auto params = gmn::param_spans(model);
    auto grads = gmn::param_spans(const_cast<gmn::ModelGrads&>(analytic));
    for (std::size_t s = 0; s < params.size(); ++s) {
        for (std::size_t i = 0; i < params[s].size(); ++i) {
            const double saved = params[s][i];
            params[s][i] = saved + step;
            const double up = loss_fn();
            params[s][i] = saved - step;
            const double down = loss_fn();
            params[s][i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = grads[s][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
            const double rel = std::abs(a - numeric) / denom;
            if (std::abs(a) < abs_floor && std::abs(numeric) < abs_floor) continue;
            ++result.checked;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst_analytic = a;
                result.worst_numeric = numeric;
            }
        }
    }
    return result;
}

// Retrieval metrics by counting instead of sorting: a gallery entry ranks
// ahead of another when its similarity is larger, or equal with a smaller
// index.
struct BruteMetrics {
    double mAP = 0.0;
    std::map<int, double> cmc;
    int valid = 0;
    int skipped = 0;
};

inline BruteMetrics brute_force_metrics(const gmn::Matrix& sim, const std::vector<int>& pid,
                                        const std::vector<int>& pcam, const std::vector<int>& gid,
                                        const std::vector<int>& gcam,
                                        const std::vector<int>& ranks, bool cross_camera) {
    BruteMetrics out;
    for (int r : ranks) out.cmc[r] = 0.0;
    for (int i = 0; i < sim.rows; ++i) {
        std::vector<int> keep;
        for (int j = 0; j < sim.cols; ++j) {
            if (cross_camera && gid[j] == pid[i] && gcam[j] == pcam[i]) continue;
            keep.push_back(j);
        }
        int num_pos = 0;
        for (int j : keep) num_pos += gid[j] == pid[i] ? 1 : 0;
        if (num_pos == 0) {
            ++out.skipped;
            continue;
        }
        ++out.valid;
        double ap = 0.0;
        int best_rank = sim.cols + 1;
        for (int j : keep) {
            if (gid[j] != pid[i]) continue;
            int rank = 1, pos_at_or_before = 0;
            for (int k : keep) {
                const bool ahead =
                    sim(i, k) > sim(i, j) || (sim(i, k) == sim(i, j) && k < j);
                if (ahead && k != j) ++rank;
                if ((ahead || k == j) && gid[k] == pid[i]) ++pos_at_or_before;
            }
            ap += static_cast<double>(pos_at_or_before) / rank;
            if (rank < best_rank) best_rank = rank;
        }
        out.mAP += ap / num_pos;
        for (int r : ranks)
            if (best_rank <= r) out.cmc[r] += 1.0;
    }
    if (out.valid > 0) {
        out.mAP /= out.valid;
        for (auto& [r, v] : out.cmc) v /= out.valid;
    }
    return out;
}

// Batch-hard triplet by full enumeration of positives and negatives.
inline double brute_force_batch_hard(const gmn::Matrix& emb, const std::vector<int>& ids,
                                     double margin) {
    auto dist = [&](int a, int b) {
        double acc = 0.0;
        for (int c = 0; c < emb.cols; ++c) {
            const double diff = emb(a, c) - emb(b, c);
            acc += diff * diff;
        }
        return std::sqrt(acc);
    };
    double total = 0.0;
    for (int a = 0; a < emb.rows; ++a) {
        double hardest_pos = -1.0, hardest_neg = 1e300;
        for (int b = 0; b < emb.rows; ++b) {
            if (b == a) continue;
            const double d = dist(a, b);
            if (ids[b] == ids[a])
                hardest_pos = std::max(hardest_pos, d);
            else
                hardest_neg = std::min(hardest_neg, d);
        }
        total += std::max(0.0, margin + hardest_pos - hardest_neg);
    }
    return total / emb.rows;
}

}  // namespace oracle
