#include "gmn/metric_net.hpp"

#include <cmath>
#include <string>

#include "gmn/kernels.hpp"

namespace gmn {

void MetricNetParams::validate() const {
    if (layer1.out_dim() != layer2.in_dim())
        throw ConfigError("metric net: hidden widths of the two layers disagree");
    if (layer2.out_dim() != 2) throw ConfigError("metric net: output layer must have exactly 2 logits");
}

int default_hidden_width(int d) {
    const int h = static_cast<int>(std::lround(d / 4.0));
    return h < 1 ? 1 : h;
}

MetricNetParams make_metric_net(int d, int hidden, RngStream& rng) {
    if (d < 1) throw ConfigError("metric net: pair feature dim must be >= 1");
    if (hidden < 1) throw ConfigError("metric net: hidden width must be >= 1");
    MetricNetParams params;
    params.layer1 = DenseLayer(hidden, d);
    params.layer2 = DenseLayer(2, hidden);
    const double s1 = std::sqrt(2.0 / static_cast<double>(d));
    const double s2 = std::sqrt(2.0 / static_cast<double>(hidden));
    for (auto& v : params.layer1.weight.data) v = rng.normal(0.0, s1);
    for (auto& v : params.layer2.weight.data) v = rng.normal(0.0, s2);
    return params;
}

std::size_t mnet_param_count(const MetricNetParams& params) {
    return params.layer1.weight.data.size() + params.layer1.bias.size() +
           params.layer2.weight.data.size() + params.layer2.bias.size();
}

MnetForward mnet_forward(const MetricNetParams& params, const Matrix& pair_features) {
    params.validate();
    if (pair_features.cols != params.input_dim())
        throw DataError("mnet_forward: pair feature dim " + std::to_string(pair_features.cols) +
                        " != metric net input dim " + std::to_string(params.input_dim()));
    MnetForward fwd;
    fwd.cache.input = pair_features;
    kernels::dense_forward(pair_features, params.layer1.weight, params.layer1.bias, fwd.cache.pre1);
    fwd.cache.post1 = fwd.cache.pre1;
    for (auto& v : fwd.cache.post1.data) v = v > 0.0 ? v : 0.0;
    kernels::dense_forward(fwd.cache.post1, params.layer2.weight, params.layer2.bias, fwd.logits);
    return fwd;
}

MnetBackward mnet_backward(const MetricNetParams& params, const MnetCache& cache,
                           const Matrix& d_logits) {
    if (cache.input.empty() || d_logits.rows != cache.input.rows)
        throw DataError("mnet_backward: cache does not match the upstream gradient");
    MnetBackward bwd;
    bwd.grads.layer1 = DenseLayer(params.layer1.out_dim(), params.layer1.in_dim());
    bwd.grads.layer2 = DenseLayer(params.layer2.out_dim(), params.layer2.in_dim());

    kernels::dense_backward_params(cache.post1, d_logits, bwd.grads.layer2.weight,
                                   bwd.grads.layer2.bias);
    Matrix g;
    kernels::dense_backward_inputs(d_logits, params.layer2.weight, g);
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (cache.pre1.data[i] <= 0.0) g.data[i] = 0.0;
    kernels::dense_backward_params(cache.input, g, bwd.grads.layer1.weight, bwd.grads.layer1.bias);
    kernels::dense_backward_inputs(g, params.layer1.weight, bwd.d_input);
    return bwd;
}

double similarity(double logit_diff, double logit_same) {
    if (!std::isfinite(logit_diff) || !std::isfinite(logit_same))
        throw NumericError("similarity: non-finite logits");
    const double m = logit_diff > logit_same ? logit_diff : logit_same;
    const double e_same = std::exp(logit_same - m);
    const double e_diff = std::exp(logit_diff - m);
    return e_same / (e_same + e_diff);
}

namespace {

// Scalar forward for one pair feature; shared by the tiled and the serial
// similarity paths so both produce identical floating-point results.
inline double pair_similarity(const MetricNetParams& params, const double* f,
                              std::vector<double>& hidden_scratch) {
    const int d = params.input_dim();
    const int h = params.hidden_dim();
    for (int o = 0; o < h; ++o) {
        const double* wr = params.layer1.weight.data.data() + static_cast<std::size_t>(o) * d;
        double acc = params.layer1.bias[o];
        for (int c = 0; c < d; ++c) acc += wr[c] * f[c];
        hidden_scratch[o] = acc > 0.0 ? acc : 0.0;
    }
    double z[2];
    for (int o = 0; o < 2; ++o) {
        const double* wr = params.layer2.weight.data.data() + static_cast<std::size_t>(o) * h;
        double acc = params.layer2.bias[o];
        for (int c = 0; c < h; ++c) acc += wr[c] * hidden_scratch[c];
        z[o] = acc;
    }
    return similarity(z[0], z[1]);
}

inline void build_pair_feature(const double* x, const double* y, int d, PairOp op, double* out) {
    switch (op) {
        case PairOp::SquaredDiff:
            for (int c = 0; c < d; ++c) {
                const double diff = x[c] - y[c];
                out[c] = diff * diff;
            }
            break;
        case PairOp::Abs:
            for (int c = 0; c < d; ++c) out[c] = std::abs(x[c] - y[c]);
            break;
        case PairOp::Mul:
            for (int c = 0; c < d; ++c) out[c] = x[c] * y[c];
            break;
        case PairOp::Add:
            for (int c = 0; c < d; ++c) out[c] = x[c] + y[c];
            break;
    }
}

}  // namespace

Matrix similarity_matrix(const MetricNetParams& params, const Matrix& probe, const Matrix& gallery,
                         PairOp op, int tile_size) {
    params.validate();
    if (probe.cols != gallery.cols)
        throw DataError("similarity_matrix: probe and gallery dims disagree");
    if (probe.cols != params.input_dim())
        throw DataError("similarity_matrix: embedding dim != metric net input dim");
    if (tile_size < 1) throw ConfigError("similarity_matrix: tile_size must be >= 1");

    const int d = probe.cols;
    Matrix s(probe.rows, gallery.rows);
    for (int j0 = 0; j0 < gallery.rows; j0 += tile_size) {
        const int jn = std::min(tile_size, gallery.rows - j0);
#pragma omp parallel
        {
            std::vector<double> feature(d);
            std::vector<double> hidden(params.hidden_dim());
#pragma omp for schedule(static)
            for (int i = 0; i < probe.rows; ++i) {
                const double* xi = probe.data.data() + static_cast<std::size_t>(i) * d;
                for (int t = 0; t < jn; ++t) {
                    const int j = j0 + t;
                    const double* yj = gallery.data.data() + static_cast<std::size_t>(j) * d;
                    build_pair_feature(xi, yj, d, op, feature.data());
                    s(i, j) = pair_similarity(params, feature.data(), hidden);
                }
            }
        }
    }
    return s;
}

Matrix similarity_matrix_serial(const MetricNetParams& params, const Matrix& probe,
                                const Matrix& gallery, PairOp op) {
    params.validate();
    if (probe.cols != gallery.cols)
        throw DataError("similarity_matrix: probe and gallery dims disagree");
    const int d = probe.cols;
    Matrix s(probe.rows, gallery.rows);
    std::vector<double> feature(d);
    std::vector<double> hidden(params.hidden_dim());
    for (int i = 0; i < probe.rows; ++i) {
        const double* xi = probe.data.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < gallery.rows; ++j) {
            const double* yj = gallery.data.data() + static_cast<std::size_t>(j) * d;
            build_pair_feature(xi, yj, d, op, feature.data());
            s(i, j) = pair_similarity(params, feature.data(), hidden);
        }
    }
    return s;
}

}  // namespace gmn
