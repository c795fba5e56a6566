#include "gmn/encoder.hpp"

#include <cassert>
#include <cmath>
#include <string>

#include "gmn/kernels.hpp"

namespace gmn {

void EncoderParams::validate() const {
    if (layers.empty()) throw ConfigError("encoder: needs at least one layer");
    for (std::size_t l = 1; l < layers.size(); ++l) {
        if (layers[l].in_dim() != layers[l - 1].out_dim())
            throw ConfigError("encoder: layer " + std::to_string(l) + " input dim " +
                              std::to_string(layers[l].in_dim()) + " != previous output dim " +
                              std::to_string(layers[l - 1].out_dim()));
    }
    if (dp_site < 0 || dp_site >= static_cast<int>(layers.size()))
        throw ConfigError("encoder: dp_site " + std::to_string(dp_site) + " out of range [0, " +
                          std::to_string(layers.size()) + ")");
    if (classifier.in_dim() != embedding_dim())
        throw ConfigError("encoder: classifier input dim must equal the embedding dim");
}

void DpConfig::validate() const {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
}

std::vector<double> dp_mask(int channels, const DpConfig& dp, RngStream& rng) {
    if (channels < 1) throw ConfigError("dp_mask: channels must be >= 1");
    dp.validate();
    const double keep_value = dp.inverted_scaling ? 1.0 / (1.0 - dp.rate) : 1.0;
    std::vector<double> mask(channels, keep_value);
    const int drop = static_cast<int>(std::floor(dp.rate * channels));
    if (drop > 0) {
        const auto dropped = rng.sample_without_replacement(static_cast<std::size_t>(channels),
                                                            static_cast<std::size_t>(drop));
        for (auto c : dropped) mask[c] = 0.0;
    }
    return mask;
}

Matrix dp_masks(int batch, int channels, const DpConfig& dp, RngStream& rng) {
    Matrix m(batch, channels);
    for (int r = 0; r < batch; ++r) {
        const auto mask = dp_mask(channels, dp, rng);
        std::copy(mask.begin(), mask.end(), m.data.begin() + static_cast<std::ptrdiff_t>(r) * channels);
    }
    return m;
}

EncoderForward encoder_forward(const EncoderParams& params, const DpConfig& dp, const Matrix& inputs,
                               bool training, RngStream* dp_rng, const Matrix* frozen_masks) {
    params.validate();
    if (inputs.cols != params.input_dim())
        throw DataError("encoder_forward: input dim " + std::to_string(inputs.cols) +
                        " != encoder input dim " + std::to_string(params.input_dim()));

    const bool use_dp = training && dp.applies();
    const int num_layers = static_cast<int>(params.layers.size());

    EncoderForward fwd;
    fwd.cache.input = inputs;
    fwd.cache.pre.resize(num_layers);
    fwd.cache.post.resize(num_layers);

    const Matrix* current = &inputs;
    for (int l = 0; l < num_layers; ++l) {
        kernels::dense_forward(*current, params.layers[l].weight, params.layers[l].bias,
                               fwd.cache.pre[l]);
        Matrix& act = fwd.cache.post[l];
        act = fwd.cache.pre[l];
        if (l + 1 < num_layers) {
            for (auto& v : act.data) v = v > 0.0 ? v : 0.0;
        }
        if (use_dp && l == params.dp_site) {
            const int channels = act.cols;
            if (frozen_masks) {
                if (frozen_masks->rows != act.rows || frozen_masks->cols != channels)
                    throw DataError("encoder_forward: frozen dropout mask shape mismatch");
                fwd.cache.dp_mask = *frozen_masks;
            } else {
                if (!dp_rng) throw Error("encoder_forward: dropout active but no RNG supplied");
                fwd.cache.dp_mask = dp_masks(act.rows, channels, dp, *dp_rng);
            }
            for (int r = 0; r < act.rows; ++r) {
                auto row = act.row(r);
                const auto mask = fwd.cache.dp_mask.row(r);
                for (int c = 0; c < channels; ++c) row[c] *= mask[c];
            }
        }
        current = &act;
    }

    fwd.embeddings = fwd.cache.post.back();
    kernels::dense_forward(fwd.embeddings, params.classifier.weight, params.classifier.bias,
                           fwd.logits);
    return fwd;
}

EncoderBackward encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                                 const Matrix& d_embeddings, const Matrix& d_logits) {
    const int num_layers = static_cast<int>(params.layers.size());
    if (static_cast<int>(cache.pre.size()) != num_layers || cache.post.empty())
        throw DataError("encoder_backward: cache does not match the encoder");

    EncoderBackward bwd;
    bwd.grads.layers.reserve(num_layers);
    for (const auto& layer : params.layers)
        bwd.grads.layers.emplace_back(layer.out_dim(), layer.in_dim());
    bwd.grads.classifier = DenseLayer(params.classifier.out_dim(), params.classifier.in_dim());

    // Classifier head, then fold its input gradient into the embedding path.
    Matrix g = d_embeddings;
    if (!d_logits.empty()) {
        kernels::dense_backward_params(cache.post.back(), d_logits, bwd.grads.classifier.weight,
                                       bwd.grads.classifier.bias);
        Matrix d_emb_cls;
        kernels::dense_backward_inputs(d_logits, params.classifier.weight, d_emb_cls);
        if (g.empty())
            g = std::move(d_emb_cls);
        else
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += d_emb_cls.data[i];
    }
    if (g.empty()) g = Matrix(cache.input.rows, params.embedding_dim());

    for (int l = num_layers - 1; l >= 0; --l) {
        if (!cache.dp_mask.empty() && l == params.dp_site) {
            for (int r = 0; r < g.rows; ++r) {
                auto row = g.row(r);
                const auto mask = cache.dp_mask.row(r);
                for (int c = 0; c < g.cols; ++c) row[c] *= mask[c];
            }
        }
        if (l + 1 < num_layers) {
            const Matrix& pre = cache.pre[l];
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (pre.data[i] <= 0.0) g.data[i] = 0.0;
        }
        const Matrix& layer_input = l == 0 ? cache.input : cache.post[l - 1];
        kernels::dense_backward_params(layer_input, g, bwd.grads.layers[l].weight,
                                       bwd.grads.layers[l].bias);
        Matrix d_in;
        kernels::dense_backward_inputs(g, params.layers[l].weight, d_in);
        g = std::move(d_in);
    }
    bwd.d_input = std::move(g);
    return bwd;
}

namespace {

DenseLayer he_dense(int out, int in, RngStream& rng) {
    DenseLayer layer(out, in);
    const double sigma = std::sqrt(2.0 / static_cast<double>(in));
    for (auto& v : layer.weight.data) v = rng.normal(0.0, sigma);
    return layer;
}

}  // namespace

EncoderParams make_encoder(int d_in, const std::vector<int>& dims, int dp_site, int num_classes,
                           RngStream& rng) {
    if (d_in < 1) throw ConfigError("encoder: d_in must be >= 1");
    if (dims.empty()) throw ConfigError("encoder: dims must name at least one layer width");
    EncoderParams params;
    int in = d_in;
    for (int out : dims) {
        if (out < 1) throw ConfigError("encoder: layer widths must be >= 1");
        params.layers.push_back(he_dense(out, in, rng));
        in = out;
    }
    params.dp_site = dp_site;
    params.classifier = he_dense(num_classes, in, rng);
    params.validate();
    return params;
}

std::size_t encoder_param_count(const EncoderParams& params) {
    std::size_t n = 0;
    for (const auto& layer : params.layers) n += layer.weight.data.size() + layer.bias.size();
    n += params.classifier.weight.data.size() + params.classifier.bias.size();
    return n;
}

}  // namespace gmn
