#pragma once

#include <vector>

#include "gmn/errors.hpp"
#include "gmn/matrix.hpp"
#include "gmn/rng.hpp"

namespace gmn {

struct DenseLayer {
    Matrix weight;  // out x in, row-major
    std::vector<double> bias;

    DenseLayer() = default;
    DenseLayer(int out, int in) : weight(out, in), bias(out, 0.0) {}
    int in_dim() const { return weight.cols; }
    int out_dim() const { return weight.rows; }
};

// Trunk encoder: stacked dense layers with a rectifier after every layer
// except the last, a channel-dropout site, and an identity-classifier head.
struct EncoderParams {
    std::vector<DenseLayer> layers;
    int dp_site = 0;  // dropout applies to the output of layers[dp_site]
    DenseLayer classifier;

    int input_dim() const { return layers.front().in_dim(); }
    int embedding_dim() const { return layers.back().out_dim(); }
    int num_classes() const { return classifier.out_dim(); }
    void validate() const;
};

enum class DpMode { ExactFraction };

struct DpConfig {
    double rate = 0.5;  // fraction of channels dropped, in [0, 1)
    bool active = false;
    DpMode mode = DpMode::ExactFraction;
    bool inverted_scaling = true;

    bool applies() const { return active && rate > 0.0; }
    void validate() const;
};

// One mask: exactly floor(rate * channels) zeros chosen uniformly without
// replacement; survivors are 1/(1-rate) under inverted scaling, else 1.
std::vector<double> dp_mask(int channels, const DpConfig& dp, RngStream& rng);

// Per-sample masks, one row per batch row.
Matrix dp_masks(int batch, int channels, const DpConfig& dp, RngStream& rng);

struct EncoderCache {
    Matrix input;
    std::vector<Matrix> pre;   // linear outputs per layer
    std::vector<Matrix> post;  // after rectifier (and dropout at dp_site)
    Matrix dp_mask;            // empty when dropout was not applied
};

struct EncoderForward {
    Matrix embeddings;
    Matrix logits;
    EncoderCache cache;
};

// Dropout applies only when training && dp.applies(); the masks are either
// frozen_masks (tests, checkpoint replay) or drawn from dp_rng.
EncoderForward encoder_forward(const EncoderParams& params, const DpConfig& dp, const Matrix& inputs,
                               bool training, RngStream* dp_rng = nullptr,
                               const Matrix* frozen_masks = nullptr);

struct EncoderGrads {
    std::vector<DenseLayer> layers;  // same shapes as the parameters
    DenseLayer classifier;
};

struct EncoderBackward {
    EncoderGrads grads;
    Matrix d_input;
};

// Exact reverse pass of encoder_forward; the dropout mask is replayed from
// the cache as a constant.
EncoderBackward encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                                 const Matrix& d_embeddings, const Matrix& d_logits);

// He-normal weights, zero biases. dims = hidden widths plus the embedding
// width, e.g. {64, 32} builds d_in -> 64 -> 32.
EncoderParams make_encoder(int d_in, const std::vector<int>& dims, int dp_site, int num_classes,
                           RngStream& rng);

std::size_t encoder_param_count(const EncoderParams& params);

}  // namespace gmn
