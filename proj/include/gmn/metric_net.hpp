#pragma once

#include <utility>
#include <vector>

#include "gmn/encoder.hpp"
#include "gmn/matrix.hpp"
#include "gmn/pair_space.hpp"
#include "gmn/rng.hpp"

namespace gmn {

// Two dense layers with a rectifier, mapping a sample-pair feature to two
// logits. Logit index 0 scores "different identity", index 1 scores "same
// identity"; the convention is recorded in the checkpoint header.
struct MetricNetParams {
    DenseLayer layer1;  // d -> h
    DenseLayer layer2;  // h -> 2

    int input_dim() const { return layer1.in_dim(); }
    int hidden_dim() const { return layer1.out_dim(); }
    void validate() const;
};

int default_hidden_width(int d);  // round(d/4), at least 1

MetricNetParams make_metric_net(int d, int hidden, RngStream& rng);

std::size_t mnet_param_count(const MetricNetParams& params);

struct MnetCache {
    Matrix input;
    Matrix pre1;
    Matrix post1;
};

struct MnetForward {
    Matrix logits;  // n x 2
    MnetCache cache;
};

MnetForward mnet_forward(const MetricNetParams& params, const Matrix& pair_features);

struct MnetGrads {
    DenseLayer layer1;
    DenseLayer layer2;
};

struct MnetBackward {
    MnetGrads grads;
    Matrix d_input;
};

MnetBackward mnet_backward(const MetricNetParams& params, const MnetCache& cache,
                           const Matrix& d_logits);

// Softmax probability of the "same identity" logit, computed with
// max-subtraction so large logits cannot overflow.
double similarity(double logit_diff, double logit_same);

// S[i][j] = similarity of the (probe i, gallery j) pair feature. Gallery
// columns are processed in tiles of tile_size, so peak extra memory is
// O(tile_size * d) per thread; rows are computed in parallel.
Matrix similarity_matrix(const MetricNetParams& params, const Matrix& probe, const Matrix& gallery,
                         PairOp op, int tile_size);

// Reference implementation: one pair at a time, no tiling, no parallelism.
Matrix similarity_matrix_serial(const MetricNetParams& params, const Matrix& probe,
                                const Matrix& gallery, PairOp op);

}  // namespace gmn
