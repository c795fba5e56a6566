#pragma once

#include <array>
#include <vector>

#include "gmn/errors.hpp"
#include "gmn/matrix.hpp"

namespace gmn {

struct LossBreakdown {
    double l_cls = 0.0;
    double l_tri = 0.0;
    double l_gmn = 0.0;
    double l_pic_pos = 0.0;
    double l_pic_neg = 0.0;
    double lambda = 1.0;
    double total = 0.0;
};

// total = l_cls + l_tri + l_gmn + lambda * (l_pic_pos + l_pic_neg).
// Throws NumericError naming the first non-finite component.
LossBreakdown total_loss(double l_cls, double l_tri, double l_gmn, double l_pic_pos,
                         double l_pic_neg, double lambda);

struct LossGrad {
    double value = 0.0;
    Matrix d_logits;
};

// Mean negative log-softmax of the true class; labels in {0, 1}, logits n x 2.
LossGrad gmn_loss(const Matrix& logits, const std::vector<int>& labels);

// Same computation over an arbitrary class count.
LossGrad cross_entropy(const Matrix& logits, const std::vector<int>& labels);

struct TripletResult {
    double value = 0.0;
    Matrix d_embeddings;
};

// Mean over anchors of max(0, margin + hardest-positive - hardest-negative),
// Euclidean distances. The hardest positive is the farthest same-identity row,
// the hardest negative the nearest other-identity row; ties resolve to the
// lowest row index. Subgradient 0 at ties and zero distances.
TripletResult triplet_loss_batch_hard(const Matrix& embeddings, const std::vector<int>& identity,
                                      double margin);

struct PicResult {
    double pos = 0.0;
    double neg = 0.0;
    std::vector<std::array<std::vector<double>, 3>> pos_grads;
    std::vector<std::array<std::vector<double>, 4>> neg_grads;
};

// Mean over anchors of the average Euclidean distance between variant vectors:
// unordered pairs, 3 for the positive triples and 6 for the negative
// quadruples, weighted 1/3 and 1/6 respectively.
PicResult pic_loss(const std::vector<std::array<std::vector<double>, 3>>& positives,
                   const std::vector<std::array<std::vector<double>, 4>>& negatives);

}  // namespace gmn
