#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "gmn/errors.hpp"
#include "gmn/matrix.hpp"
#include "gmn/rng.hpp"

namespace gmn {

// How two instance embeddings combine into one sample-pair feature.
enum class PairOp { SquaredDiff, Abs, Mul, Add };

enum class NegativeSampling { Random, InterDomain, IntraDomain };

struct PairSamplingScheme {
    NegativeSampling variant = NegativeSampling::Random;
    int negatives_per_positive = 1;
};

struct PairFeature {
    std::vector<double> vector;
    int label = 0;  // 1 = same identity
    std::pair<int, int> pair_identity;
    std::pair<std::int64_t, std::int64_t> source_ids;
    std::pair<int, int> source_rows;  // row indices into the originating batch
};

std::vector<double> pair_feature(std::span<const double> x, std::span<const double> y, PairOp op);

// Chain rule through pair_feature: accumulates into dx and dy.
void pair_feature_backward(std::span<const double> x, std::span<const double> y, PairOp op,
                           std::span<const double> d_out, std::span<double> dx, std::span<double> dy);

// Emits every distinct unordered same-identity pair in the batch, plus
// negatives_per_positive sampled negatives per positive. Negative anchors and
// partners are drawn uniformly among rows admissible under the scheme.
std::vector<PairFeature> sample_pairs(const Matrix& embeddings, const std::vector<int>& identity,
                                      const std::vector<int>& domain,
                                      const std::vector<std::int64_t>& sample_ids,
                                      const PairSamplingScheme& scheme, PairOp op, RngStream& rng);

// Batch-local arithmetic mean per identity.
std::map<int, std::vector<double>> identity_centroids(const Matrix& embeddings,
                                                      const std::vector<int>& identity);

// Pair-identity variant sets for the consistency loss. One anchor per batch
// row that has a same-identity partner; for each anchor, a positive partner
// and a negative row are drawn and the squared-difference variants are built
// against the batch centroids:
//   positive: (p - p+)^2, (p - cen_p)^2, (cen_p - p+)^2
//   negative: (p - q)^2, (p - cen_q)^2, (cen_p - q)^2, (cen_p - cen_q)^2
struct PicAnchor {
    int p = 0;
    int p_pos = 0;
    int q = 0;
    int id_p = 0;
    int id_q = 0;
    std::array<std::vector<double>, 3> positive;
    std::array<std::vector<double>, 4> negative;
};

struct PicVariants {
    std::vector<PicAnchor> anchors;
    std::map<int, std::vector<double>> centroids;
    std::map<int, std::vector<int>> identity_rows;
};

PicVariants pic_pair_variants(const Matrix& embeddings, const std::vector<int>& identity,
                              RngStream& rng);

// Scatters gradients w.r.t. the variant vectors back onto embedding rows
// (centroid terms spread over the identity's rows).
void pic_variants_backward(const Matrix& embeddings, const PicVariants& variants,
                           const std::vector<std::array<std::vector<double>, 3>>& pos_grads,
                           const std::vector<std::array<std::vector<double>, 4>>& neg_grads,
                           Matrix& d_embeddings);

const char* pair_op_name(PairOp op);
const char* sampling_name(NegativeSampling v);

}  // namespace gmn
