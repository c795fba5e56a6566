#include "gmn/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "gmn/kernels.hpp"

namespace gmn {

LossBreakdown total_loss(double l_cls, double l_tri, double l_gmn, double l_pic_pos,
                         double l_pic_neg, double lambda) {
    auto check = [](double v, const char* name) {
        if (!std::isfinite(v)) throw NumericError(std::string("total_loss: non-finite ") + name);
    };
    check(l_cls, "l_cls");
    check(l_tri, "l_tri");
    check(l_gmn, "l_gmn");
    check(l_pic_pos, "l_pic_pos");
    check(l_pic_neg, "l_pic_neg");
    check(lambda, "lambda");
    LossBreakdown out;
    out.l_cls = l_cls;
    out.l_tri = l_tri;
    out.l_gmn = l_gmn;
    out.l_pic_pos = l_pic_pos;
    out.l_pic_neg = l_pic_neg;
    out.lambda = lambda;
    out.total = l_cls + l_tri + l_gmn + lambda * (l_pic_pos + l_pic_neg);
    return out;
}

namespace {

// Mean negative log-softmax with gradient (softmax - onehot) / n.
LossGrad log_softmax_loss(const Matrix& logits, const std::vector<int>& labels, const char* what) {
    const int n = logits.rows;
    const int classes = logits.cols;
    if (static_cast<int>(labels.size()) != n)
        throw DataError(std::string(what) + ": label count does not match the logit rows");
    LossGrad out;
    out.d_logits = Matrix(n, classes);
    if (n == 0) return out;

    double acc = 0.0;
    const double inv_n = 1.0 / n;
    for (int r = 0; r < n; ++r) {
        const int label = labels[r];
        if (label < 0 || label >= classes)
            throw DataError(std::string(what) + ": label " + std::to_string(label) +
                            " out of range [0, " + std::to_string(classes) + ")");
        const auto row = logits.row(r);
        double m = -std::numeric_limits<double>::infinity();
        for (double v : row) m = v > m ? v : m;
        double sum = 0.0;
        for (double v : row) sum += std::exp(v - m);
        const double lse = m + std::log(sum);
        acc += lse - row[label];
        auto grad = out.d_logits.row(r);
        for (int c = 0; c < classes; ++c) grad[c] = std::exp(row[c] - lse) * inv_n;
        grad[label] -= inv_n;
    }
    out.value = acc * inv_n;
    return out;
}

}  // namespace

LossGrad gmn_loss(const Matrix& logits, const std::vector<int>& labels) {
    if (logits.cols != 2 && logits.rows > 0)
        throw DataError("gmn_loss: expects one [different, same] logit pair per row");
    return log_softmax_loss(logits, labels, "gmn_loss");
}

LossGrad cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    return log_softmax_loss(logits, labels, "cross_entropy");
}

TripletResult triplet_loss_batch_hard(const Matrix& embeddings, const std::vector<int>& identity,
                                      double margin) {
    const int n = embeddings.rows;
    if (static_cast<int>(identity.size()) != n)
        throw DataError("triplet loss: label count does not match the batch");

    Matrix sq;
    kernels::pairwise_sqdist(embeddings, embeddings, sq);

    TripletResult out;
    out.d_embeddings = Matrix(n, embeddings.cols);

    struct Pick {
        int pos = -1;
        int neg = -1;
        double d_pos = 0.0;
        double d_neg = 0.0;
    };
    std::vector<Pick> picks(n);
    for (int a = 0; a < n; ++a) {
        Pick pick;
        double best_pos = -1.0;
        double best_neg = std::numeric_limits<double>::infinity();
        for (int b = 0; b < n; ++b) {
            if (b == a) continue;
            const double dist = std::sqrt(sq(a, b));
            if (identity[b] == identity[a]) {
                if (dist > best_pos) {  // strict: ties keep the lowest index
                    best_pos = dist;
                    pick.pos = b;
                }
            } else if (dist < best_neg) {
                best_neg = dist;
                pick.neg = b;
            }
        }
        if (pick.pos < 0)
            throw DataError("triplet mining: anchor " + std::to_string(a) +
                            " has no positive in the batch");
        if (pick.neg < 0)
            throw DataError("triplet mining: anchor " + std::to_string(a) +
                            " has no negative in the batch");
        pick.d_pos = best_pos;
        pick.d_neg = best_neg;
        picks[a] = pick;
    }

    const double inv_n = 1.0 / n;
    double acc = 0.0;
    for (int a = 0; a < n; ++a) {
        const auto& pick = picks[a];
        const double hinge = margin + pick.d_pos - pick.d_neg;
        if (hinge <= 0.0) continue;
        acc += hinge;

        auto add_dist_grad = [&](int other, double dist, double scale) {
            if (dist <= 0.0) return;  // subgradient 0 at coincident points
            const double k = scale * inv_n / dist;
            auto ga = out.d_embeddings.row(a);
            auto gb = out.d_embeddings.row(other);
            const auto ea = embeddings.row(a);
            const auto eb = embeddings.row(other);
            for (int c = 0; c < embeddings.cols; ++c) {
                const double diff = ea[c] - eb[c];
                ga[c] += k * diff;
                gb[c] -= k * diff;
            }
        };
        add_dist_grad(pick.pos, pick.d_pos, +1.0);
        add_dist_grad(pick.neg, pick.d_neg, -1.0);
    }
    out.value = acc * inv_n;
    return out;
}

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b, const char* what) {
    if (a.size() != b.size()) throw DataError(std::string(what) + ": variant dims disagree");
    double acc = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double diff = a[c] - b[c];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

// d||u - w|| contribution: +g into du, -g into dw, zero at coincident vectors.
void norm_grad(const std::vector<double>& u, const std::vector<double>& w, double dist,
               double scale, std::vector<double>& du, std::vector<double>& dw) {
    if (dist <= 0.0) return;
    const double k = scale / dist;
    for (std::size_t c = 0; c < u.size(); ++c) {
        const double g = k * (u[c] - w[c]);
        du[c] += g;
        dw[c] -= g;
    }
}

}  // namespace

PicResult pic_loss(const std::vector<std::array<std::vector<double>, 3>>& positives,
                   const std::vector<std::array<std::vector<double>, 4>>& negatives) {
    PicResult out;
    out.pos_grads.resize(positives.size());
    out.neg_grads.resize(negatives.size());

    if (!positives.empty()) {
        const double inv = 1.0 / (3.0 * positives.size());
        for (std::size_t a = 0; a < positives.size(); ++a) {
            const auto& v = positives[a];
            auto& g = out.pos_grads[a];
            for (int i = 0; i < 3; ++i) g[i].assign(v[i].size(), 0.0);
            for (int i = 0; i < 3; ++i) {
                for (int j = i + 1; j < 3; ++j) {
                    const double dist = euclidean(v[i], v[j], "pic_loss");
                    out.pos += inv * dist;
                    norm_grad(v[i], v[j], dist, inv, g[i], g[j]);
                }
            }
        }
    }
    if (!negatives.empty()) {
        const double inv = 1.0 / (6.0 * negatives.size());
        for (std::size_t a = 0; a < negatives.size(); ++a) {
            const auto& v = negatives[a];
            auto& g = out.neg_grads[a];
            for (int i = 0; i < 4; ++i) g[i].assign(v[i].size(), 0.0);
            for (int i = 0; i < 4; ++i) {
                for (int j = i + 1; j < 4; ++j) {
                    const double dist = euclidean(v[i], v[j], "pic_loss");
                    out.neg += inv * dist;
                    norm_grad(v[i], v[j], dist, inv, g[i], g[j]);
                }
            }
        }
    }
    return out;
}

}  // namespace gmn
