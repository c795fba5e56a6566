#include "gmn/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gmn/kernels.hpp"
#include "gmn/losses.hpp"

namespace gmn {

const char* protocol_name(EvalProtocol p) {
    switch (p) {
        case EvalProtocol::FeatureEuclidean: return "feature_euclidean";
        case EvalProtocol::FeatureCosine: return "feature_cosine";
        case EvalProtocol::MNet: return "mnet";
    }
    return "?";
}

void EvalConfig::validate(int gallery_size) const {
    if (tile_size < 1) throw ConfigError("eval config: tile_size must be >= 1");
    if (ranks.empty()) throw ConfigError("eval config: ranks must not be empty");
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        if (ranks[i] < 1) throw ConfigError("eval config: ranks must be >= 1");
        if (i > 0 && ranks[i] <= ranks[i - 1])
            throw ConfigError("eval config: ranks must be sorted strictly ascending");
    }
    if (gallery_size > 0 && ranks.back() > gallery_size)
        throw ConfigError("eval config: max rank " + std::to_string(ranks.back()) +
                          " exceeds gallery size " + std::to_string(gallery_size));
}

namespace {

struct ThreadPin {
#ifdef _OPENMP
    int saved;
    explicit ThreadPin(bool pin) : saved(omp_get_max_threads()) {
        if (pin) omp_set_num_threads(1);
    }
    ~ThreadPin() { omp_set_num_threads(saved); }
#else
    explicit ThreadPin(bool) {}
#endif
};

void l2_normalize_rows(Matrix& m) {
    for (int r = 0; r < m.rows; ++r) {
        auto row = m.row(r);
        double norm = 0.0;
        for (double v : row) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (auto& v : row) v /= norm;
    }
}

Matrix model_embeddings(const ModelParams& model, const Dataset& data, bool normalize) {
    const Matrix inputs = data.embedding_matrix();
    DpConfig dp;  // inactive at evaluation time
    dp.active = false;
    auto fwd = encoder_forward(model.encoder, dp, inputs, /*training=*/false);
    Matrix out = std::move(fwd.embeddings);
    if (normalize) l2_normalize_rows(out);
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix build_similarity(const ModelParams& model, const Matrix& probe, const Matrix& gallery,
                        const EvalConfig& config) {
    switch (config.protocol) {
        case EvalProtocol::FeatureEuclidean: {
            Matrix sq;
            kernels::pairwise_sqdist(probe, gallery, sq);
            for (auto& v : sq.data) v = -std::sqrt(v);
            return sq;
        }
        case EvalProtocol::FeatureCosine: {
            Matrix p = probe, g = gallery;
            l2_normalize_rows(p);
            l2_normalize_rows(g);
            Matrix s;
            kernels::matmul_nt(p, g, s);
            return s;
        }
        case EvalProtocol::MNet: {
            if (!model.mnet)
                throw ConfigError("evaluate: MNET protocol requested but the model has no metric net");
            return similarity_matrix(*model.mnet, probe, gallery, config.pair_op, config.tile_size);
        }
    }
    throw ConfigError("evaluate: unknown protocol");
}

}  // namespace

EvalReport evaluate_similarity(const Matrix& similarity, const std::vector<int>& probe_identity,
                               const std::vector<int>& probe_camera,
                               const std::vector<int>& gallery_identity,
                               const std::vector<int>& gallery_camera, const EvalConfig& config) {
    const int np = similarity.rows;
    const int ng = similarity.cols;
    if (static_cast<int>(probe_identity.size()) != np ||
        static_cast<int>(probe_camera.size()) != np ||
        static_cast<int>(gallery_identity.size()) != ng ||
        static_cast<int>(gallery_camera.size()) != ng)
        throw DataError("evaluate: label arrays do not match the similarity matrix");
    config.validate(ng);

    std::vector<double> ap(np, -1.0);       // -1 marks a skipped probe
    std::vector<int> first_rank(np, 0);

#pragma omp parallel
    {
        std::vector<int> order;
#pragma omp for schedule(static)
        for (int i = 0; i < np; ++i) {
            order.clear();
            for (int j = 0; j < ng; ++j) {
                if (config.cross_camera_filter && gallery_identity[j] == probe_identity[i] &&
                    gallery_camera[j] == probe_camera[i])
                    continue;
                order.push_back(j);
            }
            int num_pos = 0;
            for (int j : order) num_pos += gallery_identity[j] == probe_identity[i] ? 1 : 0;
            if (num_pos == 0) continue;  // skipped, ap stays -1

            // Descending similarity; ties keep gallery index order.
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return similarity(i, a) > similarity(i, b);
            });

            int found = 0;
            double precision_sum = 0.0;
            int first = 0;
            for (std::size_t k = 0; k < order.size(); ++k) {
                if (gallery_identity[order[k]] == probe_identity[i]) {
                    ++found;
                    precision_sum += static_cast<double>(found) / static_cast<double>(k + 1);
                    if (found == 1) first = static_cast<int>(k + 1);
                }
            }
            ap[i] = precision_sum / num_pos;
            first_rank[i] = first;
        }
    }

    EvalReport report;
    report.protocol = config.protocol;
    double map_sum = 0.0;
    std::map<int, int> cmc_hits;
    for (int r : config.ranks) cmc_hits[r] = 0;
    for (int i = 0; i < np; ++i) {
        if (ap[i] < 0.0) {
            ++report.num_skipped_probes;
            continue;
        }
        ++report.num_valid_probes;
        map_sum += ap[i];
        for (int r : config.ranks)
            if (first_rank[i] <= r) ++cmc_hits[r];
    }
    if (report.num_valid_probes == 0)
        throw DataError("evaluate: no probe has a reachable positive in the gallery");
    report.mAP = map_sum / report.num_valid_probes;
    for (int r : config.ranks)
        report.cmc[r] = static_cast<double>(cmc_hits[r]) / report.num_valid_probes;
    return report;
}

EvalReport evaluate(const Dataset& probe, const Dataset& gallery, const ModelParams& model,
                    const EvalConfig& config) {
    if (probe.records.empty() || gallery.records.empty())
        throw DataError("evaluate: probe and gallery must be non-empty");
    if (probe.d_in != gallery.d_in) throw DataError("evaluate: probe and gallery dims disagree");

    const Matrix pe = model_embeddings(model, probe, config.normalize_features);
    const Matrix ge = model_embeddings(model, gallery, config.normalize_features);

    const auto t0 = std::chrono::steady_clock::now();
    const Matrix s = build_similarity(model, pe, ge, config);
    const double sim_seconds = seconds_since(t0);

    const auto t1 = std::chrono::steady_clock::now();
    EvalReport report = evaluate_similarity(s, probe.identity_labels(), [&] {
        std::vector<int> cams(probe.records.size());
        for (std::size_t i = 0; i < probe.records.size(); ++i) cams[i] = probe.records[i].camera;
        return cams;
    }(), gallery.identity_labels(), [&] {
        std::vector<int> cams(gallery.records.size());
        for (std::size_t i = 0; i < gallery.records.size(); ++i) cams[i] = gallery.records[i].camera;
        return cams;
    }(), config);
    report.wall_seconds_ranking = seconds_since(t1);
    report.wall_seconds_similarity = sim_seconds;
    return report;
}

namespace {

// Full-batch softmax regression; returns held-out accuracy. Rows are split
// 50/50 per class after a seeded shuffle.
double linear_probe_heldout_accuracy(const Matrix& features, const std::vector<int>& labels,
                                     int classes, RngStream& rng, int iterations, double lr,
                                     double* train_accuracy_out = nullptr) {
    const int n = features.rows;
    std::map<int, std::vector<int>> by_label;
    for (int i = 0; i < n; ++i) by_label[labels[i]].push_back(i);

    std::vector<int> train_rows, test_rows;
    for (auto& [label, rows] : by_label) {
        rng.shuffle(rows);
        const std::size_t half = rows.size() / 2;
        for (std::size_t i = 0; i < rows.size(); ++i)
            (i < half ? train_rows : test_rows).push_back(rows[i]);
    }

    auto gather = [&](const std::vector<int>& rows, Matrix& x, std::vector<int>& y) {
        x = Matrix(static_cast<int>(rows.size()), features.cols);
        y.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto src = features.row(rows[i]);
            std::copy(src.begin(), src.end(),
                      x.data.begin() + static_cast<std::ptrdiff_t>(i) * features.cols);
            y[i] = labels[rows[i]];
        }
    };
    Matrix xtr, xte;
    std::vector<int> ytr, yte;
    gather(train_rows, xtr, ytr);
    gather(test_rows, xte, yte);

    DenseLayer probe_layer(classes, features.cols);
    for (int it = 0; it < iterations; ++it) {
        Matrix logits;
        kernels::dense_forward(xtr, probe_layer.weight, probe_layer.bias, logits);
        const auto ce = cross_entropy(logits, ytr);
        Matrix d_weight(classes, features.cols);
        std::vector<double> d_bias(classes, 0.0);
        kernels::dense_backward_params(xtr, ce.d_logits, d_weight, d_bias);
        for (std::size_t i = 0; i < probe_layer.weight.data.size(); ++i)
            probe_layer.weight.data[i] -= lr * d_weight.data[i];
        for (int c = 0; c < classes; ++c) probe_layer.bias[c] -= lr * d_bias[c];
    }

    auto accuracy = [&](const Matrix& x, const std::vector<int>& y) {
        Matrix logits;
        kernels::dense_forward(x, probe_layer.weight, probe_layer.bias, logits);
        int hits = 0;
        for (int r = 0; r < logits.rows; ++r) {
            const auto row = logits.row(r);
            int best = 0;
            for (int c = 1; c < logits.cols; ++c)
                if (row[c] > row[best]) best = c;
            hits += best == y[r] ? 1 : 0;
        }
        return logits.rows == 0 ? 0.0 : static_cast<double>(hits) / logits.rows;
    };
    if (train_accuracy_out) *train_accuracy_out = accuracy(xtr, ytr);
    return accuracy(xte, yte);
}

}  // namespace

DomainGapReport domain_gap_diagnostic(const Dataset& dataset, int num_pairs_per_domain,
                                      std::uint64_t seed) {
    if (num_pairs_per_domain < 2)
        throw ConfigError("domain gap diagnostic: num_pairs_per_domain must be >= 2");
    std::map<int, std::vector<int>> by_domain;
    for (std::size_t i = 0; i < dataset.records.size(); ++i)
        by_domain[dataset.records[i].domain].push_back(static_cast<int>(i));
    if (by_domain.size() < 2) throw DataError("domain gap diagnostic: needs >= 2 domains");
    for (const auto& [dom, rows] : by_domain)
        if (rows.size() < 2)
            throw DataError("domain gap diagnostic: domain " + std::to_string(dom) +
                            " has fewer than 2 records");

    RngStream rng = RngStream::derive(seed, streams::kDiag);
    const int d = dataset.d_in;
    const int num_domains = static_cast<int>(by_domain.size());
    const int per_domain = num_pairs_per_domain;

    Matrix instances(num_domains * per_domain, d);
    Matrix pairs(num_domains * per_domain, d);
    std::vector<int> labels(static_cast<std::size_t>(num_domains) * per_domain);

    int out_row = 0;
    int domain_index = 0;
    for (const auto& [dom, rows] : by_domain) {
        for (int k = 0; k < per_domain; ++k, ++out_row) {
            // Instance sample, then a distinct within-domain pair.
            const auto& inst = dataset.records[rows[rng.uniform_int(rows.size())]].embedding;
            std::copy(inst.begin(), inst.end(),
                      instances.data.begin() + static_cast<std::ptrdiff_t>(out_row) * d);

            const auto a = rng.uniform_int(rows.size());
            auto b = rng.uniform_int(rows.size() - 1);
            if (b >= a) ++b;
            const auto& ea = dataset.records[rows[a]].embedding;
            const auto& eb = dataset.records[rows[b]].embedding;
            auto dst = pairs.row(out_row);
            for (int c = 0; c < d; ++c) {
                const double diff = ea[c] - eb[c];
                dst[c] = diff * diff;
            }
            labels[out_row] = domain_index;
        }
        ++domain_index;
    }

    l2_normalize_rows(instances);
    l2_normalize_rows(pairs);

    DomainGapReport report;
    report.num_domains = num_domains;
    report.samples_per_domain = per_domain;
    report.chance_level = 1.0 / num_domains;
    report.instance_space_accuracy =
        linear_probe_heldout_accuracy(instances, labels, num_domains, rng, 200, 0.1);
    report.pair_space_accuracy =
        linear_probe_heldout_accuracy(pairs, labels, num_domains, rng, 200, 0.1);
    return report;
}

std::vector<TimingRow> timing_compare(const Dataset& probe, const Dataset& gallery,
                                      const ModelParams& model,
                                      const std::vector<EvalProtocol>& protocols, int repeats,
                                      const EvalConfig& config) {
    if (repeats < 1) throw ConfigError("timing_compare: repeats must be >= 1");
    ThreadPin pin(config.pin_single_thread);

    std::vector<TimingRow> rows;
    for (EvalProtocol protocol : protocols) {
        EvalConfig cfg = config;
        cfg.protocol = protocol;
        std::vector<double> sim_times, rank_times;
        TimingRow row;
        row.protocol = protocol;
        for (int r = 0; r < repeats; ++r) {
            row.report = evaluate(probe, gallery, model, cfg);
            sim_times.push_back(row.report.wall_seconds_similarity);
            rank_times.push_back(row.report.wall_seconds_ranking);
        }
        auto median = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            const auto n = v.size();
            return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        };
        row.similarity_seconds = median(sim_times);
        row.ranking_seconds = median(rank_times);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

std::string fmt(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace

std::string format_eval_report(const EvalReport& report) {
    std::ostringstream os;
    os << "protocol\t" << protocol_name(report.protocol) << "\n";
    os << "mAP\t" << fmt(report.mAP) << "\n";
    for (const auto& [rank, value] : report.cmc) os << "cmc@" << rank << "\t" << fmt(value) << "\n";
    os << "valid_probes\t" << report.num_valid_probes << "\n";
    os << "skipped_probes\t" << report.num_skipped_probes << "\n";
    os << "wall_seconds_similarity\t" << fmt(report.wall_seconds_similarity) << "\n";
    os << "wall_seconds_ranking\t" << fmt(report.wall_seconds_ranking) << "\n";
    return os.str();
}

std::string eval_report_json(const EvalReport& report) {
    std::ostringstream os;
    os << "{\n  \"protocol\": \"" << protocol_name(report.protocol) << "\",\n";
    os << "  \"mAP\": " << fmt(report.mAP, "%.17g") << ",\n  \"cmc\": {";
    bool first = true;
    for (const auto& [rank, value] : report.cmc) {
        os << (first ? "" : ", ") << "\"" << rank << "\": " << fmt(value, "%.17g");
        first = false;
    }
    os << "},\n";
    os << "  \"valid_probes\": " << report.num_valid_probes << ",\n";
    os << "  \"skipped_probes\": " << report.num_skipped_probes << ",\n";
    os << "  \"wall_seconds_similarity\": " << fmt(report.wall_seconds_similarity, "%.17g") << ",\n";
    os << "  \"wall_seconds_ranking\": " << fmt(report.wall_seconds_ranking, "%.17g") << "\n}\n";
    return os.str();
}

std::string format_domain_gap_report(const DomainGapReport& report) {
    std::ostringstream os;
    os << "domains\t" << report.num_domains << "\n";
    os << "samples_per_domain\t" << report.samples_per_domain << "\n";
    os << "chance_level\t" << fmt(report.chance_level) << "\n";
    os << "instance_space_accuracy\t" << fmt(report.instance_space_accuracy) << "\n";
    os << "pair_space_accuracy\t" << fmt(report.pair_space_accuracy) << "\n";
    return os.str();
}

std::string domain_gap_report_json(const DomainGapReport& report) {
    std::ostringstream os;
    os << "{\n  \"domains\": " << report.num_domains << ",\n";
    os << "  \"samples_per_domain\": " << report.samples_per_domain << ",\n";
    os << "  \"chance_level\": " << fmt(report.chance_level, "%.17g") << ",\n";
    os << "  \"instance_space_accuracy\": " << fmt(report.instance_space_accuracy, "%.17g") << ",\n";
    os << "  \"pair_space_accuracy\": " << fmt(report.pair_space_accuracy, "%.17g") << "\n}\n";
    return os.str();
}

std::string format_timing_table(const std::vector<TimingRow>& rows) {
    std::ostringstream os;
    os << "protocol            similarity_s  ranking_s     total_s       mAP\n";
    for (const auto& row : rows) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-19s %-13.6f %-13.6f %-13.6f %.4f\n",
                      protocol_name(row.protocol), row.similarity_seconds, row.ranking_seconds,
                      row.similarity_seconds + row.ranking_seconds, row.report.mAP);
        os << line;
    }
    return os.str();
}

std::string model_summary(const ModelParams& model) {
    std::ostringstream os;
    const auto enc = encoder_param_count(model.encoder);
    os << "encoder: " << model.encoder.input_dim();
    for (const auto& layer : model.encoder.layers) os << " -> " << layer.out_dim();
    os << " (dp site after layer " << model.encoder.dp_site << ", classifier "
       << model.encoder.num_classes() << " classes), " << enc << " parameters\n";
    if (model.mnet) {
        const auto mn = mnet_param_count(*model.mnet);
        os << "metric net: " << model.mnet->input_dim() << " -> " << model.mnet->hidden_dim()
           << " -> 2, " << mn << " parameters (" << fmt(100.0 * mn / enc, "%.1f")
           << "% of the encoder)\n";
    } else {
        os << "metric net: none\n";
    }
    return os.str();
}

}  // namespace gmn
