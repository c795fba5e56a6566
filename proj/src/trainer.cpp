#include "gmn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace gmn {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (dp_activation_epoch < 0 || dp_activation_epoch > epochs)
        throw ConfigError("train config: dp_activation_epoch must be in [0, epochs]");
    if (identities_per_batch < 1) throw ConfigError("train config: identities_per_batch must be >= 1");
    if (samples_per_identity < 1) throw ConfigError("train config: samples_per_identity must be >= 1");
    if (base_lr < 0) throw ConfigError("train config: base_lr must be >= 0");
    if (lr_decay_factor <= 0) throw ConfigError("train config: lr_decay_factor must be > 0");
    for (std::size_t i = 0; i < lr_decay_epochs.size(); ++i) {
        if (lr_decay_epochs[i] < 0 || lr_decay_epochs[i] >= epochs)
            throw ConfigError("train config: lr decay epochs must lie in [0, epochs)");
        if (i > 0 && lr_decay_epochs[i] <= lr_decay_epochs[i - 1])
            throw ConfigError("train config: lr decay epochs must be strictly increasing");
    }
    if (lambda < 0) throw ConfigError("train config: lambda must be >= 0");
    if (triplet_margin < 0) throw ConfigError("train config: triplet_margin must be >= 0");
    if (pair_scheme.negatives_per_positive < 1)
        throw ConfigError("train config: negatives_per_positive must be >= 1");
    if (encoder_dims.empty()) throw ConfigError("train config: encoder_dims must not be empty");
    if (dp_site < 0 || dp_site >= static_cast<int>(encoder_dims.size()))
        throw ConfigError("train config: dp_site out of range");
    if (mnet_hidden < 0) throw ConfigError("train config: mnet_hidden must be >= 0");
    dp.validate();
}

SampleBatch pk_batch(const Dataset& train, int identities_per_domain, int samples_per_identity,
                     RngStream& rng) {
    if (train.records.empty()) throw DataError("pk_batch: empty dataset");
    const int p = identities_per_domain;
    const int k = samples_per_identity;

    std::map<int, std::map<int, std::vector<int>>> by_domain;
    for (std::size_t i = 0; i < train.records.size(); ++i)
        by_domain[train.records[i].domain][train.records[i].identity].push_back(static_cast<int>(i));

    std::vector<int> rows;
    for (const auto& [dom, ids] : by_domain) {
        if (static_cast<int>(ids.size()) < p)
            throw DataError("pk_batch: domain " + std::to_string(dom) + " has only " +
                            std::to_string(ids.size()) + " identities, need " + std::to_string(p));
        std::vector<const std::vector<int>*> id_rows;
        id_rows.reserve(ids.size());
        for (const auto& [id, r] : ids) id_rows.push_back(&r);

        const auto chosen = rng.sample_without_replacement(id_rows.size(), static_cast<std::size_t>(p));
        for (auto idx : chosen) {
            const auto& candidates = *id_rows[idx];
            if (candidates.size() >= static_cast<std::size_t>(k)) {
                const auto picks =
                    rng.sample_without_replacement(candidates.size(), static_cast<std::size_t>(k));
                for (auto pi : picks) rows.push_back(candidates[pi]);
            } else {
                for (int c = 0; c < k; ++c)
                    rows.push_back(candidates[rng.uniform_int(candidates.size())]);
            }
        }
    }

    SampleBatch batch;
    batch.inputs = Matrix(static_cast<int>(rows.size()), train.d_in);
    batch.identity.resize(rows.size());
    batch.domain.resize(rows.size());
    batch.camera.resize(rows.size());
    batch.sample_ids.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& rec = train.records[rows[i]];
        std::copy(rec.embedding.begin(), rec.embedding.end(),
                  batch.inputs.data.begin() + static_cast<std::ptrdiff_t>(i) * train.d_in);
        batch.identity[i] = rec.identity;
        batch.domain[i] = rec.domain;
        batch.camera[i] = rec.camera;
        batch.sample_ids[i] = rec.sample_id;
    }
    return batch;
}

StepResult compute_losses_and_grads(const ModelParams& model, const SampleBatch& batch,
                                    const TrainConfig& config, bool dp_active, RngStream* dp_rng,
                                    const Matrix* frozen_dp_masks, RngStream& pair_rng,
                                    RngStream& pic_rng) {
    DpConfig dp = config.dp;
    dp.active = dp_active;

    const auto fwd = encoder_forward(model.encoder, dp, batch.inputs, /*training=*/true, dp_rng,
                                     frozen_dp_masks);

    const auto cls = cross_entropy(fwd.logits, batch.identity);
    const auto tri = triplet_loss_batch_hard(fwd.embeddings, batch.identity, config.triplet_margin);

    Matrix d_embeddings = tri.d_embeddings;

    StepResult out;
    double l_gmn = 0.0;
    if (config.use_mnet && model.mnet) {
        const auto pairs = sample_pairs(fwd.embeddings, batch.identity, batch.domain,
                                        batch.sample_ids, config.pair_scheme, config.pair_op,
                                        pair_rng);
        if (!pairs.empty()) {
            Matrix features(static_cast<int>(pairs.size()), fwd.embeddings.cols);
            std::vector<int> labels(pairs.size());
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                std::copy(pairs[i].vector.begin(), pairs[i].vector.end(),
                          features.data.begin() +
                              static_cast<std::ptrdiff_t>(i) * fwd.embeddings.cols);
                labels[i] = pairs[i].label;
            }
            const auto mfwd = mnet_forward(*model.mnet, features);
            const auto gl = gmn_loss(mfwd.logits, labels);
            l_gmn = gl.value;
            auto mbwd = mnet_backward(*model.mnet, mfwd.cache, gl.d_logits);
            if (!config.detach_gmn_from_encoder) {
                for (std::size_t i = 0; i < pairs.size(); ++i) {
                    const auto [ra, rb] = pairs[i].source_rows;
                    pair_feature_backward(fwd.embeddings.row(ra), fwd.embeddings.row(rb),
                                          config.pair_op, mbwd.d_input.row(static_cast<int>(i)),
                                          d_embeddings.row(ra), d_embeddings.row(rb));
                }
            }
            out.grads.mnet = std::move(mbwd.grads);
        } else {
            out.grads.mnet = MnetGrads{DenseLayer(model.mnet->layer1.out_dim(), model.mnet->layer1.in_dim()),
                                       DenseLayer(2, model.mnet->layer2.in_dim())};
        }
    }

    double l_pic_pos = 0.0, l_pic_neg = 0.0;
    if (config.use_pic && config.lambda != 0.0) {
        const auto variants = pic_pair_variants(fwd.embeddings, batch.identity, pic_rng);
        std::vector<std::array<std::vector<double>, 3>> pos;
        std::vector<std::array<std::vector<double>, 4>> neg;
        pos.reserve(variants.anchors.size());
        neg.reserve(variants.anchors.size());
        for (const auto& a : variants.anchors) {
            pos.push_back(a.positive);
            neg.push_back(a.negative);
        }
        auto pic = pic_loss(pos, neg);
        l_pic_pos = pic.pos;
        l_pic_neg = pic.neg;
        // d(total)/d(variant) = lambda * d(pic)/d(variant)
        for (auto& g3 : pic.pos_grads)
            for (auto& g : g3)
                for (auto& v : g) v *= config.lambda;
        for (auto& g4 : pic.neg_grads)
            for (auto& g : g4)
                for (auto& v : g) v *= config.lambda;
        pic_variants_backward(fwd.embeddings, variants, pic.pos_grads, pic.neg_grads, d_embeddings);
    }

    out.losses = total_loss(cls.value, tri.value, l_gmn, l_pic_pos, l_pic_neg, config.lambda);

    auto ebwd = encoder_backward(model.encoder, fwd.cache, d_embeddings, cls.d_logits);
    out.grads.encoder = std::move(ebwd.grads);
    return out;
}

namespace {

void adam_step(ModelParams& model, const ModelGrads& grads_in, AdamState& opt, double lr,
               const TrainConfig& cfg) {
    auto params = param_spans(model);
    auto grads = param_spans(const_cast<ModelGrads&>(grads_in));
    opt.t += 1;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(opt.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(opt.t));
    std::size_t idx = 0;
    for (std::size_t s = 0; s < params.size(); ++s) {
        auto p = params[s];
        auto g = grads[s];
        for (std::size_t i = 0; i < p.size(); ++i, ++idx) {
            const double gi = g[i];
            opt.m[idx] = b1 * opt.m[idx] + (1.0 - b1) * gi;
            opt.v[idx] = b2 * opt.v[idx] + (1.0 - b2) * gi * gi;
            const double mhat = opt.m[idx] / bc1;
            const double vhat = opt.v[idx] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

void sgd_step(ModelParams& model, const ModelGrads& grads_in, double lr) {
    auto params = param_spans(model);
    auto grads = param_spans(const_cast<ModelGrads&>(grads_in));
    for (std::size_t s = 0; s < params.size(); ++s) {
        auto p = params[s];
        auto g = grads[s];
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    }
}

}  // namespace

double learning_rate(const TrainConfig& config, int epoch) {
    int decays = 0;
    for (int e : config.lr_decay_epochs)
        if (e <= epoch) ++decays;
    return config.base_lr / std::pow(config.lr_decay_factor, decays);
}

int iterations_per_epoch(const TrainConfig& config, const Dataset& train) {
    const std::size_t batch_size = static_cast<std::size_t>(train.num_domains) *
                                   config.identities_per_batch * config.samples_per_identity;
    const auto n = train.records.size() / std::max<std::size_t>(batch_size, 1);
    return std::max<int>(1, static_cast<int>(n));
}

bool dp_active_at(const TrainConfig& config, int epoch) {
    return config.use_dp && config.dp.rate > 0.0 && epoch >= config.dp_activation_epoch &&
           epoch < config.dp_deactivation_epoch;
}

TrainState init_training(const TrainConfig& config, const Dataset& train) {
    config.validate();
    if (train.records.empty()) throw DataError("train: empty dataset");

    TrainState state;
    state.config = config;

    RngStream init_rng = RngStream::derive(config.seed, streams::kInit);
    const int num_classes = train.max_identity() + 1;
    state.model.encoder =
        make_encoder(train.d_in, config.encoder_dims, config.dp_site, num_classes, init_rng);
    if (config.use_mnet) {
        const int d = state.model.encoder.embedding_dim();
        const int h = config.mnet_hidden > 0 ? config.mnet_hidden : default_hidden_width(d);
        state.model.mnet = make_metric_net(d, h, init_rng);
    }

    state.opt.m.assign(param_count(state.model), 0.0);
    state.opt.v.assign(param_count(state.model), 0.0);

    state.batch_rng = RngStream::derive(config.seed, streams::kBatch);
    state.pair_rng = RngStream::derive(config.seed, streams::kPair);
    state.pic_rng = RngStream::derive(config.seed, streams::kPic);
    state.dp_rng = RngStream::derive(config.seed, streams::kDp);
    return state;
}

void write_log_header(std::ostream& log) {
    log << "# epoch\tlr\tl_cls\tl_tri\tl_gmn\tl_pic_pos\tl_pic_neg\ttotal\twall_seconds\n";
}

void train_epochs(TrainState& state, const Dataset& train, int until_epoch, std::ostream* log) {
    const TrainConfig& cfg = state.config;
    until_epoch = std::min(until_epoch, cfg.epochs);
    const int iters = iterations_per_epoch(cfg, train);

    for (; state.epoch < until_epoch; ++state.epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const int epoch = state.epoch;
        const double lr = learning_rate(cfg, epoch);
        const bool dp_on = dp_active_at(cfg, epoch);

        LossBreakdown avg;
        avg.lambda = cfg.lambda;
        for (int it = 0; it < iters; ++it) {
            try {
                const auto batch = pk_batch(train, cfg.identities_per_batch,
                                            cfg.samples_per_identity, state.batch_rng);
                auto step = compute_losses_and_grads(state.model, batch, cfg, dp_on,
                                                     dp_on ? &state.dp_rng : nullptr, nullptr,
                                                     state.pair_rng, state.pic_rng);
                if (cfg.optimizer == OptimizerKind::Adam)
                    adam_step(state.model, step.grads, state.opt, lr, cfg);
                else
                    sgd_step(state.model, step.grads, lr);

                avg.l_cls += step.losses.l_cls;
                avg.l_tri += step.losses.l_tri;
                avg.l_gmn += step.losses.l_gmn;
                avg.l_pic_pos += step.losses.l_pic_pos;
                avg.l_pic_neg += step.losses.l_pic_neg;
                avg.total += step.losses.total;
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + " iteration " +
                                   std::to_string(it) + ": " + e.what());
            } catch (const DataError& e) {
                throw DataError("epoch " + std::to_string(epoch) + " iteration " +
                                std::to_string(it) + ": " + e.what());
            }
        }
        const double inv = 1.0 / iters;
        avg.l_cls *= inv;
        avg.l_tri *= inv;
        avg.l_gmn *= inv;
        avg.l_pic_pos *= inv;
        avg.l_pic_neg *= inv;
        avg.total *= inv;
        state.history.push_back({lr, avg});

        if (log) {
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            (*log) << epoch << '\t' << lr << '\t' << avg.l_cls << '\t' << avg.l_tri << '\t'
                   << avg.l_gmn << '\t' << avg.l_pic_pos << '\t' << avg.l_pic_neg << '\t'
                   << avg.total << '\t' << wall << '\n';
            log->flush();
        }
    }
}

TrainState train(const TrainConfig& config, const Dataset& train_set, std::ostream* log) {
    TrainState state = init_training(config, train_set);
    if (log) write_log_header(*log);
    train_epochs(state, train_set, config.epochs, log);
    return state;
}

// ---------------------------------------------------------------------------
// Checkpoint format "GMNC" v1. All integers little-endian, weights row-major
// f64. Layout: magic, version u32, positive-logit index u8, encoder (layer
// count u32, input dim u32, per-layer output dims u32, dp_site u32, weights +
// biases), classifier (class count u32, weights + bias), metric net (present
// u8, dims, weights), then optionally the training state.
// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'G', 'M', 'N', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError(std::string("checkpoint truncated reading ") + what);
    return v;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
    put(os, static_cast<std::uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::istream& is, const char* what) {
    const auto n = get<std::uint64_t>(is, what);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw DataError(std::string("checkpoint truncated reading ") + what);
    return v;
}

void put_dense(std::ostream& os, const DenseLayer& layer) {
    put_doubles(os, layer.weight.data);
    put_doubles(os, layer.bias);
}

DenseLayer get_dense(std::istream& is, int out, int in, const char* what) {
    DenseLayer layer(out, in);
    layer.weight.data = get_doubles(is, what);
    if (layer.weight.data.size() != static_cast<std::size_t>(out) * in)
        throw DataError(std::string("checkpoint: weight size mismatch in ") + what);
    layer.bias = get_doubles(is, what);
    if (layer.bias.size() != static_cast<std::size_t>(out))
        throw DataError(std::string("checkpoint: bias size mismatch in ") + what);
    return layer;
}

void put_ints(std::ostream& os, const std::vector<int>& v) {
    put(os, static_cast<std::uint32_t>(v.size()));
    for (int x : v) put(os, static_cast<std::int32_t>(x));
}

std::vector<int> get_ints(std::istream& is, const char* what) {
    const auto n = get<std::uint32_t>(is, what);
    std::vector<int> v(n);
    for (auto& x : v) x = get<std::int32_t>(is, what);
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put(os, static_cast<std::uint64_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is, const char* what) {
    const auto n = get<std::uint64_t>(is, what);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw DataError(std::string("checkpoint truncated reading ") + what);
    return s;
}

void put_rng(std::ostream& os, const RngStream& rng) {
    std::ostringstream ss;
    rng.save(ss);
    put_string(os, ss.str());
}

RngStream get_rng(std::istream& is, const char* what) {
    std::istringstream ss(get_string(is, what));
    RngStream rng;
    rng.load(ss);
    return rng;
}

void put_config(std::ostream& os, const TrainConfig& c) {
    put(os, static_cast<std::int32_t>(c.epochs));
    put(os, static_cast<std::int32_t>(c.dp_activation_epoch));
    put(os, static_cast<std::int32_t>(c.dp_deactivation_epoch));
    put(os, static_cast<std::int32_t>(c.identities_per_batch));
    put(os, static_cast<std::int32_t>(c.samples_per_identity));
    put(os, c.base_lr);
    put_ints(os, c.lr_decay_epochs);
    put(os, c.lr_decay_factor);
    put(os, c.lambda);
    put(os, c.dp.rate);
    put(os, static_cast<std::uint8_t>(c.dp.inverted_scaling));
    put(os, static_cast<std::uint8_t>(c.pair_scheme.variant));
    put(os, static_cast<std::int32_t>(c.pair_scheme.negatives_per_positive));
    put(os, static_cast<std::uint8_t>(c.pair_op));
    put(os, c.triplet_margin);
    put(os, c.seed);
    put(os, static_cast<std::uint8_t>(c.optimizer));
    put(os, c.adam_beta1);
    put(os, c.adam_beta2);
    put(os, c.adam_eps);
    put_ints(os, c.encoder_dims);
    put(os, static_cast<std::int32_t>(c.dp_site));
    put(os, static_cast<std::int32_t>(c.mnet_hidden));
    put(os, static_cast<std::uint8_t>(c.use_mnet));
    put(os, static_cast<std::uint8_t>(c.use_dp));
    put(os, static_cast<std::uint8_t>(c.use_pic));
    put(os, static_cast<std::uint8_t>(c.detach_gmn_from_encoder));
}

TrainConfig get_config(std::istream& is) {
    TrainConfig c;
    c.epochs = get<std::int32_t>(is, "config");
    c.dp_activation_epoch = get<std::int32_t>(is, "config");
    c.dp_deactivation_epoch = get<std::int32_t>(is, "config");
    c.identities_per_batch = get<std::int32_t>(is, "config");
    c.samples_per_identity = get<std::int32_t>(is, "config");
    c.base_lr = get<double>(is, "config");
    c.lr_decay_epochs = get_ints(is, "config");
    c.lr_decay_factor = get<double>(is, "config");
    c.lambda = get<double>(is, "config");
    c.dp.rate = get<double>(is, "config");
    c.dp.inverted_scaling = get<std::uint8_t>(is, "config") != 0;
    c.pair_scheme.variant = static_cast<NegativeSampling>(get<std::uint8_t>(is, "config"));
    c.pair_scheme.negatives_per_positive = get<std::int32_t>(is, "config");
    c.pair_op = static_cast<PairOp>(get<std::uint8_t>(is, "config"));
    c.triplet_margin = get<double>(is, "config");
    c.seed = get<std::uint64_t>(is, "config");
    c.optimizer = static_cast<OptimizerKind>(get<std::uint8_t>(is, "config"));
    c.adam_beta1 = get<double>(is, "config");
    c.adam_beta2 = get<double>(is, "config");
    c.adam_eps = get<double>(is, "config");
    c.encoder_dims = get_ints(is, "config");
    c.dp_site = get<std::int32_t>(is, "config");
    c.mnet_hidden = get<std::int32_t>(is, "config");
    c.use_mnet = get<std::uint8_t>(is, "config") != 0;
    c.use_dp = get<std::uint8_t>(is, "config") != 0;
    c.use_pic = get<std::uint8_t>(is, "config") != 0;
    c.detach_gmn_from_encoder = get<std::uint8_t>(is, "config") != 0;
    return c;
}

void put_model(std::ostream& os, const ModelParams& model) {
    os.write(kCheckpointMagic, 4);
    put(os, kCheckpointVersion);
    put(os, static_cast<std::uint8_t>(1));  // index of the "same identity" logit
    put(os, static_cast<std::uint32_t>(model.encoder.layers.size()));
    put(os, static_cast<std::uint32_t>(model.encoder.input_dim()));
    for (const auto& layer : model.encoder.layers)
        put(os, static_cast<std::uint32_t>(layer.out_dim()));
    put(os, static_cast<std::uint32_t>(model.encoder.dp_site));
    for (const auto& layer : model.encoder.layers) put_dense(os, layer);
    put(os, static_cast<std::uint32_t>(model.encoder.num_classes()));
    put_dense(os, model.encoder.classifier);
    put(os, static_cast<std::uint8_t>(model.mnet.has_value()));
    if (model.mnet) {
        put(os, static_cast<std::uint32_t>(model.mnet->input_dim()));
        put(os, static_cast<std::uint32_t>(model.mnet->hidden_dim()));
        put_dense(os, model.mnet->layer1);
        put_dense(os, model.mnet->layer2);
    }
}

ModelParams get_model(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw DataError("checkpoint: bad magic, not a GMNC file");
    const auto version = get<std::uint32_t>(is, "version");
    if (version != kCheckpointVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    const auto positive_index = get<std::uint8_t>(is, "logit convention");
    if (positive_index != 1)
        throw DataError("checkpoint: unexpected positive-logit index " +
                        std::to_string(positive_index));

    ModelParams model;
    const auto num_layers = get<std::uint32_t>(is, "layer count");
    if (num_layers == 0) throw DataError("checkpoint: zero encoder layers");
    int in = static_cast<int>(get<std::uint32_t>(is, "input dim"));
    std::vector<int> outs(num_layers);
    for (auto& o : outs) o = static_cast<int>(get<std::uint32_t>(is, "layer dim"));
    model.encoder.dp_site = static_cast<int>(get<std::uint32_t>(is, "dp_site"));
    for (std::uint32_t l = 0; l < num_layers; ++l) {
        model.encoder.layers.push_back(get_dense(is, outs[l], in, "encoder layer"));
        in = outs[l];
    }
    const auto classes = get<std::uint32_t>(is, "class count");
    model.encoder.classifier = get_dense(is, static_cast<int>(classes), in, "classifier");
    if (get<std::uint8_t>(is, "mnet flag") != 0) {
        const auto d = get<std::uint32_t>(is, "mnet input dim");
        const auto h = get<std::uint32_t>(is, "mnet hidden dim");
        MetricNetParams mnet;
        mnet.layer1 = get_dense(is, static_cast<int>(h), static_cast<int>(d), "mnet layer1");
        mnet.layer2 = get_dense(is, 2, static_cast<int>(h), "mnet layer2");
        model.mnet = std::move(mnet);
    }
    model.encoder.validate();
    return model;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    put_model(os, state.model);
    put(os, static_cast<std::uint8_t>(1));  // training state present
    put_config(os, state.config);
    put(os, static_cast<std::int32_t>(state.epoch));
    put(os, state.opt.t);
    put_doubles(os, state.opt.m);
    put_doubles(os, state.opt.v);
    put_rng(os, state.batch_rng);
    put_rng(os, state.pair_rng);
    put_rng(os, state.pic_rng);
    put_rng(os, state.dp_rng);
    put(os, static_cast<std::uint32_t>(state.history.size()));
    for (const auto& h : state.history) {
        put(os, h.lr);
        put(os, h.losses.l_cls);
        put(os, h.losses.l_tri);
        put(os, h.losses.l_gmn);
        put(os, h.losses.l_pic_pos);
        put(os, h.losses.l_pic_neg);
        put(os, h.losses.lambda);
        put(os, h.losses.total);
    }
    if (!os) throw IoError("write failed: " + path);
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    TrainState state;
    state.model = get_model(is);
    if (get<std::uint8_t>(is, "train state flag") == 0)
        throw DataError("checkpoint: no training state, cannot resume (model-only file)");
    state.config = get_config(is);
    state.epoch = get<std::int32_t>(is, "epoch");
    state.opt.t = get<std::uint64_t>(is, "optimizer step");
    state.opt.m = get_doubles(is, "adam m");
    state.opt.v = get_doubles(is, "adam v");
    if (state.opt.m.size() != param_count(state.model) ||
        state.opt.v.size() != param_count(state.model))
        throw DataError("checkpoint: optimizer moment size does not match the model");
    state.batch_rng = get_rng(is, "batch rng");
    state.pair_rng = get_rng(is, "pair rng");
    state.pic_rng = get_rng(is, "pic rng");
    state.dp_rng = get_rng(is, "dp rng");
    const auto n = get<std::uint32_t>(is, "history size");
    state.history.resize(n);
    for (auto& h : state.history) {
        h.lr = get<double>(is, "history");
        h.losses.l_cls = get<double>(is, "history");
        h.losses.l_tri = get<double>(is, "history");
        h.losses.l_gmn = get<double>(is, "history");
        h.losses.l_pic_pos = get<double>(is, "history");
        h.losses.l_pic_neg = get<double>(is, "history");
        h.losses.lambda = get<double>(is, "history");
        h.losses.total = get<double>(is, "history");
    }
    return state;
}

void save_model(const ModelParams& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    put_model(os, model);
    put(os, static_cast<std::uint8_t>(0));  // no training state
    if (!os) throw IoError("write failed: " + path);
}

ModelParams load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    return get_model(is);
}

}  // namespace gmn
