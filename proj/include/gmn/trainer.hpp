#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "gmn/data_model.hpp"
#include "gmn/losses.hpp"
#include "gmn/model.hpp"
#include "gmn/pair_space.hpp"
#include "gmn/rng.hpp"

namespace gmn {

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
    int epochs = 120;
    int dp_activation_epoch = 60;
    int dp_deactivation_epoch = std::numeric_limits<int>::max();  // stays active once on
    int identities_per_batch = 16;  // per domain
    int samples_per_identity = 4;
    double base_lr = 3.5e-4;
    std::vector<int> lr_decay_epochs = {40, 90};
    double lr_decay_factor = 10.0;
    double lambda = 1.0;
    DpConfig dp{};  // rate 0.5, inverted scaling; activation is epoch-driven
    PairSamplingScheme pair_scheme{};
    PairOp pair_op = PairOp::SquaredDiff;
    double triplet_margin = 0.3;
    std::uint64_t seed = 1;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    std::vector<int> encoder_dims = {64, 32};  // hidden widths then embedding width
    int dp_site = 0;
    int mnet_hidden = 0;  // 0 = round(d/4)

    bool use_mnet = true;
    bool use_dp = true;
    bool use_pic = true;
    bool detach_gmn_from_encoder = false;

    void validate() const;
};

struct SampleBatch {
    Matrix inputs;
    std::vector<int> identity;
    std::vector<int> domain;
    std::vector<int> camera;
    std::vector<std::int64_t> sample_ids;
    int size() const { return inputs.rows; }
};

// P identities per domain without replacement, K samples each (with
// replacement when an identity has fewer than K records).
SampleBatch pk_batch(const Dataset& train, int identities_per_domain, int samples_per_identity,
                     RngStream& rng);

// One optimization step's losses and gradients; pure given the RNG streams
// and the (optional) frozen dropout masks, which makes it usable for
// finite-difference checks.
struct StepResult {
    LossBreakdown losses;
    ModelGrads grads;
};

StepResult compute_losses_and_grads(const ModelParams& model, const SampleBatch& batch,
                                    const TrainConfig& config, bool dp_active, RngStream* dp_rng,
                                    const Matrix* frozen_dp_masks, RngStream& pair_rng,
                                    RngStream& pic_rng);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
};

struct EpochLog {
    double lr = 0.0;
    LossBreakdown losses;  // averaged over the epoch's iterations
};

struct TrainState {
    TrainConfig config;
    ModelParams model;
    AdamState opt;
    RngStream batch_rng, pair_rng, pic_rng, dp_rng;
    int epoch = 0;  // next epoch to run
    std::vector<EpochLog> history;
};

double learning_rate(const TrainConfig& config, int epoch);
int iterations_per_epoch(const TrainConfig& config, const Dataset& train);
bool dp_active_at(const TrainConfig& config, int epoch);

TrainState init_training(const TrainConfig& config, const Dataset& train);

// Runs epochs [state.epoch, until_epoch). Each finished epoch appends one
// line to `log` (tab-separated: epoch, lr, loss fields, wall seconds); wall
// time is log-only so checkpoints stay byte-reproducible.
void train_epochs(TrainState& state, const Dataset& train, int until_epoch, std::ostream* log);

TrainState train(const TrainConfig& config, const Dataset& train, std::ostream* log = nullptr);

void write_log_header(std::ostream& log);

// Checkpoint file ("GMNC"): model parameters, and optionally the full
// training state (config, optimizer moments, RNG streams, loss history) so
// training resumes bit-identically.
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

void save_model(const ModelParams& model, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace gmn
