#pragma once

#include <string>
#include <vector>

#include "gmn/data_model.hpp"
#include "gmn/evaluator.hpp"
#include "gmn/trainer.hpp"

namespace gmn {

// Data source: synthetic generation by default, file ingestion when paths are
// set. Domains [0, num_domains - 1) train; the last domain is held out and
// split into probe/gallery.
struct DataConfig {
    SyntheticSpec synthetic;
    std::string train_path;
    std::string probe_path;
    std::string gallery_path;
    double probe_fraction = 0.25;
    FileFormat format = FileFormat::Binary;

    bool uses_files() const { return !train_path.empty(); }
};

struct AblationConfig {
    bool use_mnet = true;  // "A"
    bool use_dp = true;    // "B"
    bool use_pic = true;   // "C"
};

struct DiagnoseConfig {
    int pairs_per_domain = 300;
};

// Everything one run needs. Defaults form the desk-scale preset: 4 domains
// (3 train + 1 held out), 32 identities, 10 records per identity per domain,
// d_in = 32, encoder 32 -> 64 -> 32, 60 epochs with dropout from epoch 30.
struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    DataConfig data;
    TrainConfig train;
    EvalConfig eval;
    AblationConfig ablation;
    DiagnoseConfig diagnose;

    // data.seed / train.seed follow the experiment seed unless set explicitly.
    bool data_seed_explicit = false;
    bool train_seed_explicit = false;

    ExperimentConfig();  // applies the desk-scale preset on top of TrainConfig defaults

    SyntheticSpec resolved_synthetic() const;

    // Pushes seed/ablation switches into the train config; call before train().
    TrainConfig resolved_train_config() const;
};

// Plain-text config: "[section]" headers, "key = value" lines, '#' comments.
// Unknown keys are errors. Sections: experiment, data, train, eval, ablation,
// diagnose.
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});

// Applies one "section.key=value" override.
void apply_override(ExperimentConfig& config, const std::string& spec);

// Serializes the full resolved config in the same file format.
std::string dump_config(const ExperimentConfig& config);

// Table-based preset named after the ablation rows: "baseline", "a", "ab", "abc".
void apply_ablation_preset(ExperimentConfig& config, const std::string& name);

}  // namespace gmn
