#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "gmn/config.hpp"

namespace gmn {

struct DataBundle {
    Dataset train;
    Dataset probe;
    Dataset gallery;
};

// Synthetic path: all domains but the last train; the held-out domain is
// split into probe/gallery. File path: loads the three configured files.
DataBundle prepare_data(const ExperimentConfig& config);

// Evaluation protocol implied by the ablation switches: without the metric
// net only feature ranking is possible.
EvalProtocol preset_protocol(const AblationConfig& ablation);

struct PresetResult {
    std::string name;
    EvalReport report;
    LossBreakdown final_losses;
    std::vector<std::int64_t> first_batch_sample_ids;  // paired-seed check
    TrainState state;
};

// Trains under the config's ablation switches and evaluates on the bundle's
// probe/gallery with the preset protocol.
PresetResult run_preset(const ExperimentConfig& config, const std::string& name,
                        const DataBundle& data, std::ostream* train_log = nullptr);

}  // namespace gmn
