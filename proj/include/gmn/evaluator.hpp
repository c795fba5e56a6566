#pragma once

#include <map>
#include <string>
#include <vector>

#include "gmn/data_model.hpp"
#include "gmn/model.hpp"
#include "gmn/pair_space.hpp"

namespace gmn {

enum class EvalProtocol { FeatureEuclidean, FeatureCosine, MNet };

const char* protocol_name(EvalProtocol p);

struct EvalConfig {
    EvalProtocol protocol = EvalProtocol::MNet;
    PairOp pair_op = PairOp::SquaredDiff;
    int tile_size = 256;
    bool cross_camera_filter = true;
    std::vector<int> ranks = {1, 5, 10};
    bool normalize_features = false;
    bool pin_single_thread = true;  // timing runs only

    void validate(int gallery_size) const;
};

struct EvalReport {
    double mAP = 0.0;
    std::map<int, double> cmc;  // requested rank -> fraction
    int num_valid_probes = 0;
    int num_skipped_probes = 0;  // probes with no reachable positive
    double wall_seconds_similarity = 0.0;
    double wall_seconds_ranking = 0.0;
    EvalProtocol protocol = EvalProtocol::MNet;
};

// Retrieval evaluation. Gallery entries sharing the probe's identity and
// camera are excluded when cross_camera_filter is on; ranking ties resolve by
// gallery index. AP is the mean of precision-at-k over the positions of the
// probe's positives.
EvalReport evaluate(const Dataset& probe, const Dataset& gallery, const ModelParams& model,
                    const EvalConfig& config);

// Metric computation from a caller-supplied similarity matrix (test hook and
// shared core of evaluate()).
EvalReport evaluate_similarity(const Matrix& similarity, const std::vector<int>& probe_identity,
                               const std::vector<int>& probe_camera,
                               const std::vector<int>& gallery_identity,
                               const std::vector<int>& gallery_camera, const EvalConfig& config);

// Quantitative domain-separability diagnostic: how well a linear classifier
// can tell domains apart on L2-normalized instance features versus
// squared-difference within-domain pair features.
struct DomainGapReport {
    double instance_space_accuracy = 0.0;
    double pair_space_accuracy = 0.0;
    double chance_level = 0.0;
    int num_domains = 0;
    int samples_per_domain = 0;
};

DomainGapReport domain_gap_diagnostic(const Dataset& dataset, int num_pairs_per_domain,
                                      std::uint64_t seed);

struct TimingRow {
    EvalProtocol protocol;
    double similarity_seconds = 0.0;  // median over repeats
    double ranking_seconds = 0.0;
    EvalReport report;                // from the last repeat
};

// Runs each protocol `repeats` times on identical inputs and reports median
// stage times. Pins to one thread when config.pin_single_thread.
std::vector<TimingRow> timing_compare(const Dataset& probe, const Dataset& gallery,
                                      const ModelParams& model,
                                      const std::vector<EvalProtocol>& protocols, int repeats,
                                      const EvalConfig& config);

std::string format_eval_report(const EvalReport& report);
std::string eval_report_json(const EvalReport& report);
std::string format_domain_gap_report(const DomainGapReport& report);
std::string domain_gap_report_json(const DomainGapReport& report);
std::string format_timing_table(const std::vector<TimingRow>& rows);

std::string model_summary(const ModelParams& model);

}  // namespace gmn
