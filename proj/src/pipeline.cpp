#include "gmn/pipeline.hpp"

namespace gmn {

DataBundle prepare_data(const ExperimentConfig& config) {
    DataBundle bundle;
    if (config.data.uses_files()) {
        if (config.data.probe_path.empty() || config.data.gallery_path.empty())
            throw ConfigError("data: train_path set but probe_path/gallery_path missing");
        bundle.train =
            load_embeddings(config.data.train_path, config.data.format, DatasetRole::Train);
        bundle.probe =
            load_embeddings(config.data.probe_path, config.data.format, DatasetRole::Probe);
        bundle.gallery =
            load_embeddings(config.data.gallery_path, config.data.format, DatasetRole::Gallery);
        return bundle;
    }

    const SyntheticSpec spec = config.resolved_synthetic();
    if (spec.num_domains < 2)
        throw ConfigError("data: synthetic pipeline needs >= 2 domains (train + held-out)");
    const Dataset all = generate_synthetic(spec);

    std::vector<int> train_domains;
    for (int k = 0; k + 1 < spec.num_domains; ++k) train_domains.push_back(k);
    bundle.train = all.filter_domains(train_domains, DatasetRole::Train);
    const Dataset held_out = all.filter_domains({spec.num_domains - 1}, DatasetRole::Gallery);
    auto [probe, gallery] = split_probe_gallery(held_out, config.data.probe_fraction, spec.seed);
    bundle.probe = std::move(probe);
    bundle.gallery = std::move(gallery);
    return bundle;
}

EvalProtocol preset_protocol(const AblationConfig& ablation) {
    return ablation.use_mnet ? EvalProtocol::MNet : EvalProtocol::FeatureEuclidean;
}

PresetResult run_preset(const ExperimentConfig& config, const std::string& name,
                        const DataBundle& data, std::ostream* train_log) {
    PresetResult result;
    result.name = name;

    const TrainConfig train_cfg = config.resolved_train_config();

    // Record the first batch the training loop will draw; all presets with
    // one seed must agree since the batch stream is independent of the
    // ablation switches.
    {
        RngStream probe_stream = RngStream::derive(train_cfg.seed, streams::kBatch);
        const auto first = pk_batch(data.train, train_cfg.identities_per_batch,
                                    train_cfg.samples_per_identity, probe_stream);
        result.first_batch_sample_ids = first.sample_ids;
    }

    result.state = train(train_cfg, data.train, train_log);
    if (!result.state.history.empty()) result.final_losses = result.state.history.back().losses;

    EvalConfig eval_cfg = config.eval;
    eval_cfg.protocol = preset_protocol(config.ablation);
    result.report = evaluate(data.probe, data.gallery, result.state.model, eval_cfg);
    return result;
}

}  // namespace gmn
