// Command-line front end: generate / train / eval / ablate / diagnose / bench.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gmn;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::int64_t seed = -1;
    std::string preset;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Config file (key = value sections)");
    cmd->add_option("--set", opts.overrides, "Override a config value, e.g. --set train.epochs=10")
        ->take_all();
    cmd->add_option("--out", opts.out_dir, "Output directory (overrides experiment.out_dir)");
    cmd->add_option("--seed", opts.seed, "Master seed (overrides experiment.seed)");
    cmd->add_option("--preset", opts.preset, "Ablation preset: baseline, a, ab, abc");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig config;
    if (!opts.config_path.empty()) config = load_config_file(opts.config_path, config);
    for (const auto& s : opts.overrides) apply_override(config, s);
    if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
    if (opts.seed >= 0) config.seed = static_cast<std::uint64_t>(opts.seed);
    if (!opts.preset.empty()) apply_ablation_preset(config, opts.preset);
    return config;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << content;
    if (!os) throw IoError("write failed: " + path.string());
}

fs::path prepare_out_dir(const ExperimentConfig& config) {
    fs::path dir(config.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    write_text_file(dir / "config_used.cfg", dump_config(config));
    return dir;
}

std::string data_extension(FileFormat format) {
    return format == FileFormat::Binary ? ".gmne" : ".txt";
}

int cmd_generate(const ExperimentConfig& config) {
    const auto dir = prepare_out_dir(config);
    const auto bundle = prepare_data(config);
    const auto ext = data_extension(config.data.format);
    save_embeddings(bundle.train, (dir / ("train" + ext)).string(), config.data.format);
    save_embeddings(bundle.probe, (dir / ("probe" + ext)).string(), config.data.format);
    save_embeddings(bundle.gallery, (dir / ("gallery" + ext)).string(), config.data.format);
    std::cout << "wrote " << bundle.train.size() << " train / " << bundle.probe.size()
              << " probe / " << bundle.gallery.size() << " gallery records to " << dir.string()
              << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& config, const std::string& resume_path, int stop_after) {
    const auto dir = prepare_out_dir(config);
    const auto bundle = prepare_data(config);

    TrainState state;
    std::ofstream log;
    if (resume_path.empty()) {
        state = init_training(config.resolved_train_config(), bundle.train);
        log.open(dir / "train_log.tsv");
        if (!log) throw IoError("cannot open train log");
        write_log_header(log);
    } else {
        state = load_checkpoint(resume_path);
        log.open(dir / "train_log.tsv", std::ios::app);
        if (!log) throw IoError("cannot open train log");
        std::cout << "resuming from epoch " << state.epoch << "\n";
    }

    const int until = stop_after > 0 ? std::min(state.epoch + stop_after, state.config.epochs)
                                     : state.config.epochs;
    train_epochs(state, bundle.train, until, &log);

    const auto ckpt = dir / "checkpoint.gmnc";
    save_checkpoint(state, ckpt.string());
    std::cout << model_summary(state.model);
    if (!state.history.empty()) {
        const auto& last = state.history.back().losses;
        std::printf("epoch %d: l_cls %.4f  l_tri %.4f  l_gmn %.4f  l_pic %.4f  total %.4f\n",
                    state.epoch - 1, last.l_cls, last.l_tri, last.l_gmn,
                    last.l_pic_pos + last.l_pic_neg, last.total);
    }
    std::cout << "checkpoint: " << ckpt.string() << "\n";
    return 0;
}

int cmd_eval(const ExperimentConfig& config, const std::string& checkpoint,
             const std::string& probe_path, const std::string& gallery_path,
             const std::string& protocol_arg) {
    const auto dir = prepare_out_dir(config);
    const ModelParams model = load_model(checkpoint);

    auto resolve_path = [&](const std::string& flag, const std::string& cfg_path,
                            const char* stem) -> std::string {
        if (!flag.empty()) return flag;
        if (!cfg_path.empty()) return cfg_path;
        return (dir / (stem + data_extension(config.data.format))).string();
    };
    const auto probe_file = resolve_path(probe_path, config.data.probe_path, "probe");
    const auto gallery_file = resolve_path(gallery_path, config.data.gallery_path, "gallery");
    const Dataset probe = load_embeddings(probe_file, detect_format(probe_file), DatasetRole::Probe);
    const Dataset gallery =
        load_embeddings(gallery_file, detect_format(gallery_file), DatasetRole::Gallery);

    std::vector<EvalProtocol> protocols;
    if (protocol_arg == "auto") {
        protocols.push_back(EvalProtocol::FeatureEuclidean);
        if (model.mnet) protocols.push_back(EvalProtocol::MNet);
    } else if (protocol_arg == "feature_euclidean") {
        protocols.push_back(EvalProtocol::FeatureEuclidean);
    } else if (protocol_arg == "feature_cosine") {
        protocols.push_back(EvalProtocol::FeatureCosine);
    } else if (protocol_arg == "mnet") {
        protocols.push_back(EvalProtocol::MNet);
    } else {
        throw ConfigError("eval: unknown protocol '" + protocol_arg + "'");
    }

    std::ostringstream table;
    table << "protocol            mAP     ";
    for (int r : config.eval.ranks) table << " R" << r << "    ";
    table << "\n";
    for (EvalProtocol protocol : protocols) {
        EvalConfig eval_cfg = config.eval;
        eval_cfg.protocol = protocol;
        const EvalReport report = evaluate(probe, gallery, model, eval_cfg);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%-19s %-7.4f", protocol_name(protocol), report.mAP);
        table << buf;
        for (int r : config.eval.ranks) {
            std::snprintf(buf, sizeof(buf), " %-6.4f", report.cmc.at(r));
            table << buf;
        }
        table << "\n";
        const std::string stem = std::string("eval_") + protocol_name(protocol);
        write_text_file(dir / (stem + ".tsv"), format_eval_report(report));
        write_text_file(dir / (stem + ".json"), eval_report_json(report));
    }
    std::cout << table.str();
    write_text_file(dir / "eval_table.txt", table.str());
    return 0;
}

struct AblationRow {
    std::string label;
    EvalReport report;
};

std::string ablation_table(const std::vector<AblationRow>& rows, const std::vector<int>& ranks) {
    std::ostringstream os;
    os << "configuration            mAP     ";
    for (int r : ranks) os << " R" << r << "    ";
    os << "\n";
    for (const auto& row : rows) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%-24s %-7.4f", row.label.c_str(), row.report.mAP);
        os << buf;
        for (int r : ranks) {
            std::snprintf(buf, sizeof(buf), " %-6.4f", row.report.cmc.at(r));
            os << buf;
        }
        os << "\n";
    }
    return os.str();
}

int cmd_ablate(const ExperimentConfig& base, const std::vector<std::string>& sweeps) {
    const auto dir = prepare_out_dir(base);
    const auto bundle = prepare_data(base);

    std::vector<AblationRow> rows;
    std::vector<std::int64_t> first_ids;
    const std::vector<std::pair<std::string, AblationConfig>> presets = {
        {"baseline", {false, false, false}},
        {"+A", {true, false, false}},
        {"+A+B", {true, true, false}},
        {"+A+B+C", {true, true, true}},
    };
    for (const auto& [name, switches] : presets) {
        ExperimentConfig cfg = base;
        cfg.ablation = switches;
        const auto result = run_preset(cfg, name, bundle);
        if (first_ids.empty()) {
            first_ids = result.first_batch_sample_ids;
        } else if (first_ids != result.first_batch_sample_ids) {
            throw Error("ablate: presets diverged on the first batch draw");
        }
        rows.push_back({name, result.report});
    }
    std::cout << "presets share the first batch draw (" << first_ids.size() << " sample ids)\n";

    for (const auto& sweep : sweeps) {
        ExperimentConfig cfg = base;
        cfg.ablation = {true, true, true};
        if (sweep == "scheme") {
            for (auto v : {NegativeSampling::Random, NegativeSampling::InterDomain,
                           NegativeSampling::IntraDomain}) {
                cfg.train.pair_scheme.variant = v;
                rows.push_back({std::string("scheme=") + sampling_name(v),
                                run_preset(cfg, sweep, bundle).report});
            }
        } else if (sweep == "op") {
            for (auto v : {PairOp::SquaredDiff, PairOp::Abs, PairOp::Mul, PairOp::Add}) {
                cfg.train.pair_op = v;
                cfg.eval.pair_op = v;
                rows.push_back(
                    {std::string("op=") + pair_op_name(v), run_preset(cfg, sweep, bundle).report});
            }
        } else if (sweep == "lambda") {
            for (double v : {0.1, 0.5, 1.0, 1.5, 2.0}) {
                cfg.train.lambda = v;
                char label[32];
                std::snprintf(label, sizeof(label), "lambda=%.1f", v);
                rows.push_back({label, run_preset(cfg, sweep, bundle).report});
            }
        } else if (sweep == "dp_site") {
            for (int site = 0; site < static_cast<int>(base.train.encoder_dims.size()); ++site) {
                cfg.train.dp_site = site;
                rows.push_back({"dp_site=" + std::to_string(site),
                                run_preset(cfg, sweep, bundle).report});
            }
        } else {
            throw ConfigError("ablate: unknown sweep '" + sweep +
                              "' (scheme, op, lambda, dp_site)");
        }
    }

    const auto table = ablation_table(rows, base.eval.ranks);
    std::cout << table;
    write_text_file(dir / "ablation.txt", table);
    return 0;
}

int cmd_diagnose(const ExperimentConfig& config) {
    const auto dir = prepare_out_dir(config);
    Dataset data;
    if (config.data.uses_files()) {
        data = load_embeddings(config.data.train_path, config.data.format, DatasetRole::Train);
    } else {
        data = generate_synthetic(config.resolved_synthetic());
    }
    const auto report = domain_gap_diagnostic(data, config.diagnose.pairs_per_domain, config.seed);
    std::cout << format_domain_gap_report(report);
    write_text_file(dir / "domain_gap.tsv", format_domain_gap_report(report));
    write_text_file(dir / "domain_gap.json", domain_gap_report_json(report));
    return 0;
}

// Random embeddings shaped for retrieval timing: identities cycle so every
// probe has positives, cameras split so the junk filter keeps them.
Dataset bench_dataset(int n, int d, int num_identities, int camera, std::uint64_t seed,
                      DatasetRole role, std::int64_t id_offset) {
    RngStream rng(RngStream::mix(seed));
    std::vector<SampleRecord> records(n);
    for (int i = 0; i < n; ++i) {
        records[i].embedding.resize(d);
        for (auto& v : records[i].embedding) v = rng.normal();
        records[i].identity = i % num_identities;
        records[i].domain = 0;
        records[i].camera = camera;
        records[i].sample_id = id_offset + i;
    }
    return Dataset::from_records(std::move(records), role);
}

int cmd_bench(const ExperimentConfig& config, std::vector<int> gallery_sizes, int num_probes,
              int repeats) {
    const auto dir = prepare_out_dir(config);
    if (gallery_sizes.empty()) gallery_sizes = {1000, 2000, 4000, 8000};

    const int d = config.data.synthetic.d_in;
    RngStream init = RngStream::derive(config.seed, streams::kInit);
    ModelParams model;
    model.encoder = make_encoder(d, config.train.encoder_dims, config.train.dp_site,
                                 /*num_classes=*/8, init);
    const int emb = model.encoder.embedding_dim();
    const int hidden =
        config.train.mnet_hidden > 0 ? config.train.mnet_hidden : default_hidden_width(emb);
    model.mnet = make_metric_net(emb, hidden, init);

    std::ostringstream out;
    out << model_summary(model);
    const double ratio = static_cast<double>(mnet_param_count(*model.mnet)) /
                         static_cast<double>(encoder_param_count(model.encoder));
    char line[256];
    std::snprintf(line, sizeof(line), "metric net / encoder parameter ratio: %.3f\n\n", ratio);
    out << line;

    const int num_identities = std::max(8, num_probes / 2);
    const Dataset probe =
        bench_dataset(num_probes, d, num_identities, /*camera=*/0, config.seed, DatasetRole::Probe, 0);

    std::vector<double> xs, ys;  // gallery size vs mnet similarity seconds
    double mnet_total_at_max = 0.0, feature_total_at_max = 0.0;
    for (int ng : gallery_sizes) {
        const Dataset gallery = bench_dataset(ng, d, num_identities, /*camera=*/1, config.seed + 1,
                                              DatasetRole::Gallery, num_probes);
        const auto timing =
            timing_compare(probe, gallery, model,
                           {EvalProtocol::FeatureEuclidean, EvalProtocol::MNet}, repeats, config.eval);
        std::snprintf(line, sizeof(line), "gallery size %d (probes %d, repeats %d)\n", ng,
                      num_probes, repeats);
        out << line << format_timing_table(timing) << "\n";
        for (const auto& row : timing) {
            if (row.protocol == EvalProtocol::MNet) {
                xs.push_back(ng);
                ys.push_back(row.similarity_seconds);
                mnet_total_at_max = row.similarity_seconds + row.ranking_seconds;
            } else if (row.protocol == EvalProtocol::FeatureEuclidean) {
                feature_total_at_max = row.similarity_seconds + row.ranking_seconds;
            }
        }
    }

    // Least-squares fit of similarity time against gallery size.
    if (xs.size() >= 2) {
        const auto n = static_cast<double>(xs.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
            syy += ys[i] * ys[i];
        }
        const double cov = n * sxy - sx * sy;
        const double vx = n * sxx - sx * sx;
        const double vy = n * syy - sy * sy;
        const double r2 = vy > 0 ? (cov * cov) / (vx * vy) : 1.0;
        std::snprintf(line, sizeof(line),
                      "mnet similarity time vs gallery size: linear fit R^2 = %.4f\n", r2);
        out << line;
        std::snprintf(line, sizeof(line),
                      "total evaluation at largest gallery: mnet %.4fs vs feature %.4fs (%.2fx)\n",
                      mnet_total_at_max, feature_total_at_max,
                      feature_total_at_max > 0 ? mnet_total_at_max / feature_total_at_max : 0.0);
        out << line;
    }

    std::cout << out.str();
    write_text_file(dir / "bench.txt", out.str());
    return 0;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Cross-domain retrieval toolkit: metric network over sample-pair features"};
    app.require_subcommand(1);

    CommonOpts gen_opts, train_opts, eval_opts, ablate_opts, diag_opts, bench_opts;

    auto* gen = app.add_subcommand("generate", "Generate synthetic train/probe/gallery files");
    add_common(gen, gen_opts);

    auto* tr = app.add_subcommand("train", "Train encoder + metric net");
    add_common(tr, train_opts);
    std::string resume_path;
    int stop_after = 0;
    tr->add_option("--resume", resume_path, "Resume from a checkpoint");
    tr->add_option("--stop-after", stop_after, "Stop after N more epochs (for interrupt/resume)");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on probe/gallery files");
    add_common(ev, eval_opts);
    std::string checkpoint, probe_path, gallery_path, protocol_arg = "auto";
    ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    ev->add_option("--probe", probe_path, "Probe embeddings file");
    ev->add_option("--gallery", gallery_path, "Gallery embeddings file");
    ev->add_option("--protocol", protocol_arg,
                   "auto | feature_euclidean | feature_cosine | mnet (auto = all available)");

    auto* ab = app.add_subcommand("ablate", "Run the module ablation presets and optional sweeps");
    add_common(ab, ablate_opts);
    std::vector<std::string> sweeps;
    ab->add_option("--sweep", sweeps, "Extra sweeps: scheme, op, lambda, dp_site")->take_all();

    auto* dg = app.add_subcommand("diagnose", "Domain-separability diagnostic on a dataset");
    add_common(dg, diag_opts);

    auto* be = app.add_subcommand("bench", "Time feature vs metric-net evaluation");
    add_common(be, bench_opts);
    std::vector<int> gallery_sizes;
    int num_probes = 64, repeats = 3;
    be->add_option("--gallery-sizes", gallery_sizes, "Gallery sizes to time")->take_all();
    be->add_option("--probes", num_probes, "Probe count");
    be->add_option("--repeats", repeats, "Repeats per measurement (median reported)");

    CLI11_PARSE(app, argc, argv);

    if (*gen) return cmd_generate(resolve_config(gen_opts));
    if (*tr) return cmd_train(resolve_config(train_opts), resume_path, stop_after);
    if (*ev)
        return cmd_eval(resolve_config(eval_opts), checkpoint, probe_path, gallery_path,
                        protocol_arg);
    if (*ab) return cmd_ablate(resolve_config(ablate_opts), sweeps);
    if (*dg) return cmd_diagnose(resolve_config(diag_opts));
    if (*be) return cmd_bench(resolve_config(bench_opts), gallery_sizes, num_probes, repeats);
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
