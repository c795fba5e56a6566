#include "gmn/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace gmn {

ExperimentConfig::ExperimentConfig() {
    // Desk-scale preset: half the reference schedule on a 4-domain synthetic set.
    train.epochs = 60;
    train.dp_activation_epoch = 30;
    train.lr_decay_epochs = {20, 45};
}

SyntheticSpec ExperimentConfig::resolved_synthetic() const {
    SyntheticSpec s = data.synthetic;
    if (!data_seed_explicit) s.seed = seed;
    return s;
}

TrainConfig ExperimentConfig::resolved_train_config() const {
    TrainConfig t = train;
    if (!train_seed_explicit) t.seed = seed;
    t.use_mnet = ablation.use_mnet;
    t.use_dp = ablation.use_dp;
    t.use_pic = ablation.use_pic;
    return t;
}

void apply_ablation_preset(ExperimentConfig& config, const std::string& name) {
    if (name == "baseline") {
        config.ablation = {false, false, false};
    } else if (name == "a") {
        config.ablation = {true, false, false};
    } else if (name == "ab") {
        config.ablation = {true, true, false};
    } else if (name == "abc" || name == "full") {
        config.ablation = {true, true, true};
    } else {
        throw ConfigError("unknown ablation preset '" + name + "' (baseline, a, ab, abc)");
    }
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: " + where + ": expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: " + where + ": expected a number, got '" + v + "'");
    }
}

long long parse_int(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: " + where + ": expected an integer, got '" + v + "'");
    }
}

std::vector<int> parse_int_list(const std::string& v, const std::string& where) {
    std::vector<int> out;
    std::string item;
    std::istringstream ss(v);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(static_cast<int>(parse_int(item, where)));
    }
    return out;
}

PairOp parse_pair_op(const std::string& v, const std::string& where) {
    if (v == "squared_diff") return PairOp::SquaredDiff;
    if (v == "abs") return PairOp::Abs;
    if (v == "mul") return PairOp::Mul;
    if (v == "add") return PairOp::Add;
    throw ConfigError("config: " + where + ": unknown pair op '" + v + "'");
}

void set_value(ExperimentConfig& c, const std::string& section, const std::string& key,
               const std::string& value) {
    const std::string where = section + "." + key;
    if (section == "experiment") {
        if (key == "seed") {
            c.seed = static_cast<std::uint64_t>(parse_int(value, where));
            return;
        }
        if (key == "out_dir") {
            c.out_dir = value;
            return;
        }
    } else if (section == "data") {
        auto& s = c.data.synthetic;
        if (key == "num_domains") { s.num_domains = static_cast<int>(parse_int(value, where)); return; }
        if (key == "identities_per_domain") { s.identities_per_domain = static_cast<int>(parse_int(value, where)); return; }
        if (key == "records_per_identity") { s.records_per_identity = static_cast<int>(parse_int(value, where)); return; }
        if (key == "d_in") { s.d_in = static_cast<int>(parse_int(value, where)); return; }
        if (key == "domain_shift_scale") { s.domain_shift_scale = parse_double(value, where); return; }
        if (key == "identity_scale") { s.identity_scale = parse_double(value, where); return; }
        if (key == "noise_scale") { s.noise_scale = parse_double(value, where); return; }
        if (key == "cameras_per_domain") { s.cameras_per_domain = static_cast<int>(parse_int(value, where)); return; }
        if (key == "seed") {
            s.seed = static_cast<std::uint64_t>(parse_int(value, where));
            c.data_seed_explicit = true;
            return;
        }
        if (key == "train_path") { c.data.train_path = value; return; }
        if (key == "probe_path") { c.data.probe_path = value; return; }
        if (key == "gallery_path") { c.data.gallery_path = value; return; }
        if (key == "probe_fraction") { c.data.probe_fraction = parse_double(value, where); return; }
        if (key == "format") {
            if (value == "text") { c.data.format = FileFormat::Text; return; }
            if (value == "binary") { c.data.format = FileFormat::Binary; return; }
            throw ConfigError("config: " + where + ": expected text or binary");
        }
    } else if (section == "train") {
        auto& t = c.train;
        if (key == "epochs") { t.epochs = static_cast<int>(parse_int(value, where)); return; }
        if (key == "dp_activation_epoch") { t.dp_activation_epoch = static_cast<int>(parse_int(value, where)); return; }
        if (key == "dp_deactivation_epoch") { t.dp_deactivation_epoch = static_cast<int>(parse_int(value, where)); return; }
        if (key == "identities_per_batch") { t.identities_per_batch = static_cast<int>(parse_int(value, where)); return; }
        if (key == "samples_per_identity") { t.samples_per_identity = static_cast<int>(parse_int(value, where)); return; }
        if (key == "base_lr") { t.base_lr = parse_double(value, where); return; }
        if (key == "lr_decay_epochs") { t.lr_decay_epochs = parse_int_list(value, where); return; }
        if (key == "lr_decay_factor") { t.lr_decay_factor = parse_double(value, where); return; }
        if (key == "lambda") { t.lambda = parse_double(value, where); return; }
        if (key == "dp_rate") { t.dp.rate = parse_double(value, where); return; }
        if (key == "dp_inverted_scaling") { t.dp.inverted_scaling = parse_bool(value, where); return; }
        if (key == "pair_scheme") {
            if (value == "random") { t.pair_scheme.variant = NegativeSampling::Random; return; }
            if (value == "inter_domain") { t.pair_scheme.variant = NegativeSampling::InterDomain; return; }
            if (value == "intra_domain") { t.pair_scheme.variant = NegativeSampling::IntraDomain; return; }
            throw ConfigError("config: " + where + ": unknown sampling scheme '" + value + "'");
        }
        if (key == "negatives_per_positive") { t.pair_scheme.negatives_per_positive = static_cast<int>(parse_int(value, where)); return; }
        if (key == "pair_op") { t.pair_op = parse_pair_op(value, where); return; }
        if (key == "triplet_margin") { t.triplet_margin = parse_double(value, where); return; }
        if (key == "seed") {
            t.seed = static_cast<std::uint64_t>(parse_int(value, where));
            c.train_seed_explicit = true;
            return;
        }
        if (key == "optimizer") {
            if (value == "adam") { t.optimizer = OptimizerKind::Adam; return; }
            if (value == "sgd") { t.optimizer = OptimizerKind::Sgd; return; }
            throw ConfigError("config: " + where + ": expected adam or sgd");
        }
        if (key == "adam_beta1") { t.adam_beta1 = parse_double(value, where); return; }
        if (key == "adam_beta2") { t.adam_beta2 = parse_double(value, where); return; }
        if (key == "adam_eps") { t.adam_eps = parse_double(value, where); return; }
        if (key == "encoder_dims") { t.encoder_dims = parse_int_list(value, where); return; }
        if (key == "dp_site") { t.dp_site = static_cast<int>(parse_int(value, where)); return; }
        if (key == "mnet_hidden") { t.mnet_hidden = static_cast<int>(parse_int(value, where)); return; }
        if (key == "detach_gmn") { t.detach_gmn_from_encoder = parse_bool(value, where); return; }
    } else if (section == "eval") {
        auto& e = c.eval;
        if (key == "protocol") {
            if (value == "feature_euclidean") { e.protocol = EvalProtocol::FeatureEuclidean; return; }
            if (value == "feature_cosine") { e.protocol = EvalProtocol::FeatureCosine; return; }
            if (value == "mnet") { e.protocol = EvalProtocol::MNet; return; }
            throw ConfigError("config: " + where + ": unknown protocol '" + value + "'");
        }
        if (key == "pair_op") { e.pair_op = parse_pair_op(value, where); return; }
        if (key == "tile_size") { e.tile_size = static_cast<int>(parse_int(value, where)); return; }
        if (key == "cross_camera_filter") { e.cross_camera_filter = parse_bool(value, where); return; }
        if (key == "ranks") { e.ranks = parse_int_list(value, where); return; }
        if (key == "normalize_features") { e.normalize_features = parse_bool(value, where); return; }
        if (key == "pin_single_thread") { e.pin_single_thread = parse_bool(value, where); return; }
    } else if (section == "ablation") {
        if (key == "use_mnet") { c.ablation.use_mnet = parse_bool(value, where); return; }
        if (key == "use_dp") { c.ablation.use_dp = parse_bool(value, where); return; }
        if (key == "use_pic") { c.ablation.use_pic = parse_bool(value, where); return; }
        if (key == "preset") { apply_ablation_preset(c, value); return; }
    } else if (section == "diagnose") {
        if (key == "pairs_per_domain") { c.diagnose.pairs_per_domain = static_cast<int>(parse_int(value, where)); return; }
    } else {
        throw ConfigError("config: unknown section [" + section + "]");
    }
    throw ConfigError("config: unknown key " + where);
}

}  // namespace

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    std::string line, section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": malformed section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": key outside any section");
        set_value(base, section, key, value);
    }
    return base;
}

void apply_override(ExperimentConfig& config, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + spec + "': expected section.key=value");
    const std::string path = trim(spec.substr(0, eq));
    const std::string value = trim(spec.substr(eq + 1));
    const auto dot = path.find('.');
    if (dot == std::string::npos)
        throw ConfigError("override '" + spec + "': expected section.key=value");
    set_value(config, path.substr(0, dot), path.substr(dot + 1), value);
}

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string dump_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "[experiment]\n";
    os << "seed = " << c.seed << "\n";
    os << "out_dir = " << c.out_dir << "\n\n";

    os << "[data]\n";
    const auto s = c.resolved_synthetic();
    os << "num_domains = " << s.num_domains << "\n";
    os << "identities_per_domain = " << s.identities_per_domain << "\n";
    os << "records_per_identity = " << s.records_per_identity << "\n";
    os << "d_in = " << s.d_in << "\n";
    os << "domain_shift_scale = " << fmt_double(s.domain_shift_scale) << "\n";
    os << "identity_scale = " << fmt_double(s.identity_scale) << "\n";
    os << "noise_scale = " << fmt_double(s.noise_scale) << "\n";
    os << "cameras_per_domain = " << s.cameras_per_domain << "\n";
    os << "seed = " << s.seed << "\n";
    if (!c.data.train_path.empty()) os << "train_path = " << c.data.train_path << "\n";
    if (!c.data.probe_path.empty()) os << "probe_path = " << c.data.probe_path << "\n";
    if (!c.data.gallery_path.empty()) os << "gallery_path = " << c.data.gallery_path << "\n";
    os << "probe_fraction = " << fmt_double(c.data.probe_fraction) << "\n";
    os << "format = " << (c.data.format == FileFormat::Binary ? "binary" : "text") << "\n\n";

    os << "[train]\n";
    const auto& t = c.train;
    os << "epochs = " << t.epochs << "\n";
    os << "dp_activation_epoch = " << t.dp_activation_epoch << "\n";
    if (t.dp_deactivation_epoch <= t.epochs)
        os << "dp_deactivation_epoch = " << t.dp_deactivation_epoch << "\n";
    os << "identities_per_batch = " << t.identities_per_batch << "\n";
    os << "samples_per_identity = " << t.samples_per_identity << "\n";
    os << "base_lr = " << fmt_double(t.base_lr) << "\n";
    os << "lr_decay_epochs = " << join_ints(t.lr_decay_epochs) << "\n";
    os << "lr_decay_factor = " << fmt_double(t.lr_decay_factor) << "\n";
    os << "lambda = " << fmt_double(t.lambda) << "\n";
    os << "dp_rate = " << fmt_double(t.dp.rate) << "\n";
    os << "dp_inverted_scaling = " << (t.dp.inverted_scaling ? "true" : "false") << "\n";
    os << "pair_scheme = " << sampling_name(t.pair_scheme.variant) << "\n";
    os << "negatives_per_positive = " << t.pair_scheme.negatives_per_positive << "\n";
    os << "pair_op = " << pair_op_name(t.pair_op) << "\n";
    os << "triplet_margin = " << fmt_double(t.triplet_margin) << "\n";
    os << "seed = " << (c.train_seed_explicit ? t.seed : c.seed) << "\n";
    os << "optimizer = " << (t.optimizer == OptimizerKind::Adam ? "adam" : "sgd") << "\n";
    os << "adam_beta1 = " << fmt_double(t.adam_beta1) << "\n";
    os << "adam_beta2 = " << fmt_double(t.adam_beta2) << "\n";
    os << "adam_eps = " << fmt_double(t.adam_eps) << "\n";
    os << "encoder_dims = " << join_ints(t.encoder_dims) << "\n";
    os << "dp_site = " << t.dp_site << "\n";
    os << "mnet_hidden = " << t.mnet_hidden << "\n";
    os << "detach_gmn = " << (t.detach_gmn_from_encoder ? "true" : "false") << "\n\n";

    os << "[eval]\n";
    const auto& e = c.eval;
    os << "protocol = " << protocol_name(e.protocol) << "\n";
    os << "pair_op = " << pair_op_name(e.pair_op) << "\n";
    os << "tile_size = " << e.tile_size << "\n";
    os << "cross_camera_filter = " << (e.cross_camera_filter ? "true" : "false") << "\n";
    os << "ranks = " << join_ints(e.ranks) << "\n";
    os << "normalize_features = " << (e.normalize_features ? "true" : "false") << "\n";
    os << "pin_single_thread = " << (e.pin_single_thread ? "true" : "false") << "\n\n";

    os << "[ablation]\n";
    os << "use_mnet = " << (c.ablation.use_mnet ? "true" : "false") << "\n";
    os << "use_dp = " << (c.ablation.use_dp ? "true" : "false") << "\n";
    os << "use_pic = " << (c.ablation.use_pic ? "true" : "false") << "\n\n";

    os << "[diagnose]\n";
    os << "pairs_per_domain = " << c.diagnose.pairs_per_domain << "\n";
    return os.str();
}

}  // namespace gmn
