#include "gmn/data_model.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "gmn/rng.hpp"

namespace gmn {

namespace {

int count_distinct(const std::vector<SampleRecord>& records, int SampleRecord::*field) {
    std::set<int> seen;
    for (const auto& r : records) seen.insert(r.*field);
    return static_cast<int>(seen.size());
}

}  // namespace

Dataset Dataset::from_records(std::vector<SampleRecord> records, DatasetRole role) {
    Dataset ds;
    ds.role = role;
    if (!records.empty()) {
        ds.d_in = static_cast<int>(records.front().embedding.size());
        std::set<std::int64_t> ids;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& r = records[i];
            if (static_cast<int>(r.embedding.size()) != ds.d_in) {
                throw DataError("record " + std::to_string(i) + ": embedding dimension " +
                                std::to_string(r.embedding.size()) + " != dataset d_in " +
                                std::to_string(ds.d_in));
            }
            if (!ids.insert(r.sample_id).second) {
                throw DataError("record " + std::to_string(i) + ": duplicate sample_id " +
                                std::to_string(r.sample_id));
            }
        }
        ds.num_identities = count_distinct(records, &SampleRecord::identity);
        ds.num_domains = count_distinct(records, &SampleRecord::domain);
    }
    ds.records = std::move(records);
    return ds;
}

std::vector<int> Dataset::identity_labels() const {
    std::vector<int> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) out[i] = records[i].identity;
    return out;
}

std::vector<int> Dataset::domain_labels() const {
    std::vector<int> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) out[i] = records[i].domain;
    return out;
}

int Dataset::max_identity() const {
    int m = -1;
    for (const auto& r : records) m = std::max(m, r.identity);
    return m;
}

Dataset Dataset::filter_domains(const std::vector<int>& domains, DatasetRole new_role) const {
    std::vector<SampleRecord> out;
    for (const auto& r : records) {
        if (std::find(domains.begin(), domains.end(), r.domain) != domains.end()) out.push_back(r);
    }
    return Dataset::from_records(std::move(out), new_role);
}

Matrix Dataset::embedding_matrix() const {
    Matrix m(static_cast<int>(records.size()), d_in);
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::copy(records[i].embedding.begin(), records[i].embedding.end(),
                  m.data.begin() + static_cast<std::ptrdiff_t>(i) * d_in);
    }
    return m;
}

void SyntheticSpec::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ConfigError(std::string("synthetic spec: ") + name + " must be >= 1");
    };
    positive(num_domains, "num_domains");
    positive(identities_per_domain, "identities_per_domain");
    positive(records_per_identity, "records_per_identity");
    positive(cameras_per_domain, "cameras_per_domain");
    if (d_in < 2) throw ConfigError("synthetic spec: d_in must be >= 2");
    if (domain_shift_scale < 0) throw ConfigError("synthetic spec: domain_shift_scale must be >= 0");
    if (identity_scale < 0) throw ConfigError("synthetic spec: identity_scale must be >= 0");
    if (noise_scale < 0) throw ConfigError("synthetic spec: noise_scale must be >= 0");
    if (identity_scale <= noise_scale) {
        std::cerr << "warning: synthetic spec has identity_scale <= noise_scale; "
                     "identities may not be separable\n";
    }
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    RngStream rng(RngStream::mix(spec.seed));

    const int d = spec.d_in;
    const int ids = spec.identities_per_domain;

    // The last half of the coordinates is the style subspace: identity
    // centers are weak there, and the per-domain transform acts only there.
    // Each domain rescales and mixes the style block with its own random
    // matrix and shifts it by its own offset, so a held-out domain re-weights
    // those coordinates in a way never seen in training.
    const int style_start = d / 2;
    const int q = d - style_start;

    std::vector<std::vector<double>> centers(ids, std::vector<double>(d));
    for (auto& c : centers)
        for (int v = 0; v < d; ++v)
            c[v] = rng.normal(0.0, v < style_start ? spec.identity_scale : 0.25 * spec.identity_scale);

    const double mix_sigma = 1.0 / std::sqrt(static_cast<double>(q));
    std::vector<Matrix> style_mix(spec.num_domains);      // q x q block of A_k - I
    std::vector<std::vector<double>> offset(spec.num_domains, std::vector<double>(q));
    for (int k = 0; k < spec.num_domains; ++k) {
        style_mix[k] = Matrix(q, q);
        for (auto& v : style_mix[k].data) v = rng.normal(0.0, mix_sigma);
        for (auto& v : offset[k]) v = rng.normal(0.0, 1.0);  // scaled by shift below
    }

    std::vector<SampleRecord> records;
    records.reserve(static_cast<std::size_t>(spec.num_domains) * ids * spec.records_per_identity);
    std::int64_t next_id = 0;
    std::vector<double> point(d), styled(d);
    for (int k = 0; k < spec.num_domains; ++k) {
        for (int i = 0; i < ids; ++i) {
            for (int r = 0; r < spec.records_per_identity; ++r) {
                for (int c = 0; c < d; ++c) point[c] = centers[i][c] + rng.normal(0.0, spec.noise_scale);
                std::copy(point.begin(), point.end(), styled.begin());
                for (int row = 0; row < q; ++row) {
                    double acc = 0.0;
                    const double* mr = style_mix[k].data.data() + static_cast<std::size_t>(row) * q;
                    for (int c = 0; c < q; ++c) acc += mr[c] * point[style_start + c];
                    styled[style_start + row] +=
                        spec.domain_shift_scale * (acc + offset[k][row]);
                }
                SampleRecord rec;
                rec.embedding = styled;
                rec.identity = i;
                rec.domain = k;
                rec.camera = k * spec.cameras_per_domain + (r % spec.cameras_per_domain);
                rec.sample_id = next_id++;
                records.push_back(std::move(rec));
            }
        }
    }
    return Dataset::from_records(std::move(records), DatasetRole::Train);
}

std::pair<Dataset, Dataset> split_probe_gallery(const Dataset& dataset, double probe_fraction,
                                                std::uint64_t seed) {
    if (!(probe_fraction > 0.0 && probe_fraction < 1.0))
        throw ConfigError("split: probe_fraction must be in (0, 1)");

    std::map<int, std::vector<std::size_t>> by_identity;
    for (std::size_t i = 0; i < dataset.records.size(); ++i)
        by_identity[dataset.records[i].identity].push_back(i);

    std::vector<int> singletons;
    for (const auto& [id, rows] : by_identity)
        if (rows.size() < 2) singletons.push_back(id);
    if (!singletons.empty()) {
        std::string msg = "split: identities with a single record:";
        for (int id : singletons) msg += " " + std::to_string(id);
        throw DataError(msg);
    }

    RngStream rng = RngStream::derive(seed, streams::kSplit);
    std::vector<SampleRecord> probe, gallery;
    for (const auto& [id, rows] : by_identity) {
        std::vector<std::size_t> order = rows;
        rng.shuffle(order);
        const auto n = order.size();
        auto take = static_cast<std::size_t>(std::llround(probe_fraction * static_cast<double>(n)));
        take = std::clamp<std::size_t>(take, 1, n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            (i < take ? probe : gallery).push_back(dataset.records[order[i]]);
        }
    }
    return {Dataset::from_records(std::move(probe), DatasetRole::Probe),
            Dataset::from_records(std::move(gallery), DatasetRole::Gallery)};
}

namespace {

constexpr char kBinaryMagic[4] = {'G', 'M', 'N', 'E'};
constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_raw(std::istream& is, T& v, const char* what) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError(std::string("embedding file truncated while reading ") + what);
}

void save_text(const Dataset& ds, std::ostream& os) {
    os << "gmne-text " << kFormatVersion << " " << ds.d_in << " " << ds.records.size() << "\n";
    char buf[64];
    for (const auto& r : ds.records) {
        os << r.sample_id << " " << r.identity << " " << r.domain << " " << r.camera;
        for (double v : r.embedding) {
            std::snprintf(buf, sizeof(buf), " %.17g", v);
            os << buf;
        }
        os << "\n";
    }
}

Dataset load_text(std::istream& is, DatasetRole role) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("embedding file: empty file");
    std::istringstream header(line);
    std::string tag;
    std::uint32_t version = 0;
    int d_in = 0;
    std::size_t count = 0;
    if (!(header >> tag >> version >> d_in >> count) || tag != "gmne-text")
        throw DataError("embedding file: malformed header line");
    if (version != kFormatVersion)
        throw DataError("embedding file: unsupported version " + std::to_string(version));
    if (d_in < 1) throw DataError("embedding file: header d_in must be >= 1");

    std::vector<SampleRecord> records;
    records.reserve(count);
    std::size_t row = 0;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ls(line);
        SampleRecord rec;
        if (!(ls >> rec.sample_id >> rec.identity >> rec.domain >> rec.camera))
            throw DataError("embedding file row " + std::to_string(row) + ": malformed labels");
        rec.embedding.resize(d_in);
        for (int c = 0; c < d_in; ++c) {
            if (!(ls >> rec.embedding[c]))
                throw DataError("embedding file row " + std::to_string(row) + ": expected " +
                                std::to_string(d_in) + " values, got " + std::to_string(c));
        }
        double extra;
        if (ls >> extra)
            throw DataError("embedding file row " + std::to_string(row) + ": more than " +
                            std::to_string(d_in) + " values");
        records.push_back(std::move(rec));
    }
    if (records.size() != count)
        throw DataError("embedding file: header claims " + std::to_string(count) + " records, found " +
                        std::to_string(records.size()));
    return Dataset::from_records(std::move(records), role);
}

void save_binary(const Dataset& ds, std::ostream& os) {
    os.write(kBinaryMagic, 4);
    write_raw(os, kFormatVersion);
    write_raw(os, static_cast<std::uint32_t>(ds.d_in));
    write_raw(os, static_cast<std::uint64_t>(ds.records.size()));
    for (const auto& r : ds.records) {
        write_raw(os, static_cast<std::int64_t>(r.sample_id));
        write_raw(os, static_cast<std::int32_t>(r.identity));
        write_raw(os, static_cast<std::int32_t>(r.domain));
        write_raw(os, static_cast<std::int32_t>(r.camera));
        os.write(reinterpret_cast<const char*>(r.embedding.data()),
                 static_cast<std::streamsize>(r.embedding.size() * sizeof(double)));
    }
}

Dataset load_binary(std::istream& is, DatasetRole role) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kBinaryMagic, 4) != 0)
        throw DataError("embedding file: bad magic, not a GMNE file");
    std::uint32_t version = 0, d_in = 0;
    std::uint64_t count = 0;
    read_raw(is, version, "version");
    if (version != kFormatVersion)
        throw DataError("embedding file: unsupported version " + std::to_string(version));
    read_raw(is, d_in, "d_in");
    read_raw(is, count, "record count");
    if (d_in < 1) throw DataError("embedding file: header d_in must be >= 1");

    std::vector<SampleRecord> records;
    records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string where = "record " + std::to_string(i);
        SampleRecord rec;
        std::int64_t sid;
        std::int32_t identity, domain, camera;
        read_raw(is, sid, where.c_str());
        read_raw(is, identity, where.c_str());
        read_raw(is, domain, where.c_str());
        read_raw(is, camera, where.c_str());
        rec.sample_id = sid;
        rec.identity = identity;
        rec.domain = domain;
        rec.camera = camera;
        rec.embedding.resize(d_in);
        is.read(reinterpret_cast<char*>(rec.embedding.data()),
                static_cast<std::streamsize>(d_in * sizeof(double)));
        if (!is) throw DataError("embedding file truncated in " + where);
        records.push_back(std::move(rec));
    }
    return Dataset::from_records(std::move(records), role);
}

}  // namespace

void save_embeddings(const Dataset& dataset, const std::string& path, FileFormat format) {
    std::ofstream os(path, format == FileFormat::Binary ? std::ios::binary : std::ios::out);
    if (!os) throw IoError("cannot open for writing: " + path);
    if (format == FileFormat::Binary)
        save_binary(dataset, os);
    else
        save_text(dataset, os);
    if (!os) throw IoError("write failed: " + path);
}

Dataset load_embeddings(const std::string& path, FileFormat format, DatasetRole role) {
    std::ifstream is(path, format == FileFormat::Binary ? std::ios::binary : std::ios::in);
    if (!is) throw IoError("cannot open: " + path);
    return format == FileFormat::Binary ? load_binary(is, role) : load_text(is, role);
}

FileFormat detect_format(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[4] = {};
    is.read(magic, 4);
    return (is && std::memcmp(magic, kBinaryMagic, 4) == 0) ? FileFormat::Binary : FileFormat::Text;
}

}  // namespace gmn
