#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gmn/errors.hpp"
#include "gmn/matrix.hpp"

namespace gmn {

struct SampleRecord {
    std::vector<double> embedding;
    int identity = 0;
    int domain = 0;
    int camera = 0;
    std::int64_t sample_id = 0;
};

enum class DatasetRole { Train, Probe, Gallery };

struct Dataset {
    std::vector<SampleRecord> records;
    int d_in = 0;
    int num_identities = 0;
    int num_domains = 0;
    DatasetRole role = DatasetRole::Train;

    // Validates dimensions and sample_id uniqueness, computes label counts.
    static Dataset from_records(std::vector<SampleRecord> records, DatasetRole role);

    std::size_t size() const { return records.size(); }

    std::vector<int> identity_labels() const;
    std::vector<int> domain_labels() const;
    int max_identity() const;

    Dataset filter_domains(const std::vector<int>& domains, DatasetRole new_role) const;

    // Record embeddings stacked into a matrix, row per record.
    Matrix embedding_matrix() const;
};

// Multi-domain synthetic embeddings. Identity labels are shared across
// domains: identity i has one fixed center c_i, and domain k renders it
// through a per-domain affine style transform. A record of identity i in
// domain k is A_k * (c_i + noise) + b_k, with A_k = I + domain_shift_scale * M_k
// (M_k a random mixing matrix) and b_k = domain_shift_scale * u_k.
struct SyntheticSpec {
    int num_domains = 4;
    int identities_per_domain = 32;
    int records_per_identity = 10;  // per domain
    int d_in = 32;
    double domain_shift_scale = 1.0;
    double identity_scale = 1.0;
    double noise_scale = 0.3;
    int cameras_per_domain = 4;
    std::uint64_t seed = 7;

    void validate() const;  // throws ConfigError naming the offending field
};

Dataset generate_synthetic(const SyntheticSpec& spec);

// Per-identity split; every identity contributes at least one record to each
// side. Requires >= 2 records per identity.
std::pair<Dataset, Dataset> split_probe_gallery(const Dataset& dataset, double probe_fraction,
                                                std::uint64_t seed);

enum class FileFormat { Text, Binary };

// Text format, one record per line after a one-line header:
//   gmne-text 1 <d_in> <record_count>
//   <sample_id> <identity> <domain> <camera> <v0> ... <v_{d_in-1}>
// Values are printed with 17 significant digits, so the round trip is
// bit-exact. Binary format (little-endian):
//   magic "GMNE", version u32, d_in u32, record count u64,
//   then per record: sample_id i64, identity i32, domain i32, camera i32,
//   embedding f64[d_in].
void save_embeddings(const Dataset& dataset, const std::string& path, FileFormat format);
Dataset load_embeddings(const std::string& path, FileFormat format,
                        DatasetRole role = DatasetRole::Train);

// Sniffs the binary magic; falls back to text.
FileFormat detect_format(const std::string& path);

}  // namespace gmn
