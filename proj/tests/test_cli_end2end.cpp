// Drives the built CLI binary through generate -> train -> eval -> diagnose
// and checks files, exit codes, and reproducibility of outputs.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gmn/config.hpp"
#include "gmn/data_model.hpp"

using namespace gmn;
namespace fs = std::filesystem;

namespace {

const std::string kCli = GMN_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* tag) {
        path = fs::temp_directory_path() / (std::string("gmn_e2e_") + tag + "_" +
                                            std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

// Small fast experiment: 3 domains, few identities, 6 epochs.
std::string fast_flags(const std::string& out, int seed) {
    return "--out " + out + " --seed " + std::to_string(seed) +
           " --set data.num_domains=3 --set data.identities_per_domain=8"
           " --set data.records_per_identity=6 --set data.d_in=8"
           " --set train.epochs=6 --set train.dp_activation_epoch=3"
           " --set train.lr_decay_epochs=4 --set train.identities_per_batch=4"
           " --set train.samples_per_identity=2 --set train.encoder_dims=8,4"
           " --set eval.ranks=1,5";
}

}  // namespace

TEST_CASE("generate writes loadable files and is byte-reproducible") {
    TempDir d1("gen1"), d2("gen2");
    REQUIRE(run("generate " + fast_flags(d1.str(), 3)) == 0);
    REQUIRE(run("generate " + fast_flags(d2.str(), 3)) == 0);

    for (const char* name : {"train.gmne", "probe.gmne", "gallery.gmne"}) {
        const auto f1 = fs::path(d1.str()) / name;
        CHECK(fs::exists(f1));
        const Dataset ds = load_embeddings(f1.string(), FileFormat::Binary);
        CHECK(ds.size() > 0);
        CHECK(slurp(f1) == slurp(fs::path(d2.str()) / name));  // same seed, same bytes
    }
    CHECK(fs::exists(fs::path(d1.str()) / "config_used.cfg"));
}

TEST_CASE("rerunning from the dumped config reproduces the data") {
    TempDir d1("cfg1"), d2("cfg2");
    REQUIRE(run("generate " + fast_flags(d1.str(), 4)) == 0);
    REQUIRE(run("generate --config " + d1.str() + "/config_used.cfg --out " + d2.str()) == 0);
    CHECK(slurp(fs::path(d1.str()) / "train.gmne") == slurp(fs::path(d2.str()) / "train.gmne"));
}

TEST_CASE("train -> eval pipeline produces reports; baseline refuses the mnet protocol") {
    TempDir dir("train");
    REQUIRE(run("generate " + fast_flags(dir.str(), 5)) == 0);
    REQUIRE(run("train " + fast_flags(dir.str(), 5)) == 0);
    CHECK(fs::exists(fs::path(dir.str()) / "checkpoint.gmnc"));
    CHECK(fs::exists(fs::path(dir.str()) / "train_log.tsv"));

    // Log columns: epoch lr l_cls l_tri l_gmn l_pic_pos l_pic_neg total wall.
    {
        std::ifstream log(fs::path(dir.str()) / "train_log.tsv");
        std::string header, first;
        std::getline(log, header);
        std::getline(log, first);
        std::istringstream row(first);
        std::vector<std::string> cols;
        std::string c;
        while (row >> c) cols.push_back(c);
        CHECK(cols.size() == 9);
    }

    REQUIRE(run("eval " + fast_flags(dir.str(), 5) + " --checkpoint " + dir.str() +
                "/checkpoint.gmnc") == 0);
    CHECK(fs::exists(fs::path(dir.str()) / "eval_feature_euclidean.json"));
    CHECK(fs::exists(fs::path(dir.str()) / "eval_mnet.json"));

    // Baseline checkpoint has no metric net; asking for it is a config error.
    TempDir base("base");
    REQUIRE(run("generate " + fast_flags(base.str(), 5)) == 0);
    REQUIRE(run("train --preset baseline " + fast_flags(base.str(), 5)) == 0);
    CHECK(run("eval --preset baseline " + fast_flags(base.str(), 5) + " --checkpoint " +
              base.str() + "/checkpoint.gmnc --protocol mnet") == 2);
}

TEST_CASE("baseline training logs zero metric-net and consistency losses") {
    TempDir dir("blog");
    REQUIRE(run("train --preset baseline " + fast_flags(dir.str(), 6)) == 0);
    std::ifstream log(fs::path(dir.str()) / "train_log.tsv");
    std::string line;
    std::getline(log, line);  // header
    while (std::getline(log, line)) {
        std::istringstream row(line);
        double epoch, lr, cls, tri, gmnl, pic_pos, pic_neg, total, wall;
        row >> epoch >> lr >> cls >> tri >> gmnl >> pic_pos >> pic_neg >> total >> wall;
        CHECK(gmnl == 0.0);
        CHECK(pic_pos == 0.0);
        CHECK(pic_neg == 0.0);
        CHECK(total == doctest::Approx(cls + tri).epsilon(1e-9));
    }
}

TEST_CASE("interrupted plus resumed training equals the uninterrupted run") {
    TempDir full("full"), part("part");
    REQUIRE(run("train " + fast_flags(full.str(), 7)) == 0);

    REQUIRE(run("train " + fast_flags(part.str(), 7) + " --stop-after 3") == 0);
    REQUIRE(run("train " + fast_flags(part.str(), 7) + " --resume " + part.str() +
                "/checkpoint.gmnc") == 0);
    CHECK(slurp(fs::path(full.str()) / "checkpoint.gmnc") ==
          slurp(fs::path(part.str()) / "checkpoint.gmnc"));
    CHECK(slurp(fs::path(full.str()) / "train_log.tsv") ==
          slurp(fs::path(part.str()) / "train_log.tsv"));
}

TEST_CASE("identical config and seed give bit-identical checkpoints") {
    TempDir d1("det1"), d2("det2");
    REQUIRE(run("train " + fast_flags(d1.str(), 8)) == 0);
    REQUIRE(run("train " + fast_flags(d2.str(), 8)) == 0);
    CHECK(slurp(fs::path(d1.str()) / "checkpoint.gmnc") ==
          slurp(fs::path(d2.str()) / "checkpoint.gmnc"));
}

TEST_CASE("eval file outputs equal the printed numbers") {
    TempDir dir("dual");
    REQUIRE(run("generate " + fast_flags(dir.str(), 9)) == 0);
    REQUIRE(run("train " + fast_flags(dir.str(), 9)) == 0);
    REQUIRE(run("eval " + fast_flags(dir.str(), 9) + " --checkpoint " + dir.str() +
                "/checkpoint.gmnc") == 0);
    // The in-process numbers were written to both the table and the json; the
    // json mAP must appear (rounded) in the table file.
    const auto json = slurp(fs::path(dir.str()) / "eval_mnet.json");
    const auto table = slurp(fs::path(dir.str()) / "eval_table.txt");
    const auto pos = json.find("\"mAP\": ");
    REQUIRE(pos != std::string::npos);
    const double map_json = std::stod(json.substr(pos + 7));
    char rounded[16];
    std::snprintf(rounded, sizeof(rounded), "%.4f", map_json);
    CHECK(table.find(rounded) != std::string::npos);
}

TEST_CASE("diagnose and a small ablate run work end to end") {
    TempDir dir("diag");
    REQUIRE(run("diagnose " + fast_flags(dir.str(), 10) +
                " --set diagnose.pairs_per_domain=60") == 0);
    CHECK(fs::exists(fs::path(dir.str()) / "domain_gap.json"));

    TempDir ab("ablate");
    REQUIRE(run("ablate " + fast_flags(ab.str(), 11)) == 0);
    const auto table = slurp(fs::path(ab.str()) / "ablation.txt");
    CHECK(table.find("baseline") != std::string::npos);
    CHECK(table.find("+A+B+C") != std::string::npos);
}

TEST_CASE("error exit codes: config=2, data=3, io=5") {
    TempDir dir("err");
    CHECK(run("train --out " + dir.str() + " --set train.epochs=0") == 2);
    CHECK(run("eval --out " + dir.str() + " --checkpoint /nonexistent.gmnc") == 5);

    // Data error: corrupt embedding file.
    const auto bad = fs::path(dir.str()) / "bad.gmne";
    {
        std::ofstream os(bad, std::ios::binary);
        os << "NOPE";
    }
    CHECK(run("train --out " + dir.str() + " --set data.train_path=" + bad.string() +
              " --set data.probe_path=" + bad.string() +
              " --set data.gallery_path=" + bad.string()) == 3);
}
