#pragma once
// Run configuration and the pipeline stages behind each CLI subcommand. Every stage reads
// its upstream artifacts from the output root, checks their hashes and writes atomically.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cipherprint/corpus.hpp"
#include "cipherprint/evalproto.hpp"
#include "cipherprint/fingerprint.hpp"
#include "cipherprint/learn.hpp"

namespace cipherprint {

struct DatasetSpec {
    std::string name;
    Regime regime = Regime::Regular100;
    Ratio ratio{1, 1};
    std::size_t sources_per_cipher = 10;
    std::size_t n_windows = 1200;  // target fingerprint windows for the whole dataset
    std::string corpus_root;       // File regime only

    nlohmann::json to_json() const;
    static DatasetSpec from_json(const nlohmann::json& j);
};

// Number of 8 KiB windows each stream needs so the dataset reaches n_windows fingerprints.
std::size_t windows_per_stream(const DatasetSpec& d, const SegmentationConfig& seg);

struct RunConfig {
    Seed master_seed{};
    bool store_seed = false;
    std::vector<DatasetSpec> datasets;
    SegmentationConfig seg = SegmentationConfig::defaults();
    std::vector<FeatureSet> feature_sets;
    std::vector<ModelKind> models;
    int folds = 5;
    int repeats = 5;
    std::uint64_t cv_seed = 0;
    std::map<ModelKind, Hyper> hyper;
    std::string panel_version;
    // Not part of the hash.
    std::filesystem::path output_root = "out";
    int jobs = 1;

    static RunConfig defaults();
    static RunConfig smoke();
    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;  // hashed content, without output_root and jobs
    std::string hash() const;

    Hyper hyper_for(ModelKind k) const;
    CvOptions cv_options() const;
    const DatasetSpec& dataset(const std::string& name) const;
};

// "64 hex digits" is taken literally; anything else is hashed with SHA-256.
Seed parse_seed(std::string_view text);

RunConfig load_config(const std::filesystem::path& path);

// Optional narrowing of a run to some datasets, models or feature sets. Names must exist in
// the config. The config hash is unaffected.
struct Selection {
    std::vector<std::string> datasets;
    std::vector<std::string> models;
    std::vector<std::string> feature_sets;
};

struct Layout {
    std::filesystem::path root;

    std::filesystem::path dataset_dir(const std::string& d) const { return root / "datasets" / d; }
    std::filesystem::path manifest(const std::string& d) const { return dataset_dir(d) / "manifest.json"; }
    std::filesystem::path ciphertext(const std::string& d) const { return dataset_dir(d) / "ciphertext.bin"; }
    std::filesystem::path plaintext(const std::string& d) const { return dataset_dir(d) / "plaintext.bin"; }
    std::filesystem::path scores(const std::string& d) const { return dataset_dir(d) / "scores.cpst"; }
    std::filesystem::path fingerprints(const std::string& d, FeatureSet f) const;
    std::filesystem::path model(const std::string& d, ModelKind m, FeatureSet f) const;
    std::filesystem::path eval(const std::string& d, ModelKind m, FeatureSet f) const;
    std::filesystem::path crossdomain(ModelKind m, FeatureSet f) const;
    std::filesystem::path sanity(const std::string& d) const { return root / "sanity" / (d + ".json"); }
    std::filesystem::path report_dir() const { return root / "report"; }
};

// Each returns a short JSON summary of what it wrote.
nlohmann::json cmd_gen(const RunConfig& cfg, const Selection& sel = {});
nlohmann::json cmd_score(const RunConfig& cfg, const Selection& sel = {});
nlohmann::json cmd_fingerprint(const RunConfig& cfg, const Selection& sel = {});
nlohmann::json cmd_train(const RunConfig& cfg, const Selection& sel = {});
nlohmann::json cmd_eval(const RunConfig& cfg, const Selection& sel = {});
nlohmann::json cmd_crossdomain(const RunConfig& cfg, const Selection& sel = {});
nlohmann::json cmd_sanity(const RunConfig& cfg, const Selection& sel = {});
nlohmann::json cmd_report(const RunConfig& cfg, const Selection& sel = {});

inline constexpr std::string_view kNullTablesSeedText = "cipherprint null tables v1";
inline constexpr std::size_t kNullTablesSamples = 100000;
// Rebuilds the null tables that are compiled into the library.
nlohmann::json cmd_build_nulls(const std::filesystem::path& out, std::string_view seed_text, std::size_t samples,
                               int jobs);

// Class names in label order.
std::vector<std::string> cipher_class_names();

}  // namespace cipherprint
