#pragma once
// Windowed distributional fingerprints over the calibrated score table, plus the
// baseline and ablation feature sets.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cipherprint/calibrate.hpp"

namespace cipherprint {

inline constexpr std::size_t kNumMoments = 4;

struct SegmentationConfig {
    std::size_t W = 32;
    std::size_t s = 8;
    std::size_t K = 10;
    std::vector<double> bin_edges;  // K+1 values; empty means equispaced on [0, 1]

    static SegmentationConfig defaults();
    // Fills equispaced edges when absent and checks 1 <= s <= W, K >= 1, edges increasing from 0 to 1.
    void validate();
    std::vector<double> edges() const;
    // rho = ceil(W / s) - 1
    std::size_t purge_radius() const;
    nlohmann::json to_json() const;
    static SegmentationConfig from_json(const nlohmann::json& j);
    std::string hash() const;
};

std::vector<double> equispaced_edges(std::size_t K);

struct WindowSpan {
    std::size_t stream = 0;        // index into ScoreTable::streams
    std::size_t first_row = 0;     // global row index
    std::size_t window_index = 0;  // position within the stream
    std::size_t first_block = 0;   // block_index range covered (inclusive)
    std::size_t last_block = 0;
};

struct Segmentation {
    std::vector<WindowSpan> windows;
    std::vector<std::size_t> skipped_streams;  // streams shorter than W
};

// Windows start at offsets 0, s, 2s, ... within each stream and never cross streams.
Segmentation segment(std::span<const std::size_t> stream_rows, const SegmentationConfig& cfg);
Segmentation segment(const ScoreTable& table, const SegmentationConfig& cfg);

// Normalized counts over [E_b, E_{b+1}) with the last bin closed at the top edge.
std::vector<double> window_histogram(std::span<const double> values, std::span<const double> edges);

struct MomentVector {
    double mean = 0.0;
    double variance = 0.0;  // population
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};
MomentVector window_moments(std::span<const double> values);

enum class FeatureSet {
    Ours,
    RawP,
    KS,
    G4,
    Probit,
    RawP_G4,
    RawP_KS,
    RawP_G4_KS,
    OnlyBins,
    OnlyStats,
    NoHighOrder,
};
std::string_view feature_set_name(FeatureSet f);
FeatureSet feature_set_from_name(std::string_view name);  // throws ConfigError
const std::vector<FeatureSet>& all_feature_sets();

std::size_t feature_dim(FeatureSet f, const SegmentationConfig& cfg, std::size_t columns = kNumColumns);
std::vector<std::string> feature_names(FeatureSet f, const SegmentationConfig& cfg,
                                       const std::vector<std::string>& column_names);

// Features of one window (rows are calibrated score rows).
std::vector<double> window_features(std::span<const RawValues> rows, FeatureSet f, const SegmentationConfig& cfg);
std::vector<double> baseline_features(std::span<const RawValues> rows, FeatureSet f);
std::vector<double> ablation_features(std::span<const RawValues> rows, FeatureSet f, const SegmentationConfig& cfg);

struct FingerprintSample {
    std::vector<double> x;
    int label = -1;
    std::string group_id;
    std::string source_id;
    std::size_t window_index = 0;
    std::pair<std::size_t, std::size_t> row_span{0, 0};  // first and last block index
};

FingerprintSample assemble_fingerprint(std::span<const RawValues> rows, const SegmentationConfig& cfg,
                                       const PanelManifest& panel);

// Feature matrix for a whole score table.
struct FingerprintMatrix {
    FeatureSet feature_set = FeatureSet::Ours;
    std::string panel_version;
    std::string seg_hash;
    std::vector<std::string> feature_names;
    Eigen::MatrixXd X;
    std::vector<int> labels;
    std::vector<std::string> groups;
    std::vector<std::string> sources;
    std::vector<std::size_t> window_index;
    std::vector<std::pair<std::size_t, std::size_t>> row_spans;
    std::vector<WindowSpan> spans;  // positions in the originating score table

    std::size_t size() const { return labels.size(); }
};

FingerprintMatrix build_fingerprints(const ScoreTable& table, const SegmentationConfig& cfg, FeatureSet f,
                                     const std::vector<std::string>& column_names, int jobs = 1);

}  // namespace cipherprint
