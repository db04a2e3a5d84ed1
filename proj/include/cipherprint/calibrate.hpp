#pragma once
// Probability integral transform of raw statistics through fixed null CDFs.

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cipherprint/statpanel.hpp"

namespace cipherprint {

inline constexpr double kScoreFloor = 1e-12;
inline constexpr double kScoreCeil = 1.0 - 1e-12;
inline constexpr std::size_t kQuantileLevels = 1025;

// Knots of an empirical null CDF. Values are strictly increasing; cdf holds the mid-P
// value P(X < v) + P(X = v)/2 of the Monte-Carlo sample at each knot.
struct EmpiricalTable {
    std::vector<double> values;
    std::vector<double> cdf;
    std::uint64_t mc_samples = 0;
    double max_atom = 0.0;  // largest probability mass on a single value
    double median = 0.0;

    nlohmann::json to_json() const;
    static EmpiricalTable from_json(const nlohmann::json& j);
};

// Sorted copy of samples -> table of kQuantileLevels evenly spaced quantiles with ties collapsed.
EmpiricalTable build_empirical_table(std::vector<double> samples);

struct NullCdfSpec {
    NullKind kind = NullKind::Normal;
    double a = 0.0;  // Normal mean or ChiSquare df
    double b = 1.0;  // Normal sd
    std::shared_ptr<const EmpiricalTable> table;
};

// F(raw) clipped to [1e-12, 1 - 1e-12]. Throws std::domain_error on non-finite raw.
double calibrate_value(double raw, const NullCdfSpec& spec);

// Null tables for every panel column, built from CSPRNG unit blocks.
struct NullTables {
    std::string mc_seed_hex;
    std::uint64_t mc_samples = 0;
    std::vector<std::string> columns;
    std::vector<EmpiricalTable> tables;  // parallel to columns

    nlohmann::json to_json() const;
    static NullTables from_json(const nlohmann::json& j);
};

// Raw panel statistics of `count` CSPRNG unit blocks, rows in generation order.
std::vector<RawValues> sample_null_rows(const Seed& seed, std::size_t count, int jobs = 1);

// build_empirical_null for every column at once (the statistics share one pass).
NullTables build_null_tables(const Seed& seed, std::size_t mc_samples, int jobs = 1);
EmpiricalTable build_empirical_null(std::size_t column, std::size_t mc_samples, const Seed& seed,
                                    int jobs = 1);

// Tables compiled into the library from data/null_tables.json.
const NullTables& embedded_null_tables();

struct ScoreRow {
    RawValues scores{};
    std::string source_id;
    std::size_t block_index = 0;
};

// The panel joined with its null specs. Its version string covers both, so any change
// to the tables changes every downstream hash.
class Calibrator {
public:
    Calibrator(const PanelManifest& definition, const NullTables& tables);

    const PanelManifest& panel() const { return panel_; }
    const std::string& version() const { return panel_.version; }
    const NullCdfSpec& spec(std::size_t column) const { return specs_.at(column); }
    bool is_discrete(std::size_t column) const { return discrete_.at(column); }
    double median(std::size_t column) const;

    ScoreRow calibrate_row(const RawStatRow& raw) const;
    // Throws ConfigError when the expected panel version differs from this calibrator's.
    ScoreRow calibrate_row(const RawStatRow& raw, const PanelManifest& expected) const;

    nlohmann::json manifest_json() const;

private:
    PanelManifest panel_;
    std::vector<NullCdfSpec> specs_;
    std::vector<bool> discrete_;
    std::string tables_hash_;
};

// Calibrated scores of many streams. Rows are grouped by stream and ordered by block index.
struct StreamExtent {
    std::string source_id;
    std::string group_id;
    int label = -1;
    std::size_t first_row = 0;
    std::size_t n_rows = 0;
    std::size_t dropped_tail_bytes = 0;
};

struct ScoreTable {
    std::string panel_version;
    std::vector<StreamExtent> streams;
    std::vector<RawValues> rows;

    // Throws ConfigError when extents do not tile the rows or a score leaves the clip range.
    void validate() const;
};

// Columns whose null has an atom of at least this mass are flagged discrete.
inline constexpr double kDiscreteAtomThreshold = 0.01;

const Calibrator& default_calibrator();

}  // namespace cipherprint
