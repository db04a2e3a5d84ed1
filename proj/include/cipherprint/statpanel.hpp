#pragma once
// The fixed 41-column panel of raw randomness statistics evaluated on 1024-byte unit blocks.

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cipherprint/common.hpp"

namespace cipherprint {

inline constexpr std::size_t kNumColumns = 41;

enum class Family { Basic, Classical, NIST, Advanced };
std::string_view family_name(Family f);

// Null distribution kinds understood by the calibrator.
enum class NullKind { Normal, ChiSquare, EmpiricalQuantile };
std::string_view null_kind_name(NullKind k);

struct ColumnSpec {
    std::string name;
    Family family;
    nlohmann::json params;  // everything needed to recompute the statistic
    NullKind null_kind;
    double null_a = 0.0;  // Normal: mean, ChiSquare: degrees of freedom
    double null_b = 1.0;  // Normal: standard deviation
    std::string degenerate_value;  // what the statistic returns on zero-variance input
};

struct PanelManifest {
    std::string version;
    std::size_t unit_block_len = kUnitBlockBytes;
    std::vector<ColumnSpec> columns;

    std::vector<std::string> column_names() const;
    std::size_t index_of(std::string_view name) const;  // throws ConfigError if absent
    nlohmann::json to_json() const;
};

// Column definitions only; calibrate.hpp extends the version with the null-table hash.
const PanelManifest& panel_definition();

using RawValues = std::array<double, kNumColumns>;

struct RawStatRow {
    RawValues values{};
    std::string source_id;
    std::size_t block_index = 0;
};

// Throws std::invalid_argument unless |block| is the unit block length.
RawValues score_block(ByteView block);

struct StreamScores {
    std::vector<RawStatRow> rows;
    std::size_t dropped_tail_bytes = 0;
};

// One row per complete unit block; the partial tail is dropped and reported.
StreamScores score_stream(ByteView stream, std::string_view source_id, int jobs = 1);

// Building blocks exposed for tests.
double block16_nn_hamming(ByteView block);
double wald_wolfowitz_z(const std::vector<std::uint8_t>& binary);
double gap_test_chi2(ByteView block, std::uint8_t below);
double coupon_collector_mean(ByteView block);
double birthday_spacings_collisions(ByteView block);
double serial_correlation_z(ByteView block, std::size_t lag);

}  // namespace cipherprint
