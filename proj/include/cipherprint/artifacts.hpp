#pragma once
// On-disk artifacts: atomic writes, self-describing binary tables and CSV export.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cipherprint/calibrate.hpp"
#include "cipherprint/fingerprint.hpp"

namespace cipherprint {

// Writes to a sibling temp file and renames it into place. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);
// Throws UpstreamMissing when the file does not exist.
std::string read_file(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

// Binary container: 8-byte magic, u64 header length, JSON header, then little-endian
// doubles. The header records the payload SHA-256, checked on read.
struct Blob {
    nlohmann::json header;
    std::vector<double> payload;
};
void write_blob(const std::filesystem::path& path, std::string_view magic, nlohmann::json header,
                std::span<const double> payload);
Blob read_blob(const std::filesystem::path& path, std::string_view magic);

inline constexpr std::string_view kScoreTableMagic = "CPST0001";
inline constexpr std::string_view kFingerprintMagic = "CPFP0001";

// Score tables (.cpst). extra is merged into the header (config hash, seeds, ...).
void save_score_table(const std::filesystem::path& path, const ScoreTable& t,
                      const std::vector<std::string>& column_names, const nlohmann::json& extra = {});
ScoreTable load_score_table(const std::filesystem::path& path, nlohmann::json* header = nullptr);

// Fingerprint matrices (.cpfp).
void save_fingerprints(const std::filesystem::path& path, const FingerprintMatrix& m,
                       const nlohmann::json& extra = {});
FingerprintMatrix load_fingerprints(const std::filesystem::path& path, nlohmann::json* header = nullptr);

// Plain CSV with a header row. Numbers use the shortest round-trip representation.
std::string format_number(double v);
std::string csv_escape(std::string_view field);
std::string score_table_csv(const ScoreTable& t, const std::vector<std::string>& column_names);

}  // namespace cipherprint
