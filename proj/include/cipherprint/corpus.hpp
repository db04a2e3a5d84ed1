#pragma once
// Plaintext sources: real-file ingestion and synthetic Regular/Random mixtures.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cipherprint/common.hpp"

namespace cipherprint {

enum class Regime { Regular100, Regular75, Regular50, Regular25, Random100, File };

std::string_view regime_name(Regime r);
std::optional<Regime> regime_from_name(std::string_view name);

// Exact fraction of structured content.
struct Ratio {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Ratio&) const = default;
};

Ratio regime_ratio(Regime r);
// Accepts "3/4", "0.75", "1", "0".
Ratio parse_ratio(std::string_view text);

inline constexpr std::size_t kMixGranule = 1024;

// Identifier of the structured-content generator, recorded in dataset metadata.
inline constexpr std::string_view kStructuredGeneratorId = "markov2-text-64sym-fixed-records-v1";

struct PlaintextStream {
    std::string source_id;
    Regime regime = Regime::File;
    Bytes bytes;
    std::string content_hash;  // sha256 hex of bytes

    std::size_t length() const { return bytes.size(); }
};

struct CorpusEntry {
    std::string source_id;
    std::string relative_path;
    Regime regime = Regime::File;
    std::uint64_t length = 0;
    std::string content_hash;
};

struct CorpusManifest {
    std::vector<CorpusEntry> entries;  // sorted by source_id
    std::string master_seed_sha256;
    std::optional<Seed> master_seed;  // only written when explicitly requested

    nlohmann::json to_json() const;
    static CorpusManifest from_json(const nlohmann::json& j);
    // Canonical serialization: sorted keys, two-space indent, LF endings, trailing newline.
    std::string serialize() const;
};

struct ExcludedFile {
    std::string relative_path;
    std::uint64_t length = 0;
};

struct IngestResult {
    CorpusManifest manifest;
    std::vector<ExcludedFile> excluded;
};

// One entry per regular file of at least min_length bytes under root (recursive).
// Throws ConfigError when root is not a readable directory.
IngestResult ingest_corpus(const std::filesystem::path& root, std::size_t min_length = kWindowBytes);

// Reads the file behind a manifest entry and verifies its content hash.
PlaintextStream load_corpus_entry(const std::filesystem::path& root, const CorpusEntry& entry);

// Order-2 Markov text over a 64-symbol alphabet laid out in 64-byte space-padded records.
Bytes gen_structured(const Seed& seed, std::size_t n);

// Keystream bytes of the seeded CSPRNG.
Bytes gen_random(const Seed& seed, std::size_t n);

struct MixedPlaintext {
    Bytes bytes;
    std::vector<bool> structured;  // provenance flag per granule
};

// Granule i is taken from gen_structured(seed, n) or gen_random(seed, n); the structured
// granules follow a Bresenham spread so their count is floor(G * ratio).
MixedPlaintext gen_mixed_with_provenance(const Seed& seed, Ratio ratio, std::size_t n);
Bytes gen_mixed(const Seed& seed, Ratio ratio, std::size_t n);

// Synthetic plaintext for one source, reproducible from (master_seed, source_id).
PlaintextStream synth_plaintext(const Seed& master_seed, std::string_view source_id, Regime regime,
                                std::size_t n);

}  // namespace cipherprint
