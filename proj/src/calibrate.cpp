#include "cipherprint/calibrate.hpp"

#include <algorithm>
#include <cmath>

#include "cipherprint/cryptobox.hpp"
#include "cipherprint/special.hpp"

namespace cipherprint {

extern const std::string_view kEmbeddedNullTables;

namespace {

constexpr std::size_t kNullChunk = 1000;

double clip_score(double p) { return std::clamp(p, kScoreFloor, kScoreCeil); }

double interpolate(const EmpiricalTable& t, double x) {
    if (t.values.empty()) throw std::logic_error("empty empirical null table");
    if (x < t.values.front()) return 0.0;
    if (x > t.values.back()) return 1.0;
    auto it = std::lower_bound(t.values.begin(), t.values.end(), x);
    const auto i = static_cast<std::size_t>(it - t.values.begin());
    if (*it == x) return t.cdf[i];
    const double x0 = t.values[i - 1];
    const double x1 = t.values[i];
    const double w = (x - x0) / (x1 - x0);
    return t.cdf[i - 1] + w * (t.cdf[i] - t.cdf[i - 1]);
}

}  // namespace

nlohmann::json EmpiricalTable::to_json() const {
    return {{"values", values}, {"cdf", cdf}, {"mc_samples", mc_samples}, {"max_atom", max_atom}, {"median", median}};
}

EmpiricalTable EmpiricalTable::from_json(const nlohmann::json& j) {
    EmpiricalTable t;
    t.values = j.at("values").get<std::vector<double>>();
    t.cdf = j.at("cdf").get<std::vector<double>>();
    t.mc_samples = j.at("mc_samples").get<std::uint64_t>();
    t.max_atom = j.at("max_atom").get<double>();
    t.median = j.at("median").get<double>();
    if (t.values.size() != t.cdf.size() || t.values.empty()) throw ConfigError("malformed empirical null table");
    for (std::size_t i = 1; i < t.values.size(); ++i) {
        if (!(t.values[i] > t.values[i - 1]) || t.cdf[i] < t.cdf[i - 1]) {
            throw ConfigError("empirical null table is not strictly monotone");
        }
    }
    return t;
}

EmpiricalTable build_empirical_table(std::vector<double> samples) {
    if (samples.empty()) throw std::invalid_argument("build_empirical_table: no samples");
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    const double nn = static_cast<double>(n);

    EmpiricalTable t;
    t.mc_samples = n;
    for (std::size_t q = 0; q < kQuantileLevels; ++q) {
        const auto rank = static_cast<std::size_t>(
            std::llround(static_cast<double>(q) / static_cast<double>(kQuantileLevels - 1) * (nn - 1.0)));
        const double v = samples[rank];
        if (!t.values.empty() && t.values.back() == v) continue;
        const auto lo = std::lower_bound(samples.begin(), samples.end(), v) - samples.begin();
        const auto hi = std::upper_bound(samples.begin(), samples.end(), v) - samples.begin();
        t.values.push_back(v);
        t.cdf.push_back((static_cast<double>(lo) + 0.5 * static_cast<double>(hi - lo)) / nn);
    }
    std::size_t run = 1;
    std::size_t best = 1;
    for (std::size_t i = 1; i < n; ++i) {
        run = samples[i] == samples[i - 1] ? run + 1 : 1;
        best = std::max(best, run);
    }
    t.max_atom = static_cast<double>(best) / nn;
    t.median = n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    return t;
}

double calibrate_value(double raw, const NullCdfSpec& spec) {
    if (!std::isfinite(raw)) throw std::domain_error("calibrate_value: non-finite statistic");
    switch (spec.kind) {
        case NullKind::Normal: return clip_score(normal_cdf((raw - spec.a) / spec.b));
        case NullKind::ChiSquare: return clip_score(chi_square_cdf(raw, spec.a));
        case NullKind::EmpiricalQuantile:
            if (!spec.table) throw std::logic_error("empirical null spec without table");
            return clip_score(interpolate(*spec.table, raw));
    }
    throw std::logic_error("unknown null kind");
}

nlohmann::json NullTables::to_json() const {
    nlohmann::json cols = nlohmann::json::object();
    for (std::size_t i = 0; i < columns.size(); ++i) cols[columns[i]] = tables[i].to_json();
    return {{"format", "cipherprint.null-tables.v1"},
            {"mc_seed", mc_seed_hex},
            {"mc_samples", mc_samples},
            {"quantile_levels", kQuantileLevels},
            {"columns", cols}};
}

NullTables NullTables::from_json(const nlohmann::json& j) {
    NullTables t;
    if (j.value("format", "") != "cipherprint.null-tables.v1") throw ConfigError("unrecognized null table format");
    t.mc_seed_hex = j.at("mc_seed").get<std::string>();
    t.mc_samples = j.at("mc_samples").get<std::uint64_t>();
    for (const auto& [name, tj] : j.at("columns").items()) {
        t.columns.push_back(name);
        t.tables.push_back(EmpiricalTable::from_json(tj));
    }
    return t;
}

std::vector<RawValues> sample_null_rows(const Seed& seed, std::size_t count, int jobs) {
    std::vector<RawValues> rows(count);
    const std::size_t chunks = (count + kNullChunk - 1) / kNullChunk;
    parallel_for(chunks, jobs, [&](std::size_t c) {
        KeyedStream rng(seed, "null-mc/chunk/" + std::to_string(c));
        Bytes block(kUnitBlockBytes);
        const std::size_t end = std::min(count, (c + 1) * kNullChunk);
        for (std::size_t i = c * kNullChunk; i < end; ++i) {
            rng.fill(block);
            rows[i] = score_block(block);
        }
    });
    return rows;
}

NullTables build_null_tables(const Seed& seed, std::size_t mc_samples, int jobs) {
    if (mc_samples < 10000) throw ConfigError("empirical nulls need at least 10000 Monte-Carlo samples");
    const auto rows = sample_null_rows(seed, mc_samples, jobs);
    const auto& panel = panel_definition();
    NullTables out;
    out.mc_seed_hex = seed_to_hex(seed);
    out.mc_samples = mc_samples;
    std::vector<double> column(mc_samples);
    for (std::size_t c = 0; c < kNumColumns; ++c) {
        for (std::size_t i = 0; i < mc_samples; ++i) column[i] = rows[i][c];
        out.columns.push_back(panel.columns[c].name);
        out.tables.push_back(build_empirical_table(column));
    }
    return out;
}

EmpiricalTable build_empirical_null(std::size_t column, std::size_t mc_samples, const Seed& seed, int jobs) {
    if (column >= kNumColumns) throw std::out_of_range("column index out of range");
    if (mc_samples < 10000) throw ConfigError("empirical nulls need at least 10000 Monte-Carlo samples");
    const auto rows = sample_null_rows(seed, mc_samples, jobs);
    std::vector<double> values(mc_samples);
    for (std::size_t i = 0; i < mc_samples; ++i) values[i] = rows[i][column];
    return build_empirical_table(std::move(values));
}

const NullTables& embedded_null_tables() {
    static const NullTables tables = [] {
        if (kEmbeddedNullTables.find_first_not_of(" \n\t{}") == std::string_view::npos) return NullTables{};
        return NullTables::from_json(nlohmann::json::parse(kEmbeddedNullTables));
    }();
    return tables;
}

Calibrator::Calibrator(const PanelManifest& definition, const NullTables& tables) : panel_(definition) {
    tables_hash_ = sha256_hex(tables.to_json().dump());
    for (std::size_t c = 0; c < panel_.columns.size(); ++c) {
        const auto& col = panel_.columns[c];
        NullCdfSpec spec{col.null_kind, col.null_a, col.null_b, nullptr};
        const auto it = std::find(tables.columns.begin(), tables.columns.end(), col.name);
        const EmpiricalTable* table =
            it == tables.columns.end() ? nullptr : &tables.tables[static_cast<std::size_t>(it - tables.columns.begin())];
        if (col.null_kind == NullKind::EmpiricalQuantile) {
            if (table == nullptr) {
                throw UpstreamMissing("no empirical null table for column " + col.name +
                                      "; run `cipherprint build-nulls`");
            }
            spec.table = std::make_shared<EmpiricalTable>(*table);
        }
        discrete_.push_back(table != nullptr && table->max_atom >= kDiscreteAtomThreshold);
        specs_.push_back(std::move(spec));
    }
    panel_.version = definition.version + "+nulls-" + tables_hash_.substr(0, 12);
}

double Calibrator::median(std::size_t column) const {
    const auto& s = specs_.at(column);
    switch (s.kind) {
        case NullKind::Normal: return s.a;
        case NullKind::ChiSquare: return chi_square_quantile(0.5, s.a);
        case NullKind::EmpiricalQuantile: return s.table->median;
    }
    return 0.0;
}

ScoreRow Calibrator::calibrate_row(const RawStatRow& raw) const {
    ScoreRow out;
    out.source_id = raw.source_id;
    out.block_index = raw.block_index;
    for (std::size_t c = 0; c < kNumColumns; ++c) {
        if (!std::isfinite(raw.values[c])) {
            throw std::domain_error("non-finite statistic in row " + std::to_string(raw.block_index) + " of " +
                                    raw.source_id + ", column " + panel_.columns[c].name);
        }
        out.scores[c] = calibrate_value(raw.values[c], specs_[c]);
    }
    return out;
}

ScoreRow Calibrator::calibrate_row(const RawStatRow& raw, const PanelManifest& expected) const {
    if (expected.version != panel_.version) {
        throw ConfigError("panel version mismatch: " + expected.version + " vs " + panel_.version);
    }
    return calibrate_row(raw);
}

nlohmann::json Calibrator::manifest_json() const {
    auto j = panel_.to_json();
    j["null_tables_sha256"] = tables_hash_;
    for (std::size_t c = 0; c < kNumColumns; ++c) {
        j["columns"][c]["discrete"] = static_cast<bool>(discrete_[c]);
    }
    return j;
}

void ScoreTable::validate() const {
    std::size_t expect = 0;
    for (const auto& s : streams) {
        if (s.first_row != expect) throw ConfigError("score table extents are not contiguous at " + s.source_id);
        expect += s.n_rows;
    }
    if (expect != rows.size()) throw ConfigError("score table extents do not cover all rows");
    for (const auto& r : rows) {
        for (double v : r) {
            if (!(v >= kScoreFloor && v <= kScoreCeil)) throw ConfigError("score outside the clip range");
        }
    }
}

const Calibrator& default_calibrator() {
    static const Calibrator calibrator(panel_definition(), embedded_null_tables());
    return calibrator;
}

}  // namespace cipherprint
