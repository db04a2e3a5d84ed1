#include "cipherprint/artifacts.hpp"

#include <unistd.h>

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cipherprint {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view data) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_json_atomic(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::string read_file(const fs::path& path) {
    if (!fs::exists(path)) throw UpstreamMissing("missing artifact: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
    const std::string text = read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_blob(const fs::path& path, std::string_view magic, nlohmann::json header, std::span<const double> payload) {
    if (magic.size() != 8) throw std::invalid_argument("blob magic must be 8 bytes");
    const auto* raw = reinterpret_cast<const std::uint8_t*>(payload.data());
    const ByteView bytes(raw, payload.size() * sizeof(double));
    header["payload_doubles"] = payload.size();
    header["payload_sha256"] = sha256_hex(bytes);
    const std::string text = header.dump();
    const std::uint64_t len = text.size();
    std::string out;
    out.reserve(16 + text.size() + bytes.size());
    out.append(magic);
    out.append(reinterpret_cast<const char*>(&len), sizeof(len));
    out.append(text);
    out.append(reinterpret_cast<const char*>(raw), bytes.size());
    write_file_atomic(path, out);
}

Blob read_blob(const fs::path& path, std::string_view magic) {
    const std::string data = read_file(path);
    if (data.size() < 16 || std::string_view(data).substr(0, 8) != magic) {
        throw ConfigError(path.string() + " is not a " + std::string(magic) + " file");
    }
    std::uint64_t len = 0;
    std::memcpy(&len, data.data() + 8, sizeof(len));
    if (16 + len > data.size()) throw HashMismatch(path.string() + ": truncated header");
    Blob b;
    b.header = nlohmann::json::parse(data.substr(16, len));
    const std::size_t n = b.header.at("payload_doubles");
    if (16 + len + n * sizeof(double) != data.size()) throw HashMismatch(path.string() + ": payload size mismatch");
    b.payload.resize(n);
    std::memcpy(b.payload.data(), data.data() + 16 + len, n * sizeof(double));
    const ByteView bytes(reinterpret_cast<const std::uint8_t*>(b.payload.data()), n * sizeof(double));
    if (sha256_hex(bytes) != b.header.at("payload_sha256")) throw HashMismatch(path.string() + ": payload hash mismatch");
    return b;
}

void save_score_table(const fs::path& path, const ScoreTable& t, const std::vector<std::string>& column_names,
                      const nlohmann::json& extra) {
    t.validate();
    nlohmann::json streams = nlohmann::json::array();
    for (const auto& s : t.streams) {
        streams.push_back({{"source_id", s.source_id},
                           {"group_id", s.group_id},
                           {"label", s.label},
                           {"first_row", s.first_row},
                           {"n_rows", s.n_rows},
                           {"dropped_tail_bytes", s.dropped_tail_bytes}});
    }
    nlohmann::json header = extra.is_object() ? extra : nlohmann::json::object();
    header["format"] = "cipherprint.score-table.v1";
    header["panel_version"] = t.panel_version;
    header["columns"] = column_names;
    header["n_rows"] = t.rows.size();
    header["streams"] = streams;
    std::vector<double> payload;
    payload.reserve(t.rows.size() * kNumColumns);
    for (const auto& r : t.rows) payload.insert(payload.end(), r.begin(), r.end());
    write_blob(path, kScoreTableMagic, header, payload);
}

ScoreTable load_score_table(const fs::path& path, nlohmann::json* header) {
    Blob b = read_blob(path, kScoreTableMagic);
    ScoreTable t;
    t.panel_version = b.header.at("panel_version");
    const std::size_t n = b.header.at("n_rows");
    if (b.payload.size() != n * kNumColumns) throw HashMismatch(path.string() + ": row count mismatch");
    t.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) std::copy_n(b.payload.begin() + static_cast<std::ptrdiff_t>(i * kNumColumns), kNumColumns, t.rows[i].begin());
    for (const auto& s : b.header.at("streams")) {
        t.streams.push_back({s.at("source_id"), s.at("group_id"), s.at("label"), s.at("first_row"), s.at("n_rows"),
                             s.at("dropped_tail_bytes")});
    }
    t.validate();
    if (header) *header = std::move(b.header);
    return t;
}

void save_fingerprints(const fs::path& path, const FingerprintMatrix& m, const nlohmann::json& extra) {
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& w : m.spans) {
        spans.push_back({w.stream, w.first_row, w.window_index, w.first_block, w.last_block});
    }
    nlohmann::json header = extra.is_object() ? extra : nlohmann::json::object();
    header["format"] = "cipherprint.fingerprints.v1";
    header["feature_set"] = feature_set_name(m.feature_set);
    header["panel_version"] = m.panel_version;
    header["segmentation_hash"] = m.seg_hash;
    header["feature_names"] = m.feature_names;
    header["n"] = m.size();
    header["dim"] = m.X.cols();
    header["labels"] = m.labels;
    header["groups"] = m.groups;
    header["sources"] = m.sources;
    header["spans"] = spans;
    std::vector<double> payload;
    payload.reserve(static_cast<std::size_t>(m.X.size()));
    for (Eigen::Index i = 0; i < m.X.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.X.cols(); ++j) payload.push_back(m.X(i, j));
    }
    write_blob(path, kFingerprintMagic, header, payload);
}

FingerprintMatrix load_fingerprints(const fs::path& path, nlohmann::json* header) {
    Blob b = read_blob(path, kFingerprintMagic);
    const auto& h = b.header;
    FingerprintMatrix m;
    m.feature_set = feature_set_from_name(h.at("feature_set").get<std::string>());
    m.panel_version = h.at("panel_version");
    m.seg_hash = h.at("segmentation_hash");
    m.feature_names = h.at("feature_names").get<std::vector<std::string>>();
    const std::size_t n = h.at("n");
    const std::size_t d = h.at("dim");
    if (b.payload.size() != n * d || m.feature_names.size() != d) throw HashMismatch(path.string() + ": shape mismatch");
    m.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) m.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = b.payload[i * d + j];
    }
    m.labels = h.at("labels").get<std::vector<int>>();
    m.groups = h.at("groups").get<std::vector<std::string>>();
    m.sources = h.at("sources").get<std::vector<std::string>>();
    for (const auto& s : h.at("spans")) {
        WindowSpan w{s.at(0), s.at(1), s.at(2), s.at(3), s.at(4)};
        m.spans.push_back(w);
        m.window_index.push_back(w.window_index);
        m.row_spans.push_back({w.first_block, w.last_block});
    }
    if (m.labels.size() != n || m.groups.size() != n || m.sources.size() != n || m.spans.size() != n) {
        throw HashMismatch(path.string() + ": metadata length mismatch");
    }
    if (header) *header = std::move(b.header);
    return m;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string score_table_csv(const ScoreTable& t, const std::vector<std::string>& column_names) {
    std::string out = "source_id,group_id,label,block_index";
    for (const auto& c : column_names) out += "," + csv_escape(c);
    out += "\n";
    for (const auto& s : t.streams) {
        for (std::size_t k = 0; k < s.n_rows; ++k) {
            out += csv_escape(s.source_id) + "," + csv_escape(s.group_id) + "," + std::to_string(s.label) + "," +
                   std::to_string(k);
            for (double v : t.rows[s.first_row + k]) out += "," + format_number(v);
            out += "\n";
        }
    }
    return out;
}

}  // namespace cipherprint
