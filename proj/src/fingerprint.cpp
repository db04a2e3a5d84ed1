#include "cipherprint/fingerprint.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cipherprint/special.hpp"

namespace cipherprint {

namespace {

constexpr std::array<std::string_view, 11> kFeatureSetNames = {
    "Ours", "RawP", "KS", "G4", "Probit", "RawP+G4", "RawP+KS", "RawP+G4+KS", "Only_Bins", "Only_Stats", "No_HighOrder",
};

constexpr std::array<std::string_view, 4> kMomentNames = {"mean", "var", "skew", "kurt"};

// Column t of the window, copied out of the row-major score rows.
std::vector<double> column_values(std::span<const RawValues> rows, std::size_t t) {
    std::vector<double> v(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) v[i] = rows[i][t];
    return v;
}

void append_moments(std::vector<double>& out, const MomentVector& m, std::size_t count) {
    const std::array<double, 4> all = {m.mean, m.variance, m.skewness, m.excess_kurtosis};
    out.insert(out.end(), all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
}

}  // namespace

std::vector<double> equispaced_edges(std::size_t K) {
    std::vector<double> e(K + 1);
    for (std::size_t b = 0; b <= K; ++b) e[b] = static_cast<double>(b) / static_cast<double>(K);
    e[K] = 1.0;
    return e;
}

SegmentationConfig SegmentationConfig::defaults() {
    SegmentationConfig c;
    c.validate();
    return c;
}

void SegmentationConfig::validate() {
    if (W < 1 || s < 1 || s > W) throw ConfigError("segmentation needs 1 <= s <= W");
    if (K < 1) throw ConfigError("segmentation needs K >= 1");
    if (bin_edges.empty()) bin_edges = equispaced_edges(K);
    if (bin_edges.size() != K + 1) throw ConfigError("bin_edges must have K+1 values");
    if (bin_edges.front() != 0.0 || bin_edges.back() != 1.0) throw ConfigError("bin_edges must span [0, 1]");
    for (std::size_t b = 1; b < bin_edges.size(); ++b) {
        if (!(bin_edges[b] > bin_edges[b - 1])) throw ConfigError("bin_edges must be strictly increasing");
    }
}

std::vector<double> SegmentationConfig::edges() const { return bin_edges.empty() ? equispaced_edges(K) : bin_edges; }

std::size_t SegmentationConfig::purge_radius() const { return (W + s - 1) / s - 1; }

nlohmann::json SegmentationConfig::to_json() const {
    return {{"W", W}, {"s", s}, {"K", K}, {"S", kNumMoments}, {"bin_edges", edges()}};
}

SegmentationConfig SegmentationConfig::from_json(const nlohmann::json& j) {
    SegmentationConfig c;
    c.W = j.value("W", c.W);
    c.s = j.value("s", c.s);
    c.K = j.value("K", c.K);
    if (j.contains("S") && j.at("S").get<std::size_t>() != kNumMoments) throw ConfigError("S is fixed at 4");
    if (j.contains("bin_edges")) c.bin_edges = j.at("bin_edges").get<std::vector<double>>();
    c.validate();
    return c;
}

std::string SegmentationConfig::hash() const { return sha256_hex(to_json().dump()); }

Segmentation segment(std::span<const std::size_t> stream_rows, const SegmentationConfig& cfg) {
    Segmentation out;
    std::size_t base = 0;
    for (std::size_t st = 0; st < stream_rows.size(); ++st) {
        const std::size_t n = stream_rows[st];
        if (n < cfg.W) {
            out.skipped_streams.push_back(st);
        } else {
            std::size_t w = 0;
            for (std::size_t off = 0; off + cfg.W <= n; off += cfg.s, ++w) {
                out.windows.push_back({st, base + off, w, off, off + cfg.W - 1});
            }
        }
        base += n;
    }
    return out;
}

Segmentation segment(const ScoreTable& table, const SegmentationConfig& cfg) {
    std::vector<std::size_t> rows;
    for (const auto& s : table.streams) rows.push_back(s.n_rows);
    return segment(rows, cfg);
}

std::vector<double> window_histogram(std::span<const double> values, std::span<const double> edges) {
    if (values.empty()) throw std::invalid_argument("window_histogram: empty input");
    if (edges.size() < 2) throw std::invalid_argument("window_histogram: need at least two edges");
    const std::size_t K = edges.size() - 1;
    std::vector<double> h(K, 0.0);
    for (double v : values) {
        if (!(v >= edges.front() && v <= edges.back())) throw std::invalid_argument("window_histogram: value outside edges");
        const auto it = std::upper_bound(edges.begin(), edges.end(), v);
        std::size_t b = static_cast<std::size_t>(it - edges.begin()) - 1;
        h[std::min(b, K - 1)] += 1.0;
    }
    const double m = static_cast<double>(values.size());
    for (double& x : h) x /= m;
    return h;
}

MomentVector window_moments(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("window_moments: empty input");
    const double m = static_cast<double>(values.size());
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) return {*lo, 0.0, 0.0, 0.0};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= m;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= m;
    m3 /= m;
    m4 /= m;
    if (m2 <= 0.0) return {mean, 0.0, 0.0, 0.0};
    return {mean, m2, m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

std::string_view feature_set_name(FeatureSet f) { return kFeatureSetNames[static_cast<std::size_t>(f)]; }

FeatureSet feature_set_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kFeatureSetNames.size(); ++i) {
        if (kFeatureSetNames[i] == name) return static_cast<FeatureSet>(i);
    }
    throw ConfigError("unknown feature set: " + std::string(name));
}

const std::vector<FeatureSet>& all_feature_sets() {
    static const std::vector<FeatureSet> all = [] {
        std::vector<FeatureSet> v;
        for (std::size_t i = 0; i < kFeatureSetNames.size(); ++i) v.push_back(static_cast<FeatureSet>(i));
        return v;
    }();
    return all;
}

std::size_t feature_dim(FeatureSet f, const SegmentationConfig& cfg, std::size_t columns) {
    const std::size_t T = columns;
    switch (f) {
        case FeatureSet::Ours: return T * (cfg.K + kNumMoments);
        case FeatureSet::RawP:
        case FeatureSet::KS:
        case FeatureSet::Probit: return T;
        case FeatureSet::G4: return T * kNumMoments;
        case FeatureSet::RawP_G4: return T * (1 + kNumMoments);
        case FeatureSet::RawP_KS: return 2 * T;
        case FeatureSet::RawP_G4_KS: return T * (2 + kNumMoments);
        case FeatureSet::OnlyBins: return T * cfg.K;
        case FeatureSet::OnlyStats: return T * kNumMoments;
        case FeatureSet::NoHighOrder: return T * (cfg.K + 2);
    }
    throw std::logic_error("unknown feature set");
}

std::vector<std::string> feature_names(FeatureSet f, const SegmentationConfig& cfg,
                                       const std::vector<std::string>& cols) {
    std::vector<std::string> out;
    auto per_column = [&](bool bins, std::size_t moments) {
        for (const auto& c : cols) {
            if (bins) {
                for (std::size_t b = 0; b < cfg.K; ++b) out.push_back(c + ".h" + std::to_string(b));
            }
            for (std::size_t k = 0; k < moments; ++k) out.push_back(c + "." + std::string(kMomentNames[k]));
        }
    };
    auto single = [&](const char* suffix) {
        for (const auto& c : cols) out.push_back(c + "." + suffix);
    };
    switch (f) {
        case FeatureSet::Ours: per_column(true, 4); break;
        case FeatureSet::RawP: single("rawp"); break;
        case FeatureSet::KS: single("ks"); break;
        case FeatureSet::Probit: single("probit"); break;
        case FeatureSet::G4: per_column(false, 4); break;
        case FeatureSet::RawP_G4: single("rawp"); per_column(false, 4); break;
        case FeatureSet::RawP_KS: single("rawp"); single("ks"); break;
        case FeatureSet::RawP_G4_KS: single("rawp"); per_column(false, 4); single("ks"); break;
        case FeatureSet::OnlyBins: per_column(true, 0); break;
        case FeatureSet::OnlyStats: per_column(false, 4); break;
        case FeatureSet::NoHighOrder: per_column(true, 2); break;
    }
    return out;
}

std::vector<double> baseline_features(std::span<const RawValues> rows, FeatureSet f) {
    if (rows.empty()) throw std::invalid_argument("baseline_features: empty window");
    std::vector<double> rawp, ks, g4, probit;
    for (std::size_t t = 0; t < kNumColumns; ++t) {
        const auto v = column_values(rows, t);
        double mean = 0.0;
        double pmean = 0.0;
        for (double x : v) {
            mean += x;
            pmean += normal_quantile(std::clamp(x, kScoreFloor, kScoreCeil));
        }
        rawp.push_back(mean / static_cast<double>(v.size()));
        probit.push_back(pmean / static_cast<double>(v.size()));
        ks.push_back(ks_uniform_distance(v));
        append_moments(g4, window_moments(v), 4);
    }
    std::vector<double> out;
    auto add = [&out](const std::vector<double>& part) { out.insert(out.end(), part.begin(), part.end()); };
    switch (f) {
        case FeatureSet::RawP: add(rawp); break;
        case FeatureSet::KS: add(ks); break;
        case FeatureSet::G4: add(g4); break;
        case FeatureSet::Probit: add(probit); break;
        case FeatureSet::RawP_G4: add(rawp); add(g4); break;
        case FeatureSet::RawP_KS: add(rawp); add(ks); break;
        case FeatureSet::RawP_G4_KS: add(rawp); add(g4); add(ks); break;
        default: throw ConfigError("not a baseline feature set: " + std::string(feature_set_name(f)));
    }
    return out;
}

std::vector<double> ablation_features(std::span<const RawValues> rows, FeatureSet f, const SegmentationConfig& cfg) {
    bool bins = true;
    std::size_t moments = kNumMoments;
    switch (f) {
        case FeatureSet::Ours: break;
        case FeatureSet::OnlyBins: moments = 0; break;
        case FeatureSet::OnlyStats: bins = false; break;
        case FeatureSet::NoHighOrder: moments = 2; break;
        default: throw ConfigError("not an ablation feature set: " + std::string(feature_set_name(f)));
    }
    if (rows.empty()) throw std::invalid_argument("ablation_features: empty window");
    const auto edges = cfg.edges();
    std::vector<double> out;
    out.reserve(feature_dim(f, cfg));
    for (std::size_t t = 0; t < kNumColumns; ++t) {
        const auto v = column_values(rows, t);
        if (bins) {
            const auto h = window_histogram(v, edges);
            out.insert(out.end(), h.begin(), h.end());
        }
        if (moments > 0) append_moments(out, window_moments(v), moments);
    }
    return out;
}

std::vector<double> window_features(std::span<const RawValues> rows, FeatureSet f, const SegmentationConfig& cfg) {
    switch (f) {
        case FeatureSet::Ours:
        case FeatureSet::OnlyBins:
        case FeatureSet::OnlyStats:
        case FeatureSet::NoHighOrder: return ablation_features(rows, f, cfg);
        default: return baseline_features(rows, f);
    }
}

FingerprintSample assemble_fingerprint(std::span<const RawValues> rows, const SegmentationConfig& cfg,
                                       const PanelManifest& panel) {
    if (panel.columns.size() != kNumColumns) throw ConfigError("panel/config mismatch: column count");
    if (rows.size() != cfg.W) throw ConfigError("window has " + std::to_string(rows.size()) + " rows, W is " +
                                                std::to_string(cfg.W));
    FingerprintSample s;
    s.x = ablation_features(rows, FeatureSet::Ours, cfg);
    s.row_span = {0, rows.size() - 1};
    return s;
}

FingerprintMatrix build_fingerprints(const ScoreTable& table, const SegmentationConfig& cfg, FeatureSet f,
                                     const std::vector<std::string>& column_names, int jobs) {
    const auto seg = segment(table, cfg);
    FingerprintMatrix m;
    m.feature_set = f;
    m.panel_version = table.panel_version;
    m.seg_hash = cfg.hash();
    m.feature_names = feature_names(f, cfg, column_names);
    const std::size_t n = seg.windows.size();
    m.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m.feature_names.size()));
    parallel_for(n, jobs, [&](std::size_t i) {
        const auto& w = seg.windows[i];
        const auto x = window_features(std::span(table.rows).subspan(w.first_row, cfg.W), f, cfg);
        for (std::size_t j = 0; j < x.size(); ++j) m.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[j];
    });
    for (const auto& w : seg.windows) {
        const auto& st = table.streams[w.stream];
        m.labels.push_back(st.label);
        m.groups.push_back(st.group_id);
        m.sources.push_back(st.source_id);
        m.window_index.push_back(w.window_index);
        m.row_spans.push_back({w.first_block, w.last_block});
        m.spans.push_back(w);
    }
    return m;
}

}  // namespace cipherprint
