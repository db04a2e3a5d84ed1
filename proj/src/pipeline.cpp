#include "cipherprint/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <iostream>
#include <set>

#include "cipherprint/artifacts.hpp"
#include "cipherprint/calibrate.hpp"
#include "cipherprint/cryptobox.hpp"
#include "cipherprint/svg.hpp"

namespace cipherprint {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kDatasetFormat = "cipherprint.dataset.v1";

void log(const std::string& msg) { std::cerr << "[cipherprint] " << msg << "\n"; }

std::string stem(ModelKind m, FeatureSet f) {
    return std::string(model_kind_name(m)) + "__" + std::string(feature_set_name(f));
}

// Fails with an actionable message naming the stage that produces the missing file.
void require(const fs::path& p, const std::string& producer) {
    if (!fs::exists(p)) {
        throw UpstreamMissing("missing " + p.string() + "; run `cipherprint " + producer + "` first");
    }
}

void check_config_hash(const json& header, const RunConfig& cfg, const fs::path& p) {
    const std::string got = header.value("config_hash", std::string());
    if (got != cfg.hash()) {
        throw HashMismatch(p.string() + " was produced under config " + got + ", current config is " + cfg.hash());
    }
}

template <class T, class F>
std::vector<T> narrow(const std::vector<T>& all, const std::vector<std::string>& wanted, F name_of,
                      const char* what) {
    if (wanted.empty()) return all;
    std::vector<T> out;
    for (const auto& w : wanted) {
        const auto it = std::find_if(all.begin(), all.end(), [&](const T& v) { return name_of(v) == w; });
        if (it == all.end()) throw ConfigError(std::string(what) + " not in config: " + w);
        out.push_back(*it);
    }
    return out;
}

std::vector<DatasetSpec> selected_datasets(const RunConfig& cfg, const Selection& sel) {
    return narrow(cfg.datasets, sel.datasets, [](const DatasetSpec& d) { return d.name; }, "dataset");
}
std::vector<ModelKind> selected_models(const RunConfig& cfg, const Selection& sel) {
    return narrow(cfg.models, sel.models, [](ModelKind m) { return std::string(model_kind_name(m)); }, "model");
}
std::vector<FeatureSet> selected_features(const RunConfig& cfg, const Selection& sel) {
    return narrow(cfg.feature_sets, sel.feature_sets, [](FeatureSet f) { return std::string(feature_set_name(f)); },
                  "feature set");
}

json provenance(const RunConfig& cfg) {
    return {{"config_hash", cfg.hash()},
            {"panel_version", default_calibrator().version()},
            {"master_seed_sha256", sha256_hex(ByteView(cfg.master_seed))},
            {"cv_seed", cfg.cv_seed}};
}

FingerprintMatrix load_checked_fingerprints(const RunConfig& cfg, const Layout& L, const std::string& d,
                                            FeatureSet f) {
    const fs::path p = L.fingerprints(d, f);
    require(p, "fingerprint");
    json header;
    FingerprintMatrix m = load_fingerprints(p, &header);
    check_config_hash(header, cfg, p);
    if (m.panel_version != default_calibrator().version()) {
        throw HashMismatch(p.string() + " uses panel " + m.panel_version + ", expected " + default_calibrator().version());
    }
    return m;
}

ScoreTable load_checked_scores(const RunConfig& cfg, const Layout& L, const std::string& d) {
    const fs::path p = L.scores(d);
    require(p, "score");
    json header;
    ScoreTable t = load_score_table(p, &header);
    check_config_hash(header, cfg, p);
    if (t.panel_version != default_calibrator().version()) {
        throw HashMismatch(p.string() + " uses panel " + t.panel_version + ", expected " + default_calibrator().version());
    }
    return t;
}

struct PlannedStream {
    std::string source_id;
    CipherLabel cipher;
    std::string plaintext_from;  // corpus entry id, or empty for synthetic
    std::size_t windows = 0;
};

std::string fmt3(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03zu", i);
    return buf;
}

}  // namespace

std::vector<std::string> cipher_class_names() {
    std::vector<std::string> out;
    for (auto c : kAllCiphers) out.emplace_back(cipher_name(c));
    return out;
}

json DatasetSpec::to_json() const {
    json j = {{"name", name},
              {"regime", regime_name(regime)},
              {"ratio", std::to_string(ratio.num) + "/" + std::to_string(ratio.den)},
              {"sources_per_cipher", sources_per_cipher},
              {"n_windows", n_windows}};
    if (regime == Regime::File) j["corpus_root"] = corpus_root;
    return j;
}

DatasetSpec DatasetSpec::from_json(const json& j) {
    DatasetSpec d;
    const std::string regime = j.value("regime", std::string("Regular_100"));
    const auto r = regime_from_name(regime);
    if (!r) throw ConfigError("unknown regime: " + regime);
    d.regime = *r;
    d.name = j.value("name", std::string(regime_name(d.regime)));
    d.ratio = d.regime == Regime::File ? Ratio{1, 1} : regime_ratio(d.regime);
    if (j.contains("ratio")) {
        try {
            d.ratio = parse_ratio(j.at("ratio").get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ConfigError("dataset " + d.name + ": " + e.what());
        }
    }
    d.sources_per_cipher = j.value("sources_per_cipher", d.sources_per_cipher);
    d.n_windows = j.value("n_windows", d.n_windows);
    d.corpus_root = j.value("corpus_root", std::string());
    if (d.regime == Regime::File && d.corpus_root.empty()) throw ConfigError("File dataset " + d.name + " needs corpus_root");
    if (d.sources_per_cipher < 1 || d.n_windows < 1) throw ConfigError("dataset " + d.name + " has an empty size");
    for (char c : d.name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
            throw ConfigError("dataset name may only use letters, digits, '_', '-', '.': " + d.name);
        }
    }
    return d;
}

std::size_t windows_per_stream(const DatasetSpec& d, const SegmentationConfig& seg) {
    const std::size_t streams = d.sources_per_cipher * static_cast<std::size_t>(kNumCiphers);
    const std::size_t fp_per_stream = (d.n_windows + streams - 1) / streams;
    const std::size_t rows = seg.W + seg.s * (fp_per_stream - 1);
    const std::size_t blocks_per_window = kWindowBytes / kUnitBlockBytes;
    return (rows + blocks_per_window - 1) / blocks_per_window;
}

Seed parse_seed(std::string_view text) {
    if (text.size() == 64 && std::all_of(text.begin(), text.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); })) {
        return seed_from_hex(text);
    }
    const auto h = sha256(as_bytes(text));
    Seed s{};
    std::copy(h.begin(), h.end(), s.begin());
    return s;
}

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.master_seed = parse_seed("cipherprint default master seed");
    for (auto r : {Regime::Regular100, Regime::Regular75, Regime::Regular50, Regime::Regular25, Regime::Random100}) {
        DatasetSpec d;
        d.name = std::string(regime_name(r));
        d.regime = r;
        d.ratio = regime_ratio(r);
        c.datasets.push_back(d);
    }
    c.feature_sets = all_feature_sets();
    c.models = all_model_kinds();
    c.panel_version = default_calibrator().version();
    return c;
}

RunConfig RunConfig::smoke() {
    RunConfig c = defaults();
    c.master_seed = parse_seed("cipherprint smoke seed");
    c.datasets.clear();
    for (auto r : {Regime::Regular100, Regime::Random100}) {
        DatasetSpec d;
        d.name = std::string(regime_name(r));
        d.regime = r;
        d.ratio = regime_ratio(r);
        d.sources_per_cipher = 5;
        d.n_windows = 240;
        c.datasets.push_back(d);
    }
    c.feature_sets = {FeatureSet::Ours, FeatureSet::RawP, FeatureSet::OnlyBins, FeatureSet::OnlyStats};
    c.repeats = 1;
    Hyper mlp = Hyper::defaults(ModelKind::MLP);
    mlp.epochs = 30;
    c.hyper[ModelKind::MLP] = mlp;
    return c;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c = defaults();
    try {
        if (j.contains("master_seed")) c.master_seed = parse_seed(j.at("master_seed").get<std::string>());
        c.store_seed = j.value("store_seed", false);
        if (j.contains("datasets")) {
            c.datasets.clear();
            for (const auto& d : j.at("datasets")) c.datasets.push_back(DatasetSpec::from_json(d));
        }
        if (j.contains("segmentation")) c.seg = SegmentationConfig::from_json(j.at("segmentation"));
        if (j.contains("feature_sets")) {
            c.feature_sets.clear();
            for (const auto& f : j.at("feature_sets")) c.feature_sets.push_back(feature_set_from_name(f.get<std::string>()));
        }
        if (j.contains("models")) {
            c.models.clear();
            for (const auto& m : j.at("models")) c.models.push_back(model_kind_from_name(m.get<std::string>()));
        }
        if (j.contains("cv")) {
            const auto& cv = j.at("cv");
            c.folds = cv.value("folds", c.folds);
            c.repeats = cv.value("repeats", c.repeats);
            c.cv_seed = cv.value("seed", c.cv_seed);
        }
        if (j.contains("hyper")) {
            for (const auto& [name, h] : j.at("hyper").items()) {
                const ModelKind k = model_kind_from_name(name);
                json merged = Hyper::defaults(k).to_json();
                merged.update(h);
                c.hyper[k] = Hyper::from_json(merged);
            }
        }
        if (j.contains("panel_version")) c.panel_version = j.at("panel_version").get<std::string>();
        if (j.contains("output_root")) c.output_root = j.at("output_root").get<std::string>();
        c.jobs = j.value("jobs", c.jobs);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (c.datasets.empty()) throw ConfigError("config lists no datasets");
    if (c.feature_sets.empty() || c.models.empty()) throw ConfigError("config lists no feature sets or models");
    if (c.folds < 2 || c.repeats < 1) throw ConfigError("cv needs folds >= 2 and repeats >= 1");
    std::set<std::string> names;
    for (const auto& d : c.datasets) {
        if (!names.insert(d.name).second) throw ConfigError("duplicate dataset name: " + d.name);
    }
    if (c.panel_version != default_calibrator().version()) {
        throw HashMismatch("config pins panel " + c.panel_version + " but this build provides " +
                           default_calibrator().version());
    }
    return c;
}

json RunConfig::to_json() const {
    json datasets_j = json::array();
    for (const auto& d : datasets) datasets_j.push_back(d.to_json());
    json fs_j = json::array();
    for (auto f : feature_sets) fs_j.push_back(feature_set_name(f));
    json models_j = json::array();
    json hyper_j = json::object();
    for (auto m : models) {
        models_j.push_back(model_kind_name(m));
        hyper_j[std::string(model_kind_name(m))] = hyper_for(m).to_json();
    }
    return {{"format", "cipherprint.run-config.v1"},
            {"master_seed", seed_to_hex(master_seed)},
            {"store_seed", store_seed},
            {"datasets", datasets_j},
            {"segmentation", seg.to_json()},
            {"feature_sets", fs_j},
            {"models", models_j},
            {"cv", {{"folds", folds}, {"repeats", repeats}, {"seed", cv_seed}}},
            {"hyper", hyper_j},
            {"panel_version", panel_version}};
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

Hyper RunConfig::hyper_for(ModelKind k) const {
    const auto it = hyper.find(k);
    return it == hyper.end() ? Hyper::defaults(k) : it->second;
}

CvOptions RunConfig::cv_options() const {
    CvOptions o;
    o.folds = folds;
    o.repeats = repeats;
    o.seed = cv_seed;
    o.purge_radius = seg.purge_radius();
    o.jobs = jobs;
    return o;
}

const DatasetSpec& RunConfig::dataset(const std::string& name) const {
    for (const auto& d : datasets) {
        if (d.name == name) return d;
    }
    throw ConfigError("dataset not in config: " + name);
}

RunConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    RunConfig c = RunConfig::from_json(read_json(path));
    // Relative corpus roots resolve against the config file's directory.
    for (auto& d : c.datasets) {
        if (d.regime == Regime::File && fs::path(d.corpus_root).is_relative()) {
            d.corpus_root = (path.parent_path() / d.corpus_root).lexically_normal().string();
        }
    }
    return c;
}

fs::path Layout::fingerprints(const std::string& d, FeatureSet f) const {
    return dataset_dir(d) / ("fp_" + std::string(feature_set_name(f)) + ".cpfp");
}
fs::path Layout::model(const std::string& d, ModelKind m, FeatureSet f) const {
    return root / "models" / d / (stem(m, f) + ".cpm");
}
fs::path Layout::eval(const std::string& d, ModelKind m, FeatureSet f) const {
    return root / "eval" / d / (stem(m, f) + ".json");
}
fs::path Layout::crossdomain(ModelKind m, FeatureSet f) const { return root / "crossdomain" / (stem(m, f) + ".json"); }

json cmd_gen(const RunConfig& cfg, const Selection& sel) {
    const Layout L{cfg.output_root};
    json summary = json::array();
    for (const auto& d : selected_datasets(cfg, sel)) {
        const std::size_t nwin = windows_per_stream(d, cfg.seg);
        std::vector<PlannedStream> plan;
        std::vector<PlaintextStream> corpus_files;
        json corpus_j;
        if (d.regime == Regime::File) {
            const auto ingest = ingest_corpus(d.corpus_root);
            if (ingest.manifest.entries.empty()) {
                throw ConfigError("corpus " + d.corpus_root + " has no file of at least " + std::to_string(kWindowBytes) +
                                  " bytes (" + std::to_string(ingest.excluded.size()) + " excluded)");
            }
            CorpusManifest cm = ingest.manifest;
            cm.master_seed_sha256 = sha256_hex(ByteView(cfg.master_seed));
            if (cfg.store_seed) cm.master_seed = cfg.master_seed;
            write_file_atomic(L.dataset_dir(d.name) / "corpus_manifest.json", cm.serialize());
            json excluded = json::array();
            for (const auto& e : ingest.excluded) excluded.push_back({{"path", e.relative_path}, {"length", e.length}});
            write_json_atomic(L.dataset_dir(d.name) / "corpus_excluded.json", excluded);
            for (const auto& e : cm.entries) {
                corpus_files.push_back(load_corpus_entry(d.corpus_root, e));
                const std::size_t usable = std::min(nwin, static_cast<std::size_t>(e.length / kWindowBytes));
                for (auto c : kAllCiphers) {
                    plan.push_back({d.name + "/" + std::string(cipher_name(c)) + "/" + e.source_id, c, e.source_id, usable});
                }
            }
        } else {
            for (auto c : kAllCiphers) {
                for (std::size_t i = 0; i < d.sources_per_cipher; ++i) {
                    plan.push_back({d.name + "/" + std::string(cipher_name(c)) + "/" + fmt3(i), c, "", nwin});
                }
            }
        }
        std::vector<Bytes> plain(plan.size()), cipher(plan.size());
        parallel_for(plan.size(), cfg.jobs, [&](std::size_t i) {
            const auto& ps = plan[i];
            const std::size_t n = ps.windows * kWindowBytes;
            if (ps.plaintext_from.empty()) {
                const Seed seed = derive_seed(cfg.master_seed, "plaintext|" + ps.source_id);
                plain[i] = gen_mixed(seed, d.ratio, n);
            } else {
                const auto it = std::find_if(corpus_files.begin(), corpus_files.end(),
                                             [&](const PlaintextStream& s) { return s.source_id == ps.plaintext_from; });
                plain[i].assign(it->bytes.begin(), it->bytes.begin() + static_cast<std::ptrdiff_t>(n));
            }
            cipher[i].reserve(n);
            for (std::size_t w = 0; w < ps.windows; ++w) {
                const ByteView window(plain[i].data() + w * kWindowBytes, kWindowBytes);
                const auto km = derive_window_keys(cfg.master_seed, ps.cipher, ps.source_id, w);
                const Bytes ct = encrypt_window(window, ps.cipher, km);
                cipher[i].insert(cipher[i].end(), ct.begin(), ct.end());
            }
        });
        std::string plain_all, cipher_all;
        json streams = json::array();
        for (std::size_t i = 0; i < plan.size(); ++i) {
            streams.push_back({{"source_id", plan[i].source_id},
                               {"group_id", plan[i].source_id},
                               {"cipher", cipher_name(plan[i].cipher)},
                               {"label", static_cast<int>(plan[i].cipher)},
                               {"mode", cipher_shape(plan[i].cipher).mode},
                               {"plaintext_source", plan[i].plaintext_from.empty() ? plan[i].source_id : plan[i].plaintext_from},
                               {"offset", cipher_all.size()},
                               {"length", cipher[i].size()},
                               {"windows", plan[i].windows},
                               {"plaintext_sha256", sha256_hex(plain[i])},
                               {"ciphertext_sha256", sha256_hex(cipher[i])}});
            plain_all.append(plain[i].begin(), plain[i].end());
            cipher_all.append(cipher[i].begin(), cipher[i].end());
        }
        json manifest = {{"format", kDatasetFormat},
                         {"dataset", d.to_json()},
                         {"generator", d.regime == Regime::File ? "corpus-file" : std::string(kStructuredGeneratorId)},
                         {"config_hash", cfg.hash()},
                         {"master_seed_sha256", sha256_hex(ByteView(cfg.master_seed))},
                         {"window_bytes", kWindowBytes},
                         {"plaintext_sha256", sha256_hex(plain_all)},
                         {"ciphertext_sha256", sha256_hex(cipher_all)},
                         {"streams", streams}};
        if (cfg.store_seed) manifest["master_seed"] = seed_to_hex(cfg.master_seed);
        write_file_atomic(L.plaintext(d.name), plain_all);
        write_file_atomic(L.ciphertext(d.name), cipher_all);
        write_json_atomic(L.manifest(d.name), manifest);
        log("gen " + d.name + ": " + std::to_string(plan.size()) + " streams, " + std::to_string(cipher_all.size()) + " bytes");
        summary.push_back({{"dataset", d.name}, {"streams", plan.size()}, {"bytes", cipher_all.size()}});
    }
    return summary;
}

json cmd_score(const RunConfig& cfg, const Selection& sel) {
    const Layout L{cfg.output_root};
    const Calibrator& cal = default_calibrator();
    json summary = json::array();
    for (const auto& d : selected_datasets(cfg, sel)) {
        require(L.manifest(d.name), "gen");
        const json manifest = read_json(L.manifest(d.name));
        check_config_hash(manifest, cfg, L.manifest(d.name));
        require(L.ciphertext(d.name), "gen");
        const std::string ct = read_file(L.ciphertext(d.name));
        if (sha256_hex(ct) != manifest.at("ciphertext_sha256")) {
            throw HashMismatch(L.ciphertext(d.name).string() + " does not match its manifest");
        }
        ScoreTable table;
        table.panel_version = cal.version();
        struct Job {
            std::size_t offset;
            std::size_t row;
        };
        std::vector<Job> jobs;
        for (const auto& s : manifest.at("streams")) {
            const std::size_t off = s.at("offset"), len = s.at("length");
            StreamExtent e{s.at("source_id"), s.at("group_id"), s.at("label"), jobs.size(), len / kUnitBlockBytes,
                           len % kUnitBlockBytes};
            for (std::size_t b = 0; b < e.n_rows; ++b) jobs.push_back({off + b * kUnitBlockBytes, jobs.size()});
            table.streams.push_back(e);
        }
        table.rows.resize(jobs.size());
        std::vector<std::string> row_source(jobs.size());
        for (const auto& e : table.streams) {
            for (std::size_t k = 0; k < e.n_rows; ++k) row_source[e.first_row + k] = e.source_id;
        }
        parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
            RawStatRow raw;
            raw.values = score_block(as_bytes(std::string_view(ct).substr(jobs[i].offset, kUnitBlockBytes)));
            raw.source_id = row_source[i];
            raw.block_index = i;
            table.rows[i] = cal.calibrate_row(raw).scores;
        });
        json extra = provenance(cfg);
        extra["dataset"] = d.name;
        extra["manifest_sha256"] = sha256_hex(read_file(L.manifest(d.name)));
        save_score_table(L.scores(d.name), table, cal.panel().column_names(), extra);
        log("score " + d.name + ": " + std::to_string(table.rows.size()) + " unit blocks");
        summary.push_back({{"dataset", d.name}, {"rows", table.rows.size()}});
    }
    return summary;
}

json cmd_fingerprint(const RunConfig& cfg, const Selection& sel) {
    const Layout L{cfg.output_root};
    const auto names = default_calibrator().panel().column_names();
    json summary = json::array();
    for (const auto& d : selected_datasets(cfg, sel)) {
        const ScoreTable table = load_checked_scores(cfg, L, d.name);
        for (auto f : selected_features(cfg, sel)) {
            const FingerprintMatrix m = build_fingerprints(table, cfg.seg, f, names, cfg.jobs);
            json extra = provenance(cfg);
            extra["dataset"] = d.name;
            extra["segmentation"] = cfg.seg.to_json();
            save_fingerprints(L.fingerprints(d.name, f), m, extra);
            summary.push_back({{"dataset", d.name}, {"feature_set", feature_set_name(f)}, {"n", m.size()},
                               {"dim", m.X.cols()}});
        }
        log("fingerprint " + d.name + " done");
    }
    return summary;
}

json cmd_train(const RunConfig& cfg, const Selection& sel) {
    const Layout L{cfg.output_root};
    json summary = json::array();
    for (const auto& d : selected_datasets(cfg, sel)) {
        for (auto f : selected_features(cfg, sel)) {
            const FingerprintMatrix data = load_checked_fingerprints(cfg, L, d.name, f);
            for (auto m : selected_models(cfg, sel)) {
                Hyper h = cfg.hyper_for(m);
                h.n_classes = kNumCiphers;
                TrainedPipeline p = train_full(data, m, h);
                p.config_hash = cfg.hash();
                save_pipeline(p, L.model(d.name, m, f));
                summary.push_back({{"dataset", d.name}, {"model", model_kind_name(m)}, {"feature_set", feature_set_name(f)},
                                   {"final_loss", p.model.loss_trace.back()}});
            }
        }
        log("train " + d.name + " done");
    }
    return summary;
}

json cmd_eval(const RunConfig& cfg, const Selection& sel) {
    const Layout L{cfg.output_root};
    json summary = json::array();
    for (const auto& d : selected_datasets(cfg, sel)) {
        for (auto f : selected_features(cfg, sel)) {
            const FingerprintMatrix data = load_checked_fingerprints(cfg, L, d.name, f);
            for (auto m : selected_models(cfg, sel)) {
                Hyper h = cfg.hyper_for(m);
                h.n_classes = kNumCiphers;
                const CvResult cv = cross_validate(data, m, h, cfg.cv_options());
                json out = provenance(cfg);
                out["dataset"] = d.name;
                out["model"] = model_kind_name(m);
                out["feature_set"] = feature_set_name(f);
                out["hyper"] = h.to_json();
                out["result"] = cv.to_json();
                write_json_atomic(L.eval(d.name, m, f), out);
                log("eval " + d.name + " " + stem(m, f) + ": acc " + format_number(cv.mean.accuracy) + " f1 " +
                    format_number(cv.mean.macro_f1) + " auc " + format_number(cv.mean.macro_auc));
                summary.push_back({{"dataset", d.name}, {"model", model_kind_name(m)}, {"feature_set", feature_set_name(f)},
                                   {"mean", cv.mean.to_json()}});
            }
            if (f == FeatureSet::Ours) {
                json out = provenance(cfg);
                out["dataset"] = d.name;
                out["feature_set"] = feature_set_name(f);
                out["class_names"] = cipher_class_names();
                try {
                    out["result"] = separability_analysis(data.X, data.labels).to_json();
                } catch (const std::invalid_argument& e) {
                    out["skipped"] = e.what();  // too few samples per class for the dimension
                }
                write_json_atomic(L.root / "eval" / d.name / "separability.json", out);
            }
        }
    }
    return summary;
}

json cmd_crossdomain(const RunConfig& cfg, const Selection& sel) {
    const Layout L{cfg.output_root};
    const auto datasets = selected_datasets(cfg, sel);
    if (datasets.size() < 2) throw ConfigError("crossdomain needs at least two datasets");
    json summary = json::array();
    for (auto f : selected_features(cfg, sel)) {
        std::vector<FingerprintMatrix> data;
        for (const auto& d : datasets) data.push_back(load_checked_fingerprints(cfg, L, d.name, f));
        std::vector<NamedDataset> named;
        for (std::size_t i = 0; i < datasets.size(); ++i) named.push_back({datasets[i].name, &data[i]});
        for (auto m : selected_models(cfg, sel)) {
            Hyper h = cfg.hyper_for(m);
            h.n_classes = kNumCiphers;
            const GapMatrix gm = run_cross_domain(named, m, h, cfg.cv_options());
            json out = provenance(cfg);
            out["model"] = model_kind_name(m);
            out["feature_set"] = feature_set_name(f);
            out["result"] = gm.to_json();
            write_json_atomic(L.crossdomain(m, f), out);
            fs::path svg_path = L.crossdomain(m, f);
            svg_path.replace_extension(".svg");
            write_file_atomic(svg_path, svg::heatmap("Macro-F1 gap % (" + stem(m, f) + "), rows train, cols test",
                                                     gm.domains, gm.domains, gm.gaps.at("macro_f1"), "%"));
            log("crossdomain " + stem(m, f) + " done");
            summary.push_back({{"model", model_kind_name(m)}, {"feature_set", feature_set_name(f)}});
        }
    }
    return summary;
}

json cmd_sanity(const RunConfig& cfg, const Selection& sel) {
    const Layout L{cfg.output_root};
    const auto names = default_calibrator().panel().column_names();
    const auto models = selected_models(cfg, sel);
    json summary = json::array();
    for (const auto& d : selected_datasets(cfg, sel)) {
        const FingerprintMatrix data = load_checked_fingerprints(cfg, L, d.name, FeatureSet::Ours);
        const ScoreTable table = load_checked_scores(cfg, L, d.name);
        json out = provenance(cfg);
        out["dataset"] = d.name;
        json shuffle = json::object();
        for (auto m : models) {
            Hyper h = cfg.hyper_for(m);
            h.n_classes = kNumCiphers;
            shuffle[std::string(model_kind_name(m))] = sanity_label_shuffle(data, m, h, cfg.cv_options()).to_json();
        }
        out["label_shuffle"] = shuffle;
        // The edge-refit and leave-one-cipher-out checks use the first selected model.
        Hyper h = cfg.hyper_for(models.front());
        h.n_classes = kNumCiphers;
        out["check_model"] = model_kind_name(models.front());
        out["bin_edge_refit"] = sanity_bin_edge_refit(table, cfg.seg, names, models.front(), h, cfg.cv_options()).to_json();
        out["leave_one_cipher_out"] =
            sanity_leave_one_cipher_out(data, models.front(), h, cfg.cv_options(), cipher_class_names()).to_json();
        write_json_atomic(L.sanity(d.name), out);
        log("sanity " + d.name + " done");
        summary.push_back({{"dataset", d.name}});
    }
    return summary;
}

json cmd_report(const RunConfig& cfg, const Selection& sel) {
    const Layout L{cfg.output_root};
    const fs::path R = L.report_dir();
    const auto datasets = selected_datasets(cfg, sel);
    const auto models = selected_models(cfg, sel);
    const auto features = selected_features(cfg, sel);
    json files = json::object();
    auto emit = [&](const std::string& name, const std::string& content) {
        write_file_atomic(R / name, content);
        files[name] = sha256_hex(content);
    };
    auto load_eval = [&](const std::string& d, ModelKind m, FeatureSet f) {
        const fs::path p = L.eval(d, m, f);
        require(p, "eval");
        const json j = read_json(p);
        check_config_hash(j, cfg, p);
        return j.at("result").at("mean");
    };
    auto metric_cells = [](const json& mean) {
        auto cell = [](const json& v) { return v.is_number() ? format_number(v.get<double>()) : std::string(); };
        return cell(mean.at("accuracy")) + "," + cell(mean.at("macro_f1")) + "," + cell(mean.at("macro_auc"));
    };

    const bool have_ours = std::find(features.begin(), features.end(), FeatureSet::Ours) != features.end();
    if (have_ours) {
        std::string t5 = "model,dataset,accuracy,macro_f1,macro_auc\n";
        for (auto m : models) {
            for (const auto& d : datasets) {
                t5 += std::string(model_kind_name(m)) + "," + d.name + "," + metric_cells(load_eval(d.name, m, FeatureSet::Ours)) + "\n";
            }
        }
        emit("table_v.csv", t5);
    }
    std::string t6 = "dataset,feature_set,model,accuracy,macro_f1,macro_auc\n";
    for (const auto& d : datasets) {
        for (auto f : features) {
            for (auto m : models) {
                t6 += d.name + "," + std::string(feature_set_name(f)) + "," + std::string(model_kind_name(m)) + "," +
                      metric_cells(load_eval(d.name, m, f)) + "\n";
            }
        }
    }
    emit("table_vi.csv", t6);

    if (datasets.size() >= 2) {
        std::string gaps = "model,feature_set,metric,source,target,value,gap_percent\n";
        for (auto f : features) {
            for (auto m : models) {
                const fs::path p = L.crossdomain(m, f);
                require(p, "crossdomain");
                const json j = read_json(p);
                check_config_hash(j, cfg, p);
                const auto& r = j.at("result");
                const auto domains = r.at("domains").get<std::vector<std::string>>();
                for (const auto& metric : {"accuracy", "macro_f1", "macro_auc"}) {
                    for (std::size_t s = 0; s < domains.size(); ++s) {
                        for (std::size_t t = 0; t < domains.size(); ++t) {
                            const auto& v = r.at("values").at(metric).at(s).at(t);
                            const auto& g = r.at("gaps_percent").at(metric).at(s).at(t);
                            gaps += std::string(model_kind_name(m)) + "," + std::string(feature_set_name(f)) + "," + metric +
                                    "," + domains[s] + "," + domains[t] + "," +
                                    (v.is_number() ? format_number(v.get<double>()) : "") + "," +
                                    (g.is_number() ? format_number(g.get<double>()) : "") + "\n";
                        }
                    }
                }
                std::vector<std::vector<double>> cells;
                for (const auto& row : r.at("gaps_percent").at("macro_f1")) {
                    std::vector<double> vals;
                    for (const auto& v : row) vals.push_back(v.is_number() ? v.get<double>() : std::nan(""));
                    cells.push_back(vals);
                }
                emit("gap_macro_f1__" + stem(m, f) + ".svg",
                     svg::heatmap("Macro-F1 gap % (" + stem(m, f) + "), rows train, cols test", domains, domains, cells, "%"));
            }
        }
        emit("gaps.csv", gaps);
    }

    const auto names = default_calibrator().panel().column_names();
    const auto classes = cipher_class_names();
    for (const auto& d : datasets) {
        const ScoreTable table = load_checked_scores(cfg, L, d.name);
        for (const std::string col : {"nist_nonoverlap_000000001", "nist_monobit"}) {
            const auto dc = export_distribution_fingerprint(table, col, names, classes, cfg.seg.K);
            std::vector<svg::Ridge> ridges;
            for (std::size_t c = 0; c < classes.size(); ++c) {
                svg::Ridge r{classes[c], {}, dc.mean_curves[c]};
                for (const auto& [src, curve] : dc.seed_curves[c]) r.thin.push_back(curve);
                ridges.push_back(std::move(r));
            }
            emit("dist_" + d.name + "__" + col + ".csv", dc.to_csv());
            emit("dist_" + d.name + "__" + col + ".svg", svg::ridgeline(col + " scores, " + d.name, ridges));
        }
    }

    json sanity = json::object();
    for (const auto& d : datasets) {
        if (fs::exists(L.sanity(d.name))) {
            const json j = read_json(L.sanity(d.name));
            check_config_hash(j, cfg, L.sanity(d.name));
            json brief = {{"bin_edge_refit_pass", j.at("bin_edge_refit").at("pass")}};
            for (const auto& [m, s] : j.at("label_shuffle").items()) brief["label_shuffle_pass_" + m] = s.at("pass");
            sanity[d.name] = brief;
        }
    }
    json summary = provenance(cfg);
    summary["format"] = "cipherprint.report.v1";
    summary["datasets"] = json::array();
    for (const auto& d : datasets) summary["datasets"].push_back(d.name);
    summary["files"] = files;
    summary["sanity"] = sanity;
    write_json_atomic(R / "report.json", summary);
    log("report written to " + R.string());
    return summary;
}

json cmd_build_nulls(const fs::path& out, std::string_view seed_text, std::size_t samples, int jobs) {
    const auto h = sha256(as_bytes(seed_text));
    Seed seed{};
    std::copy(h.begin(), h.end(), seed.begin());
    const NullTables t = build_null_tables(seed, samples, jobs);
    const std::string text = t.to_json().dump() + "\n";
    write_file_atomic(out, text);
    return {{"path", out.string()}, {"samples", samples}, {"sha256", sha256_hex(text)}};
}

}  // namespace cipherprint
