// Command-line front end: one subcommand per pipeline stage.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cipherprint/pipeline.hpp"

using namespace cipherprint;

namespace {

struct Options {
    std::string config;
    std::string seed;
    std::string out;
    int jobs = 0;
    std::vector<std::string> feature_sets;
    std::vector<std::string> models;
    std::vector<std::string> datasets;
    std::string corpus_root;
    std::string regime;
    std::string ratio;
    std::size_t n_windows = 0;
    bool store_seed = false;
    // build-nulls
    std::string nulls_out = "data/null_tables.json";
    std::size_t null_samples = kNullTablesSamples;
};

RunConfig resolve(const Options& o) {
    RunConfig cfg = o.config.empty() ? RunConfig::defaults() : load_config(o.config);
    if (!o.seed.empty()) cfg.master_seed = parse_seed(o.seed);
    if (!o.out.empty()) cfg.output_root = o.out;
    if (o.jobs > 0) cfg.jobs = o.jobs;
    if (o.store_seed) cfg.store_seed = true;
    // --regime, --ratio and --corpus-root describe a single dataset that replaces the config's list.
    if (!o.regime.empty() || !o.ratio.empty() || !o.corpus_root.empty()) {
        DatasetSpec d;
        const std::size_t spc = cfg.datasets.empty() ? d.sources_per_cipher : cfg.datasets.front().sources_per_cipher;
        const std::size_t nw = cfg.datasets.empty() ? d.n_windows : cfg.datasets.front().n_windows;
        nlohmann::json j = {{"sources_per_cipher", spc}, {"n_windows", nw}};
        if (!o.corpus_root.empty()) {
            j["regime"] = "File";
            j["name"] = "corpus";
            j["corpus_root"] = o.corpus_root;
        } else {
            j["regime"] = o.regime.empty() ? "Regular_100" : o.regime;
            if (!o.ratio.empty()) {
                Ratio r;
                try {
                    r = parse_ratio(o.ratio);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("--ratio: ") + e.what());
                }
                j["ratio"] = o.ratio;
                j["name"] = "Mixed_" + std::to_string(r.num) + "_" + std::to_string(r.den);
            }
        }
        cfg.datasets = {DatasetSpec::from_json(j)};
    }
    if (o.n_windows > 0) {
        for (auto& d : cfg.datasets) d.n_windows = o.n_windows;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cipherprint: ciphertext-only cipher identification from calibrated randomness-test fingerprints"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "Run configuration (JSON)");
    app.add_option("--seed", o.seed, "Master seed: 64 hex digits, or any text (hashed)");
    app.add_option("--out", o.out, "Output root directory");
    app.add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--feature-set", o.feature_sets, "Restrict to these feature sets");
    app.add_option("--model", o.models, "Restrict to these models (logreg, svm_linear, mlp)");
    app.add_option("--dataset", o.datasets, "Restrict to these datasets");
    app.add_option("--corpus-root", o.corpus_root, "Ingest files under this directory as a File dataset");
    app.add_option("--regime", o.regime, "Single synthetic regime (Regular_100 ... Random_100)");
    app.add_option("--ratio", o.ratio, "Single mixed dataset with this regular ratio (e.g. 3/4)");
    app.add_option("--n-windows", o.n_windows, "Fingerprint windows per dataset");
    app.add_flag("--store-seed", o.store_seed, "Write the master seed itself into manifests");

    const std::vector<std::pair<std::string, std::string>> stages = {
        {"gen", "Generate plaintext and ciphertext datasets"},
        {"score", "Score unit blocks with the calibrated panel"},
        {"fingerprint", "Build windowed fingerprints"},
        {"train", "Train models on whole datasets"},
        {"eval", "Grouped cross-validation"},
        {"crossdomain", "Cross-domain gap matrices"},
        {"sanity", "Label-shuffle, bin-edge refit and leave-one-cipher-out checks"},
        {"report", "Render tables and figures"},
        {"all", "Run every stage in order"},
    };
    for (const auto& [name, help] : stages) app.add_subcommand(name, help);
    auto* nulls = app.add_subcommand("build-nulls", "Rebuild the empirical null tables");
    nulls->add_option("--tables-out", o.nulls_out, "Where to write the tables");
    nulls->add_option("--samples", o.null_samples, "Monte-Carlo unit blocks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "build-nulls") {
            const int jobs = o.jobs > 0 ? o.jobs : 1;
            std::cout << cmd_build_nulls(o.nulls_out, kNullTablesSeedText, o.null_samples, jobs).dump(2) << "\n";
            return 0;
        }
        const RunConfig cfg = resolve(o);
        const Selection sel{o.datasets, o.models, o.feature_sets};
        nlohmann::json out;
        if (cmd == "gen") out = cmd_gen(cfg, sel);
        else if (cmd == "score") out = cmd_score(cfg, sel);
        else if (cmd == "fingerprint") out = cmd_fingerprint(cfg, sel);
        else if (cmd == "train") out = cmd_train(cfg, sel);
        else if (cmd == "eval") out = cmd_eval(cfg, sel);
        else if (cmd == "crossdomain") out = cmd_crossdomain(cfg, sel);
        else if (cmd == "sanity") out = cmd_sanity(cfg, sel);
        else if (cmd == "report") out = cmd_report(cfg, sel);
        else if (cmd == "all") {
            cmd_gen(cfg, sel);
            cmd_score(cfg, sel);
            cmd_fingerprint(cfg, sel);
            cmd_train(cfg, sel);
            cmd_eval(cfg, sel);
            if (cfg.datasets.size() >= 2 && (sel.datasets.empty() || sel.datasets.size() >= 2)) cmd_crossdomain(cfg, sel);
            cmd_sanity(cfg, sel);
            out = cmd_report(cfg, sel);
        }
        std::cout << out.dump(2) << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
