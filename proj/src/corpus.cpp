#include "cipherprint/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>

#include "cipherprint/cryptobox.hpp"

namespace cipherprint {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 6> kRegimeNames = {
    "Regular_100", "Regular_75", "Regular_50", "Regular_25", "Random_100", "File",
};

// Training sample for the structured generator. Sentences end with a newline.
constexpr std::string_view kTrainingText =
    "The harbor office opens at seven and the first ferry leaves at half past eight\n"
    "Each morning the clerk writes the tide table on the board beside the door\n"
    "Fishing boats return before noon when the wind turns to the north\n"
    "The market sells bread and cheese and apples from the valley farms\n"
    "Visitors often ask where the old lighthouse stands and how to reach it\n"
    "A narrow road climbs the hill behind the church and ends at the station\n"
    "In winter the trains run twice a day and the platform is quiet\n"
    "The school has 240 pupils and 12 teachers and a small library\n"
    "Children walk along the river path and stop to watch the ducks\n"
    "The council meets on the first Monday of every month in the town hall\n"
    "Reports from the meeting are printed in the local paper on Thursday\n"
    "Rain is expected this week so the garden show has moved indoors\n"
    "The baker on Mill Street starts work at four and sells out by ten\n"
    "Many families keep a boat and spend the summer on the water\n"
    "Old maps of the coast show the shape of the bay before the sea wall\n"
    "The museum holds letters and tools and photographs from 1890 to 1950\n"
    "Please return all books to the desk before the end of the month\n"
    "The weather station records the temperature every hour of the day\n"
    "Tea and coffee are served in the hall after the evening concert\n"
    "New houses are planned near the school and the sports field\n"
    "The ferry carries cars and bicycles and up to 300 passengers\n"
    "Members of the rowing club train on the river three times a week\n"
    "A storm in March damaged the pier and closed the beach for a month\n"
    "The post office is open from nine until five on weekdays\n"
    "Most shops close early on Sunday and open again on Monday morning\n"
    "The history society will give a talk on the building of the canal\n"
    "Tickets for the summer fair can be bought at the library\n"
    "The river rises quickly after heavy rain in the hills\n";

constexpr int kAlphabet = 64;
constexpr std::size_t kRecordLen = 64;

int symbol_of(char c) {
    if (c >= 'a' && c <= 'z') return c - 'a';
    if (c >= 'A' && c <= 'Z') return 26 + (c - 'A');
    if (c >= '0' && c <= '9') return 52 + (c - '0');
    if (c == ' ') return 62;
    if (c == '\n') return 63;
    return -1;
}

char char_of(int s) {
    if (s < 26) return static_cast<char>('a' + s);
    if (s < 52) return static_cast<char>('A' + (s - 26));
    if (s < 62) return static_cast<char>('0' + (s - 52));
    return s == 62 ? ' ' : '\n';
}

// Cumulative next-symbol counts for every order-2 context, with order-1 fallback
// for contexts absent from the training sample.
struct MarkovModel {
    std::vector<std::uint32_t> cum2;  // [a][b][next] cumulative
    std::vector<std::uint32_t> cum1;  // [b][next] cumulative
    std::vector<int> text;

    MarkovModel() : cum2(kAlphabet * kAlphabet * kAlphabet, 0), cum1(kAlphabet * kAlphabet, 0) {
        for (char c : kTrainingText) text.push_back(symbol_of(c));
        const std::size_t n = text.size();
        for (std::size_t i = 0; i < n; ++i) {
            int a = text[i];
            int b = text[(i + 1) % n];
            int c = text[(i + 2) % n];
            cum2[(a * kAlphabet + b) * kAlphabet + c] += 1;
            cum1[b * kAlphabet + c] += 1;
        }
        for (int ctx = 0; ctx < kAlphabet * kAlphabet; ++ctx) {
            for (int s = 1; s < kAlphabet; ++s) cum2[ctx * kAlphabet + s] += cum2[ctx * kAlphabet + s - 1];
        }
        for (int ctx = 0; ctx < kAlphabet; ++ctx) {
            for (int s = 1; s < kAlphabet; ++s) cum1[ctx * kAlphabet + s] += cum1[ctx * kAlphabet + s - 1];
        }
    }

    int sample(int a, int b, KeyedStream& rng) const {
        const std::uint32_t* row = &cum2[static_cast<std::size_t>((a * kAlphabet + b) * kAlphabet)];
        if (row[kAlphabet - 1] == 0) row = &cum1[static_cast<std::size_t>(b * kAlphabet)];
        const std::uint32_t total = row[kAlphabet - 1];
        const auto r = static_cast<std::uint32_t>(rng.below(total));
        return static_cast<int>(std::upper_bound(row, row + kAlphabet, r) - row);
    }
};

const MarkovModel& markov() {
    static const MarkovModel model;
    return model;
}

Bytes read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

std::string_view regime_name(Regime r) { return kRegimeNames[static_cast<std::size_t>(r)]; }

std::optional<Regime> regime_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kRegimeNames.size(); ++i) {
        std::string compact(kRegimeNames[i]);
        compact.erase(std::remove(compact.begin(), compact.end(), '_'), compact.end());
        if (name == kRegimeNames[i] || name == compact) return static_cast<Regime>(i);
    }
    return std::nullopt;
}

Ratio regime_ratio(Regime r) {
    switch (r) {
        case Regime::Regular100: return {1, 1};
        case Regime::Regular75: return {3, 4};
        case Regime::Regular50: return {1, 2};
        case Regime::Regular25: return {1, 4};
        case Regime::Random100: return {0, 1};
        case Regime::File: break;
    }
    throw std::invalid_argument("File regime has no synthetic ratio");
}

Ratio parse_ratio(std::string_view text) {
    auto parse_u = [](std::string_view s) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) {
            throw std::invalid_argument("bad ratio component: " + std::string(s));
        }
        return v;
    };
    Ratio r;
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        r = {parse_u(text.substr(0, slash)), parse_u(text.substr(slash + 1))};
    } else if (auto dot = text.find('.'); dot != std::string_view::npos) {
        std::string digits = std::string(text.substr(0, dot)) + std::string(text.substr(dot + 1));
        std::uint64_t den = 1;
        for (std::size_t i = dot + 1; i < text.size(); ++i) den *= 10;
        r = {parse_u(digits), den};
    } else {
        r = {parse_u(text), 1};
    }
    if (r.den == 0 || r.num > r.den) throw std::invalid_argument("ratio must lie in [0,1]");
    return r;
}

nlohmann::json CorpusManifest::to_json() const {
    nlohmann::json j;
    j["format"] = "cipherprint.corpus-manifest.v1";
    j["master_seed_sha256"] = master_seed_sha256;
    if (master_seed) j["master_seed"] = seed_to_hex(*master_seed);
    auto arr = nlohmann::json::array();
    for (const auto& e : entries) {
        arr.push_back({{"source_id", e.source_id},
                       {"path", e.relative_path},
                       {"regime", regime_name(e.regime)},
                       {"length", e.length},
                       {"content_hash", e.content_hash}});
    }
    j["entries"] = std::move(arr);
    return j;
}

CorpusManifest CorpusManifest::from_json(const nlohmann::json& j) {
    CorpusManifest m;
    m.master_seed_sha256 = j.value("master_seed_sha256", "");
    if (j.contains("master_seed")) m.master_seed = seed_from_hex(j.at("master_seed").get<std::string>());
    for (const auto& e : j.at("entries")) {
        CorpusEntry ce;
        ce.source_id = e.at("source_id").get<std::string>();
        ce.relative_path = e.at("path").get<std::string>();
        ce.regime = regime_from_name(e.at("regime").get<std::string>()).value_or(Regime::File);
        ce.length = e.at("length").get<std::uint64_t>();
        ce.content_hash = e.at("content_hash").get<std::string>();
        m.entries.push_back(std::move(ce));
    }
    return m;
}

std::string CorpusManifest::serialize() const { return to_json().dump(2) + "\n"; }

IngestResult ingest_corpus(const fs::path& root, std::size_t min_length) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw ConfigError("corpus root is not a readable directory: " + root.string());

    std::vector<fs::path> files;
    fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
    if (ec) throw ConfigError("cannot list corpus root " + root.string() + ": " + ec.message());
    for (const auto& entry : it) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    IngestResult result;
    for (const auto& p : files) {
        const std::string rel = fs::relative(p, root).generic_string();
        const auto size = static_cast<std::uint64_t>(fs::file_size(p));
        if (size < min_length) {
            result.excluded.push_back({rel, size});
            continue;
        }
        Bytes content = read_file(p);
        CorpusEntry e;
        e.source_id = "file-" + sha256_hex(rel).substr(0, 16);
        e.relative_path = rel;
        e.regime = Regime::File;
        e.length = content.size();
        e.content_hash = sha256_hex(content);
        result.manifest.entries.push_back(std::move(e));
    }
    std::sort(result.manifest.entries.begin(), result.manifest.entries.end(),
              [](const CorpusEntry& a, const CorpusEntry& b) { return a.source_id < b.source_id; });
    return result;
}

PlaintextStream load_corpus_entry(const fs::path& root, const CorpusEntry& entry) {
    const fs::path p = root / entry.relative_path;
    if (!fs::exists(p)) throw UpstreamMissing("corpus file missing: " + p.string());
    PlaintextStream s;
    s.source_id = entry.source_id;
    s.regime = Regime::File;
    s.bytes = read_file(p);
    s.content_hash = sha256_hex(s.bytes);
    if (s.content_hash != entry.content_hash) {
        throw HashMismatch("corpus file changed since ingestion: " + entry.relative_path);
    }
    return s;
}

Bytes gen_structured(const Seed& seed, std::size_t n) {
    const auto& model = markov();
    KeyedStream rng(seed, "structured");
    Bytes out;
    out.reserve(n + kRecordLen);

    // Start from a random position of the training text.
    const std::size_t start = rng.below(model.text.size());
    int a = model.text[start];
    int b = model.text[(start + 1) % model.text.size()];

    while (out.size() < n) {
        const std::size_t target = 12 + rng.below(49);  // visible characters in this record
        std::size_t len = 0;
        while (len < target) {
            int c = model.sample(a, b, rng);
            a = b;
            b = c;
            if (c == 63) break;
            out.push_back(static_cast<std::uint8_t>(char_of(c)));
            ++len;
        }
        for (; len < kRecordLen - 1; ++len) out.push_back(' ');
        out.push_back('\n');
    }
    out.resize(n);
    return out;
}

Bytes gen_random(const Seed& seed, std::size_t n) {
    KeyedStream rng(seed, "random");
    return rng.take(n);
}

MixedPlaintext gen_mixed_with_provenance(const Seed& seed, Ratio ratio, std::size_t n) {
    if (ratio.den == 0 || ratio.num > ratio.den) throw std::invalid_argument("ratio must lie in [0,1]");
    if (n == 0 || n % kMixGranule != 0) {
        throw std::invalid_argument("mixed stream length must be a positive multiple of 1024");
    }
    const std::size_t granules = n / kMixGranule;
    MixedPlaintext out;
    out.bytes.resize(n);
    out.structured.resize(granules);

    Bytes structured = ratio.num > 0 ? gen_structured(seed, n) : Bytes{};
    Bytes random = ratio.num < ratio.den ? gen_random(seed, n) : Bytes{};
    for (std::size_t g = 0; g < granules; ++g) {
        const bool is_structured = ((g + 1) * ratio.num) / ratio.den - (g * ratio.num) / ratio.den == 1;
        out.structured[g] = is_structured;
        const Bytes& src = is_structured ? structured : random;
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(g * kMixGranule), kMixGranule,
                    out.bytes.begin() + static_cast<std::ptrdiff_t>(g * kMixGranule));
    }
    return out;
}

Bytes gen_mixed(const Seed& seed, Ratio ratio, std::size_t n) {
    return gen_mixed_with_provenance(seed, ratio, n).bytes;
}

PlaintextStream synth_plaintext(const Seed& master_seed, std::string_view source_id, Regime regime,
                                std::size_t n) {
    PlaintextStream s;
    s.source_id = std::string(source_id);
    s.regime = regime;
    const Seed seed = derive_seed(master_seed, "plaintext|" + std::string(source_id));
    s.bytes = gen_mixed(seed, regime_ratio(regime), n);
    s.content_hash = sha256_hex(s.bytes);
    return s;
}

}  // namespace cipherprint
