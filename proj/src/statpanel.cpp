#include "cipherprint/statpanel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "cipherprint/nist.hpp"

namespace cipherprint {

namespace {

constexpr std::array<std::string_view, 8> kTemplates = {
    "000000001", "000000011", "000000101", "000001011",
    "011111111", "100000000", "110000000", "111111110",
};

constexpr std::size_t kRankStride = 256;
constexpr std::uint8_t kGapMarkBelow = 16;

ColumnSpec col(std::string name, Family fam, nlohmann::json params, NullKind kind, double a = 0.0,
               double b = 1.0, std::string degenerate = "not applicable") {
    return {std::move(name), fam, std::move(params), kind, a, b, std::move(degenerate)};
}

PanelManifest build_panel() {
    using F = Family;
    using N = NullKind;
    PanelManifest p;
    p.version = "panel41-v1";
    p.unit_block_len = kUnitBlockBytes;
    auto& c = p.columns;
    const double byte_mean_sd = std::sqrt((256.0 * 256.0 - 1.0) / 12.0 / 1024.0);

    c.push_back(col("byte_mean", F::Basic, {}, N::Normal, 127.5, byte_mean_sd));
    c.push_back(col("byte_variance", F::Basic, {{"estimator", "population"}}, N::EmpiricalQuantile));
    c.push_back(col("byte_entropy", F::Basic, {{"unit", "bits/byte"}}, N::EmpiricalQuantile));
    c.push_back(col("bit_ones_fraction", F::Basic, {}, N::Normal, 0.5, 0.5 / std::sqrt(8192.0)));
    c.push_back(col("byte_autocorr_lag1", F::Basic, {{"lag", 1}}, N::EmpiricalQuantile, 0, 1,
                    "0 when byte variance is 0"));
    c.push_back(col("block16_nn_hamming", F::Basic, {{"block_bytes", 16}, {"aligned", true}},
                    N::EmpiricalQuantile));

    c.push_back(col("chi2_byte", F::Classical, {{"cells", 256}}, N::EmpiricalQuantile));
    c.push_back(col("chi2_nibble", F::Classical, {{"cells", 16}}, N::ChiSquare, 15));
    c.push_back(col("ww_bit_runs", F::Classical, {{"statistic", "z"}}, N::Normal, 0, 1,
                    "0 when all bits are equal"));
    c.push_back(col("byte_runs_median", F::Classical, {{"threshold", 127.5}, {"statistic", "z"}},
                    N::EmpiricalQuantile, 0, 1, "0 when all bytes fall on one side"));
    c.push_back(col("mean_longest_run_128", F::Classical, {{"block_bits", 128}}, N::EmpiricalQuantile));
    c.push_back(col("serial_2bit_chi2", F::Classical, {{"pairs", "non-overlapping"}}, N::ChiSquare, 3));
    c.push_back(col("gap_test_chi2", F::Classical,
                    {{"mark", "byte < 16"}, {"categories", "0-3,4-7,8-12,13-19,20-30,31+"}},
                    N::EmpiricalQuantile, 0, 1, "5 when fewer than two marked bytes"));
    c.push_back(col("coupon_collector_mean", F::Classical, {{"alphabet", "nibbles"}},
                    N::EmpiricalQuantile, 0, 1, "censored length when no segment completes"));

    c.push_back(col("nist_monobit", F::NIST, {{"statistic", "S_n/sqrt(n)"}}, N::Normal, 0, 1));
    c.push_back(col("nist_block_frequency", F::NIST, {{"M", 128}}, N::ChiSquare, 64));
    c.push_back(col("nist_runs", F::NIST, {{"statistic", "signed z"}}, N::EmpiricalQuantile, 0, 1,
                    "0 when all bits are equal"));
    c.push_back(col("nist_longest_run", F::NIST, {{"M", 128}, {"K", 5}}, N::EmpiricalQuantile));
    c.push_back(col("nist_rank", F::NIST, {{"matrix", "32x32"}, {"stride_bits", kRankStride}},
                    N::EmpiricalQuantile));
    c.push_back(col("nist_dft", F::NIST, {{"statistic", "d"}}, N::EmpiricalQuantile));
    for (auto t : kTemplates) {
        c.push_back(col("nist_nonoverlap_" + std::string(t), F::NIST,
                        {{"template", t}, {"N", 8}, {"M", 1024}}, N::EmpiricalQuantile));
    }
    c.push_back(col("nist_overlapping", F::NIST, {{"template", "111111111"}, {"M", 1032}, {"K", 5}},
                    N::EmpiricalQuantile));
    c.push_back(col("nist_universal", F::NIST, {{"L", 6}, {"Q", 640}}, N::EmpiricalQuantile));
    c.push_back(col("nist_linear_complexity", F::NIST, {{"M", 500}, {"K", 6}}, N::EmpiricalQuantile));
    c.push_back(col("nist_serial_del1", F::NIST, {{"m", 3}}, N::ChiSquare, 4));
    c.push_back(col("nist_serial_del2", F::NIST, {{"m", 3}}, N::ChiSquare, 2));
    c.push_back(col("nist_apen", F::NIST, {{"m", 2}, {"statistic", "chi2"}}, N::ChiSquare, 4));
    c.push_back(col("nist_cusum_forward", F::NIST, {{"statistic", "max |S_k|"}}, N::EmpiricalQuantile));
    c.push_back(col("nist_cusum_backward", F::NIST, {{"statistic", "max |S_k|"}}, N::EmpiricalQuantile));

    c.push_back(col("birthday_spacings", F::Advanced,
                    {{"days", 4096}, {"birthdays", 64}, {"samples", 10}}, N::EmpiricalQuantile));
    for (int lag : {1, 2, 4, 8}) {
        c.push_back(col("serial_corr_lag" + std::to_string(lag), F::Advanced, {{"lag", lag}}, N::Normal, 0, 1));
    }
    if (c.size() != kNumColumns) throw std::logic_error("panel must have 41 columns");
    return p;
}

double byte_entropy(const std::array<int, 256>& counts, double n) {
    double h = 0.0;
    for (int c : counts) {
        if (c > 0) {
            const double p = c / n;
            h -= p * std::log2(p);
        }
    }
    return h;
}

}  // namespace

std::string_view family_name(Family f) {
    switch (f) {
        case Family::Basic: return "Basic";
        case Family::Classical: return "Classical";
        case Family::NIST: return "NIST";
        case Family::Advanced: return "Advanced";
    }
    return "?";
}

std::string_view null_kind_name(NullKind k) {
    switch (k) {
        case NullKind::Normal: return "Normal";
        case NullKind::ChiSquare: return "ChiSquare";
        case NullKind::EmpiricalQuantile: return "EmpiricalQuantile";
    }
    return "?";
}

std::vector<std::string> PanelManifest::column_names() const {
    std::vector<std::string> out;
    for (const auto& c : columns) out.push_back(c.name);
    return out;
}

std::size_t PanelManifest::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) return i;
    }
    throw ConfigError("unknown panel column: " + std::string(name));
}

nlohmann::json PanelManifest::to_json() const {
    nlohmann::json j;
    j["version"] = version;
    j["unit_block_len"] = unit_block_len;
    auto cols = nlohmann::json::array();
    for (const auto& c : columns) {
        nlohmann::json nj = {{"kind", null_kind_name(c.null_kind)}};
        if (c.null_kind == NullKind::Normal) {
            nj["mean"] = c.null_a;
            nj["sd"] = c.null_b;
        } else if (c.null_kind == NullKind::ChiSquare) {
            nj["df"] = c.null_a;
        }
        cols.push_back({{"name", c.name},
                        {"family", family_name(c.family)},
                        {"params", c.params},
                        {"null_cdf", nj},
                        {"degenerate", c.degenerate_value}});
    }
    j["columns"] = std::move(cols);
    return j;
}

const PanelManifest& panel_definition() {
    static const PanelManifest panel = build_panel();
    return panel;
}

double block16_nn_hamming(ByteView block) {
    const std::size_t nb = block.size() / 16;
    if (nb < 2) throw std::invalid_argument("block16_nn_hamming needs at least two 16-byte blocks");
    std::vector<std::array<std::uint64_t, 2>> words(nb);
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t w = 0; w < 2; ++w) {
            std::uint64_t v = 0;
            for (std::size_t b = 0; b < 8; ++b) v = (v << 8) | block[i * 16 + w * 8 + b];
            words[i][w] = v;
        }
    }
    std::vector<int> nearest(nb, 129);
    for (std::size_t i = 0; i < nb; ++i) {
        for (std::size_t j = i + 1; j < nb; ++j) {
            const int d = std::popcount(words[i][0] ^ words[j][0]) + std::popcount(words[i][1] ^ words[j][1]);
            nearest[i] = std::min(nearest[i], d);
            nearest[j] = std::min(nearest[j], d);
        }
    }
    return std::accumulate(nearest.begin(), nearest.end(), 0.0) / static_cast<double>(nb);
}

double wald_wolfowitz_z(const std::vector<std::uint8_t>& binary) {
    const double n = static_cast<double>(binary.size());
    const double n1 = static_cast<double>(std::count(binary.begin(), binary.end(), 1));
    const double n0 = n - n1;
    double runs = binary.empty() ? 0.0 : 1.0;
    for (std::size_t i = 1; i < binary.size(); ++i) runs += binary[i] != binary[i - 1] ? 1.0 : 0.0;
    const double mu = 2.0 * n1 * n0 / n + 1.0;
    const double var = (mu - 1.0) * (mu - 2.0) / (n - 1.0);
    if (!(var > 0.0)) return 0.0;
    return (runs - mu) / std::sqrt(var);
}

double gap_test_chi2(ByteView block, std::uint8_t below) {
    const double p = below / 256.0;
    // Category upper bounds (inclusive); the last category is open.
    static constexpr std::array<int, 5> upper = {3, 7, 12, 19, 30};
    std::array<double, 6> observed{};
    long last = -1;
    double gaps = 0.0;
    for (std::size_t i = 0; i < block.size(); ++i) {
        if (block[i] >= below) continue;
        if (last >= 0) {
            const long g = static_cast<long>(i) - last - 1;
            std::size_t cat = 5;
            for (std::size_t k = 0; k < upper.size(); ++k) {
                if (g <= upper[k]) {
                    cat = k;
                    break;
                }
            }
            observed[cat] += 1.0;
            gaps += 1.0;
        }
        last = static_cast<long>(i);
    }
    if (gaps == 0.0) return 5.0;
    double chi2 = 0.0;
    int lo = 0;
    for (std::size_t k = 0; k < 6; ++k) {
        // P(lo <= gap <= hi) for a geometric gap with success probability p.
        const double tail_lo = std::pow(1.0 - p, lo);
        const double tail_hi = k < upper.size() ? std::pow(1.0 - p, upper[k] + 1) : 0.0;
        const double e = gaps * (tail_lo - tail_hi);
        chi2 += (observed[k] - e) * (observed[k] - e) / e;
        if (k < upper.size()) lo = upper[k] + 1;
    }
    return chi2;
}

double coupon_collector_mean(ByteView block) {
    std::uint32_t seen = 0;
    std::size_t len = 0;
    std::size_t segments = 0;
    std::size_t total = 0;
    for (auto byte : block) {
        for (int half : {byte >> 4, byte & 0xf}) {
            seen |= 1u << half;
            ++len;
            if (seen == 0xffffu) {
                ++segments;
                total += len;
                len = 0;
                seen = 0;
            }
        }
    }
    if (segments == 0) return static_cast<double>(len);
    return static_cast<double>(total) / static_cast<double>(segments);
}

double birthday_spacings_collisions(ByteView block) {
    // 64 birthdays in 4096 days gives about 16 expected spacing collisions per sample.
    constexpr int kDayBits = 12;
    constexpr std::size_t kBirthdays = 64;
    constexpr std::size_t kSamples = 10;
    const auto bits = nist::bits_from_bytes(block);
    if (bits.size() < kSamples * kBirthdays * kDayBits) {
        throw std::invalid_argument("birthday spacings need 7680 bits");
    }
    double collisions = 0.0;
    std::array<int, kBirthdays> days{};
    std::array<int, kBirthdays> spacing{};
    for (std::size_t s = 0; s < kSamples; ++s) {
        for (std::size_t i = 0; i < kBirthdays; ++i) {
            int v = 0;
            for (int b = 0; b < kDayBits; ++b) v = (v << 1) | bits[(s * kBirthdays + i) * kDayBits + static_cast<std::size_t>(b)];
            days[i] = v;
        }
        std::sort(days.begin(), days.end());
        spacing[0] = days[0];
        for (std::size_t i = 1; i < kBirthdays; ++i) spacing[i] = days[i] - days[i - 1];
        std::sort(spacing.begin(), spacing.end());
        const auto distinct = std::unique(spacing.begin(), spacing.end()) - spacing.begin();
        collisions += static_cast<double>(static_cast<std::ptrdiff_t>(kBirthdays) - distinct);
    }
    return collisions;
}

double serial_correlation_z(ByteView block, std::size_t lag) {
    if (lag == 0 || block.size() <= lag) throw std::invalid_argument("serial correlation lag out of range");
    double sum = 0.0;
    for (std::size_t i = 0; i + lag < block.size(); ++i) {
        const double a = (block[i] + 0.5) / 256.0 - 0.5;
        const double b = (block[i + lag] + 0.5) / 256.0 - 0.5;
        sum += a * b;
    }
    return 12.0 * sum / std::sqrt(static_cast<double>(block.size() - lag));
}

RawValues score_block(ByteView block) {
    if (block.size() != kUnitBlockBytes) {
        throw std::invalid_argument("score_block expects " + std::to_string(kUnitBlockBytes) + " bytes, got " +
                                    std::to_string(block.size()));
    }
    RawValues v{};
    std::size_t k = 0;
    const double nbytes = static_cast<double>(block.size());
    const auto bits = nist::bits_from_bytes(block);

    // Basic
    std::array<int, 256> counts{};
    double sum = 0.0;
    for (auto b : block) {
        counts[b] += 1;
        sum += b;
    }
    const double mean = sum / nbytes;
    double var = 0.0;
    double cov = 0.0;
    for (std::size_t i = 0; i < block.size(); ++i) {
        const double d = block[i] - mean;
        var += d * d;
        if (i + 1 < block.size()) cov += d * (block[i + 1] - mean);
    }
    const double ones = static_cast<double>(std::accumulate(bits.begin(), bits.end(), 0));
    v[k++] = mean;
    v[k++] = var / nbytes;
    v[k++] = byte_entropy(counts, nbytes);
    v[k++] = ones / static_cast<double>(bits.size());
    v[k++] = var > 0.0 ? cov / var : 0.0;
    v[k++] = block16_nn_hamming(block);

    // Classical
    {
        const double e = nbytes / 256.0;
        double chi = 0.0;
        for (int c : counts) chi += (c - e) * (c - e) / e;
        v[k++] = chi;
    }
    {
        std::array<int, 16> nib{};
        for (auto b : block) {
            nib[b >> 4] += 1;
            nib[b & 0xf] += 1;
        }
        const double e = 2.0 * nbytes / 16.0;
        double chi = 0.0;
        for (int c : nib) chi += (c - e) * (c - e) / e;
        v[k++] = chi;
    }
    v[k++] = wald_wolfowitz_z(bits);
    {
        std::vector<std::uint8_t> above(block.size());
        for (std::size_t i = 0; i < block.size(); ++i) above[i] = block[i] > 127 ? 1 : 0;
        v[k++] = wald_wolfowitz_z(above);
    }
    {
        double total = 0.0;
        for (std::size_t blk = 0; blk < bits.size() / 128; ++blk) {
            int run = 0;
            int best = 0;
            for (std::size_t j = 0; j < 128; ++j) {
                run = bits[blk * 128 + j] ? run + 1 : 0;
                best = std::max(best, run);
            }
            total += best;
        }
        v[k++] = total / static_cast<double>(bits.size() / 128);
    }
    {
        std::array<int, 4> pairs{};
        for (std::size_t i = 0; i + 1 < bits.size(); i += 2) pairs[static_cast<std::size_t>(bits[i] * 2 + bits[i + 1])] += 1;
        const double e = static_cast<double>(bits.size() / 2) / 4.0;
        double chi = 0.0;
        for (int c : pairs) chi += (c - e) * (c - e) / e;
        v[k++] = chi;
    }
    v[k++] = gap_test_chi2(block, kGapMarkBelow);
    v[k++] = coupon_collector_mean(block);

    // NIST subset
    v[k++] = nist::frequency(bits).z;
    v[k++] = nist::block_frequency(bits, 128).chi2;
    v[k++] = nist::runs(bits).z;
    v[k++] = nist::longest_run(bits, 128).chi2;
    v[k++] = nist::rank(bits, kRankStride).chi2;
    v[k++] = nist::dft(bits).d;
    for (auto t : kTemplates) {
        const auto tmpl = nist::bits_from_string(t);
        v[k++] = nist::non_overlapping_template(bits, tmpl, 8).chi2;
    }
    {
        const auto tmpl = nist::bits_from_string("111111111");
        v[k++] = nist::overlapping_template(bits, tmpl, 1032, 5).chi2;
    }
    v[k++] = nist::universal(bits, 6, 640).fn;
    v[k++] = nist::linear_complexity(bits, 500).chi2;
    {
        const auto s = nist::serial(bits, 3);
        v[k++] = s.del1;
        v[k++] = s.del2;
    }
    v[k++] = nist::approximate_entropy(bits, 2).chi2;
    v[k++] = nist::cumulative_sums(bits, true).z;
    v[k++] = nist::cumulative_sums(bits, false).z;

    // Advanced
    v[k++] = birthday_spacings_collisions(block);
    for (std::size_t lag : {1u, 2u, 4u, 8u}) v[k++] = serial_correlation_z(block, lag);

    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw std::logic_error("non-finite statistic in column " + panel_definition().columns[i].name);
        }
    }
    return v;
}

StreamScores score_stream(ByteView stream, std::string_view source_id, int jobs) {
    if (stream.size() < kUnitBlockBytes) {
        throw std::invalid_argument("stream " + std::string(source_id) + " is shorter than one unit block");
    }
    StreamScores out;
    const std::size_t nblocks = stream.size() / kUnitBlockBytes;
    out.dropped_tail_bytes = stream.size() % kUnitBlockBytes;
    out.rows.resize(nblocks);
    parallel_for(nblocks, jobs, [&](std::size_t i) {
        auto& row = out.rows[i];
        row.values = score_block(stream.subspan(i * kUnitBlockBytes, kUnitBlockBytes));
        row.source_id = std::string(source_id);
        row.block_index = i;
    });
    return out;
}

}  // namespace cipherprint
