#include "cipherprint/nist.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "cipherprint/special.hpp"

namespace cipherprint::nist {

namespace {

void require(bool cond, const char* what) {
    if (!cond) throw std::invalid_argument(what);
}

// Value of the m-bit window starting at every position (m <= 32), no wraparound.
std::vector<std::uint32_t> window_values(BitView bits, std::size_t m) {
    std::vector<std::uint32_t> out;
    if (bits.size() < m) return out;
    out.resize(bits.size() - m + 1);
    const std::uint32_t mask = m == 32 ? ~0u : ((1u << m) - 1u);
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        v = ((v << 1) | bits[i]) & mask;
        if (i + 1 >= m) out[i + 1 - m] = v;
    }
    return out;
}

std::uint32_t pack(BitView bits) {
    std::uint32_t v = 0;
    for (auto b : bits) v = (v << 1) | b;
    return v;
}

// Overlapping m-bit pattern counts with the sequence extended cyclically by m-1 bits.
std::vector<double> cyclic_counts(BitView bits, int m) {
    const std::size_t n = bits.size();
    std::vector<double> counts(std::size_t{1} << m, 0.0);
    const std::uint32_t mask = (1u << m) - 1u;
    std::uint32_t v = 0;
    for (int i = 0; i < m - 1; ++i) v = (v << 1) | bits[static_cast<std::size_t>(i) % n];
    for (std::size_t i = 0; i < n; ++i) {
        v = ((v << 1) | bits[(i + static_cast<std::size_t>(m) - 1) % n]) & mask;
        counts[v] += 1.0;
    }
    return counts;
}

double psi_sq(BitView bits, int m) {
    if (m <= 0) return 0.0;
    const double n = static_cast<double>(bits.size());
    double sum = 0.0;
    for (double c : cyclic_counts(bits, m)) sum += c * c;
    return std::ldexp(sum, m) / n - n;
}

double apen_phi(BitView bits, int m) {
    if (m <= 0) return 0.0;
    const double n = static_cast<double>(bits.size());
    double sum = 0.0;
    for (double c : cyclic_counts(bits, m)) {
        if (c > 0.0) sum += (c / n) * std::log(c / n);
    }
    return sum;
}

struct LongestRunParams {
    std::size_t block_len;
    int k;
    int v_low;  // first category collects runs <= v_low
    std::vector<double> pi;
};

const LongestRunParams& longest_params(std::size_t block_len) {
    static const std::array<LongestRunParams, 3> table = {{
        {8, 3, 1, {0.2148, 0.3672, 0.2305, 0.1875}},
        {128, 5, 4, {0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124}},
        {10000, 6, 10, {0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727}},
    }};
    for (const auto& p : table) {
        if (p.block_len == block_len) return p;
    }
    throw std::invalid_argument("longest_run block length must be 8, 128 or 10000");
}

constexpr std::array<double, 17> kUniversalExpected = {
    0.0,       0.7326495, 1.5374383, 2.4016068, 3.3112247, 4.2534266, 5.2177052, 6.1962507, 7.1836656,
    8.1764248, 9.1723243, 10.170032, 11.168765, 12.168070, 13.167693, 14.167488, 15.167379,
};
constexpr std::array<double, 17> kUniversalVariance = {
    0.0,   0.690, 1.338, 1.901, 2.358, 2.705, 2.954, 3.125, 3.238,
    3.311, 3.356, 3.384, 3.401, 3.410, 3.416, 3.419, 3.421,
};

// The first probability is 0.01047 as in the reference implementation; the published
// worked examples were produced with it (the exact value is 1/96).
constexpr std::array<double, 7> kLinearComplexityPi = {0.01047, 0.03125, 0.125, 0.5,
                                                       0.25,    0.0625,  0.020833};

}  // namespace

Bits bits_from_string(std::string_view text) {
    Bits out;
    out.reserve(text.size());
    for (char c : text) {
        if (c == '0' || c == '1') out.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return out;
}

Bits bits_from_bytes(ByteView bytes) {
    Bits out(bytes.size() * 8);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        for (int b = 0; b < 8; ++b) out[i * 8 + static_cast<std::size_t>(b)] = (bytes[i] >> (7 - b)) & 1u;
    }
    return out;
}

FrequencyResult frequency(BitView bits) {
    require(!bits.empty(), "frequency: empty input");
    double s = 0.0;
    for (auto b : bits) s += b ? 1.0 : -1.0;
    const double z = s / std::sqrt(static_cast<double>(bits.size()));
    return {s, z, std::erfc(std::fabs(z) / std::sqrt(2.0))};
}

ChiSquareResult block_frequency(BitView bits, std::size_t block_len) {
    require(block_len > 0 && bits.size() >= block_len, "block_frequency: block longer than input");
    const std::size_t nblocks = bits.size() / block_len;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < nblocks; ++i) {
        const auto ones = std::accumulate(bits.begin() + static_cast<std::ptrdiff_t>(i * block_len),
                                          bits.begin() + static_cast<std::ptrdiff_t>((i + 1) * block_len), 0);
        const double pi = static_cast<double>(ones) / static_cast<double>(block_len) - 0.5;
        chi2 += pi * pi;
    }
    chi2 *= 4.0 * static_cast<double>(block_len);
    return {chi2, gamma_q(static_cast<double>(nblocks) / 2.0, chi2 / 2.0)};
}

RunsResult runs(BitView bits) {
    require(bits.size() >= 2, "runs: need at least two bits");
    const double n = static_cast<double>(bits.size());
    const double pi = static_cast<double>(std::accumulate(bits.begin(), bits.end(), 0)) / n;
    double v = 1.0;
    for (std::size_t k = 0; k + 1 < bits.size(); ++k) v += bits[k] != bits[k + 1] ? 1.0 : 0.0;

    RunsResult r{v, 0.0, 0.0, std::fabs(pi - 0.5) < 2.0 / std::sqrt(n)};
    const double q = pi * (1.0 - pi);
    if (q > 0.0) r.z = (v - 2.0 * n * q) / (2.0 * std::sqrt(n) * q);
    if (r.prerequisite_ok) {
        r.p_value = std::erfc(std::fabs(v - 2.0 * n * q) / (2.0 * std::sqrt(2.0 * n) * q));
    }
    return r;
}

LongestRunResult longest_run(BitView bits, std::size_t block_len) {
    const auto& p = longest_params(block_len);
    const std::size_t nblocks = bits.size() / block_len;
    require(nblocks > 0, "longest_run: input shorter than one block");
    LongestRunResult r;
    r.nu.assign(static_cast<std::size_t>(p.k) + 1, 0);
    for (std::size_t i = 0; i < nblocks; ++i) {
        int run = 0;
        int best = 0;
        for (std::size_t j = 0; j < block_len; ++j) {
            run = bits[i * block_len + j] ? run + 1 : 0;
            best = std::max(best, run);
        }
        const int cat = std::clamp(best - p.v_low, 0, p.k);
        r.nu[static_cast<std::size_t>(cat)] += 1;
    }
    const double nb = static_cast<double>(nblocks);
    r.chi2 = 0.0;
    for (std::size_t i = 0; i < r.nu.size(); ++i) {
        const double e = nb * p.pi[i];
        r.chi2 += (r.nu[i] - e) * (r.nu[i] - e) / e;
    }
    r.p_value = gamma_q(p.k / 2.0, r.chi2 / 2.0);
    return r;
}

int binary_rank32(std::array<std::uint32_t, 32> rows) {
    int rank = 0;
    for (int col = 31; col >= 0 && rank < 32; --col) {
        const std::uint32_t bit = 1u << col;
        int pivot = -1;
        for (int i = rank; i < 32; ++i) {
            if (rows[static_cast<std::size_t>(i)] & bit) {
                pivot = i;
                break;
            }
        }
        if (pivot < 0) continue;
        std::swap(rows[static_cast<std::size_t>(rank)], rows[static_cast<std::size_t>(pivot)]);
        for (int i = 0; i < 32; ++i) {
            if (i != rank && (rows[static_cast<std::size_t>(i)] & bit)) {
                rows[static_cast<std::size_t>(i)] ^= rows[static_cast<std::size_t>(rank)];
            }
        }
        ++rank;
    }
    return rank;
}

std::array<double, 3> rank_probabilities() {
    // P(rank = r) for a random 32x32 binary matrix.
    auto prob = [](int r) {
        double p = std::ldexp(1.0, r * (64 - r) - 1024);
        for (int i = 0; i < r; ++i) {
            p *= (1.0 - std::ldexp(1.0, i - 32)) * (1.0 - std::ldexp(1.0, i - 32)) / (1.0 - std::ldexp(1.0, i - r));
        }
        return p;
    };
    const double p32 = prob(32);
    const double p31 = prob(31);
    return {p32, p31, 1.0 - p32 - p31};
}

RankResult rank(BitView bits, std::size_t stride) {
    constexpr std::size_t kMatrixBits = 32 * 32;
    require(stride > 0 && bits.size() >= kMatrixBits, "rank: need at least one 32x32 matrix");
    const std::size_t nmat = (bits.size() - kMatrixBits) / stride + 1;
    RankResult r{{0, 0, 0}, 0.0, 0.0};
    for (std::size_t k = 0; k < nmat; ++k) {
        std::array<std::uint32_t, 32> rows{};
        for (std::size_t i = 0; i < 32; ++i) rows[i] = pack(bits.subspan(k * stride + i * 32, 32));
        const int rk = binary_rank32(rows);
        r.counts[rk == 32 ? 0 : (rk == 31 ? 1 : 2)] += 1;
    }
    const auto p = rank_probabilities();
    const double n = static_cast<double>(nmat);
    for (std::size_t i = 0; i < 3; ++i) {
        const double e = n * p[i];
        r.chi2 += (r.counts[i] - e) * (r.counts[i] - e) / e;
    }
    r.p_value = std::exp(-r.chi2 / 2.0);
    return r;
}

DftResult dft_from_count(double n1, std::size_t n) {
    const double nn = static_cast<double>(n);
    const double n0 = 0.95 * nn / 2.0;
    const double d = (n1 - n0) / std::sqrt(nn * 0.95 * 0.05 / 4.0);
    return {n1, d, std::erfc(std::fabs(d) / std::sqrt(2.0))};
}

DftResult dft(BitView bits) {
    require(bits.size() >= 2, "dft: need at least two bits");
    const std::size_t n = bits.size();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = bits[i] ? 1.0 : -1.0;
    thread_local Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spectrum;
    fft.fwd(spectrum, x);
    const double threshold = std::sqrt(std::log(1.0 / 0.05) * static_cast<double>(n));
    double n1 = 0.0;
    for (std::size_t k = 0; k < n / 2; ++k) n1 += std::abs(spectrum[k]) < threshold ? 1.0 : 0.0;
    return dft_from_count(n1, n);
}

bool is_aperiodic(BitView tmpl) {
    for (std::size_t k = 1; k < tmpl.size(); ++k) {
        if (std::equal(tmpl.begin(), tmpl.begin() + static_cast<std::ptrdiff_t>(k),
                       tmpl.end() - static_cast<std::ptrdiff_t>(k))) {
            return false;
        }
    }
    return true;
}

TemplateResult non_overlapping_template(BitView bits, BitView tmpl, std::size_t num_blocks) {
    const std::size_t m = tmpl.size();
    require(m >= 1 && m <= 32, "template length must be 1..32");
    require(num_blocks > 0 && bits.size() / num_blocks >= m, "non_overlapping_template: blocks too short");
    const std::size_t block_len = bits.size() / num_blocks;
    const std::uint32_t target = pack(tmpl);
    const auto win = window_values(bits, m);

    TemplateResult r;
    r.counts.assign(num_blocks, 0);
    for (std::size_t j = 0; j < num_blocks; ++j) {
        const std::size_t base = j * block_len;
        std::size_t i = 0;
        while (i + m <= block_len) {
            if (win[base + i] == target) {
                r.counts[j] += 1;
                i += m;
            } else {
                ++i;
            }
        }
    }
    const double mm = static_cast<double>(m);
    const double bl = static_cast<double>(block_len);
    const double mu = (bl - mm + 1.0) / std::ldexp(1.0, static_cast<int>(m));
    const double var = bl * (1.0 / std::ldexp(1.0, static_cast<int>(m)) -
                             (2.0 * mm - 1.0) / std::ldexp(1.0, 2 * static_cast<int>(m)));
    r.chi2 = 0.0;
    for (int w : r.counts) r.chi2 += (w - mu) * (w - mu) / var;
    r.p_value = gamma_q(static_cast<double>(num_blocks) / 2.0, r.chi2 / 2.0);
    return r;
}

std::vector<double> overlapping_probabilities(std::size_t m, std::size_t block_len, int degrees) {
    const double lambda = static_cast<double>(block_len - m + 1) / std::ldexp(1.0, static_cast<int>(m));
    const double eta = lambda / 2.0;
    std::vector<double> pi(static_cast<std::size_t>(degrees) + 1, 0.0);
    pi[0] = std::exp(-eta);
    double total = pi[0];
    for (int u = 1; u < degrees; ++u) {
        double sum = 0.0;
        for (int l = 1; l <= u; ++l) {
            // C(u-1, l-1) * eta^l / l!
            const double log_term = std::lgamma(u) - std::lgamma(l) - std::lgamma(u - l + 1) +
                                    l * std::log(eta) - std::lgamma(l + 1);
            sum += std::exp(log_term);
        }
        pi[static_cast<std::size_t>(u)] = std::exp(-eta) * std::ldexp(sum, -u);
        total += pi[static_cast<std::size_t>(u)];
    }
    pi[static_cast<std::size_t>(degrees)] = 1.0 - total;
    return pi;
}

TemplateResult overlapping_template(BitView bits, BitView tmpl, std::size_t block_len, int degrees) {
    const std::size_t m = tmpl.size();
    require(m >= 1 && m <= 32 && block_len >= m, "overlapping_template: bad template or block length");
    const std::size_t nblocks = bits.size() / block_len;
    require(nblocks > 0, "overlapping_template: input shorter than one block");
    const std::uint32_t target = pack(tmpl);
    const auto win = window_values(bits, m);

    TemplateResult r;
    r.counts.assign(static_cast<std::size_t>(degrees) + 1, 0);
    for (std::size_t j = 0; j < nblocks; ++j) {
        int hits = 0;
        for (std::size_t i = 0; i + m <= block_len; ++i) hits += win[j * block_len + i] == target ? 1 : 0;
        r.counts[static_cast<std::size_t>(std::min(hits, degrees))] += 1;
    }
    const auto pi = overlapping_probabilities(m, block_len, degrees);
    const double nb = static_cast<double>(nblocks);
    r.chi2 = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        const double e = nb * pi[i];
        r.chi2 += (r.counts[i] - e) * (r.counts[i] - e) / e;
    }
    r.p_value = gamma_q(degrees / 2.0, r.chi2 / 2.0);
    return r;
}

UniversalResult universal(BitView bits, int L, std::size_t Q) {
    require(L >= 1 && L <= 16, "universal: L must be 1..16");
    const std::size_t l = static_cast<std::size_t>(L);
    require(bits.size() / l > Q, "universal: sequence too short for Q");
    const std::size_t K = bits.size() / l - Q;
    std::vector<std::size_t> last(std::size_t{1} << L, 0);
    for (std::size_t i = 1; i <= Q; ++i) last[pack(bits.subspan((i - 1) * l, l))] = i;
    double sum = 0.0;
    for (std::size_t i = Q + 1; i <= Q + K; ++i) {
        const auto v = pack(bits.subspan((i - 1) * l, l));
        sum += std::log2(static_cast<double>(i - last[v]));
        last[v] = i;
    }
    const double fn = sum / static_cast<double>(K);
    const double kk = static_cast<double>(K);
    const double c = 0.7 - 0.8 / L + (4.0 + 32.0 / L) * std::pow(kk, -3.0 / L) / 15.0;
    const double sigma = c * std::sqrt(kUniversalVariance[l] / kk);
    return {fn, std::erfc(std::fabs(fn - kUniversalExpected[l]) / (std::sqrt(2.0) * sigma))};
}

int berlekamp_massey(BitView s) {
    const std::size_t n = s.size();
    std::vector<std::uint8_t> c(n + 1, 0), b(n + 1, 0), t;
    c[0] = b[0] = 1;
    int L = 0;
    std::ptrdiff_t m = -1;
    for (std::size_t N = 0; N < n; ++N) {
        std::uint8_t d = s[N];
        for (int i = 1; i <= L; ++i) d ^= c[static_cast<std::size_t>(i)] & s[N - static_cast<std::size_t>(i)];
        if (d == 0) continue;
        t = c;
        const auto shift = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(N) - m);
        for (std::size_t j = 0; j + shift <= n; ++j) c[j + shift] ^= b[j];
        if (L <= static_cast<int>(N) / 2) {
            L = static_cast<int>(N) + 1 - L;
            m = static_cast<std::ptrdiff_t>(N);
            b = t;
        }
    }
    return L;
}

LinearComplexityResult linear_complexity(BitView bits, std::size_t block_len) {
    const std::size_t nblocks = bits.size() / block_len;
    require(block_len > 0 && nblocks > 0, "linear_complexity: input shorter than one block");
    const double M = static_cast<double>(block_len);
    const double sign = block_len % 2 == 0 ? 1.0 : -1.0;
    const double mu = M / 2.0 + (9.0 - sign) / 36.0 - (M / 3.0 + 2.0 / 9.0) / std::pow(2.0, M);

    LinearComplexityResult r{};
    for (std::size_t i = 0; i < nblocks; ++i) {
        const int L = berlekamp_massey(bits.subspan(i * block_len, block_len));
        const double T = sign * (L - mu) + 2.0 / 9.0;
        int cat = 6;
        for (int k = 0; k < 6; ++k) {
            if (T <= -2.5 + k) {
                cat = k;
                break;
            }
        }
        r.nu[static_cast<std::size_t>(cat)] += 1;
    }
    const double nb = static_cast<double>(nblocks);
    for (std::size_t i = 0; i < 7; ++i) {
        const double e = nb * kLinearComplexityPi[i];
        r.chi2 += (r.nu[i] - e) * (r.nu[i] - e) / e;
    }
    r.p_value = gamma_q(3.0, r.chi2 / 2.0);
    return r;
}

SerialResult serial(BitView bits, int m) {
    require(m >= 2 && m <= 24 && !bits.empty(), "serial: m must be 2..24");
    SerialResult r{};
    r.psi_m = psi_sq(bits, m);
    r.psi_m1 = psi_sq(bits, m - 1);
    r.psi_m2 = psi_sq(bits, m - 2);
    r.del1 = r.psi_m - r.psi_m1;
    r.del2 = r.psi_m - 2.0 * r.psi_m1 + r.psi_m2;
    r.p1 = gamma_q(std::ldexp(1.0, m - 2), r.del1 / 2.0);
    r.p2 = gamma_q(std::ldexp(1.0, m - 3), r.del2 / 2.0);
    return r;
}

ApEnResult approximate_entropy(BitView bits, int m) {
    require(m >= 1 && m <= 23 && !bits.empty(), "approximate_entropy: m must be 1..23");
    const double n = static_cast<double>(bits.size());
    ApEnResult r{};
    r.apen = apen_phi(bits, m) - apen_phi(bits, m + 1);
    r.chi2 = 2.0 * n * (std::log(2.0) - r.apen);
    r.p_value = gamma_q(std::ldexp(1.0, m - 1), r.chi2 / 2.0);
    return r;
}

CusumResult cumulative_sums(BitView bits, bool forward) {
    require(!bits.empty(), "cumulative_sums: empty input");
    const std::size_t n = bits.size();
    long s = 0;
    long z = 0;
    for (std::size_t i = 0; i < n; ++i) {
        s += bits[forward ? i : n - 1 - i] ? 1 : -1;
        z = std::max(z, std::labs(s));
    }
    const double nn = static_cast<double>(n);
    const double zz = static_cast<double>(z);
    const double sq = std::sqrt(nn);
    double sum1 = 0.0;
    for (auto k = static_cast<long>((-nn / zz + 1.0) / 4.0); k <= static_cast<long>((nn / zz - 1.0) / 4.0); ++k) {
        sum1 += normal_cdf((4.0 * k + 1.0) * zz / sq) - normal_cdf((4.0 * k - 1.0) * zz / sq);
    }
    double sum2 = 0.0;
    for (auto k = static_cast<long>((-nn / zz - 3.0) / 4.0); k <= static_cast<long>((nn / zz - 1.0) / 4.0); ++k) {
        sum2 += normal_cdf((4.0 * k + 3.0) * zz / sq) - normal_cdf((4.0 * k + 1.0) * zz / sq);
    }
    return {zz, 1.0 - sum1 + sum2};
}

}  // namespace cipherprint::nist
