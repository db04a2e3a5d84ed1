#pragma once
// NIST SP 800-22 tests on bit sequences of arbitrary length.
//
// The panel calls these with the unit-block sizes; unit tests call them with the
// short sequences of the published worked examples.

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "cipherprint/common.hpp"

namespace cipherprint::nist {

// One bit per element (0 or 1).
using Bits = std::vector<std::uint8_t>;
using BitView = std::span<const std::uint8_t>;

Bits bits_from_string(std::string_view text);  // '0'/'1' characters, others ignored
Bits bits_from_bytes(ByteView bytes);          // most significant bit first

struct FrequencyResult {
    double s_n;   // sum of +-1
    double z;     // s_n / sqrt(n)
    double p_value;
};
FrequencyResult frequency(BitView bits);

struct ChiSquareResult {
    double chi2;
    double p_value;
};
ChiSquareResult block_frequency(BitView bits, std::size_t block_len);

struct RunsResult {
    double v_obs;
    double z;  // signed standardized run count, 0 when all bits are equal
    double p_value;
    bool prerequisite_ok;
};
RunsResult runs(BitView bits);

struct LongestRunResult {
    std::vector<int> nu;
    double chi2;
    double p_value;
};
// block_len must be 8, 128 or 10000 (the tabulated parameter sets).
LongestRunResult longest_run(BitView bits, std::size_t block_len);

// Rank of a 32x32 binary matrix, rows packed most significant bit first.
int binary_rank32(std::array<std::uint32_t, 32> rows);

struct RankResult {
    std::array<int, 3> counts;  // full rank, rank 31, rank <= 30
    double chi2;
    double p_value;
};
// Matrices are read from bit offsets 0, stride, 2*stride, ... (stride 1024 gives the
// disjoint layout of the standard test).
RankResult rank(BitView bits, std::size_t stride = 1024);
std::array<double, 3> rank_probabilities();

struct DftResult {
    double n1;
    double d;
    double p_value;
};
DftResult dft(BitView bits);
DftResult dft_from_count(double n1, std::size_t n);

struct TemplateResult {
    std::vector<int> counts;  // per-block hits (non-overlapping) or category counts (overlapping)
    double chi2;
    double p_value;
};
TemplateResult non_overlapping_template(BitView bits, BitView tmpl, std::size_t num_blocks);
TemplateResult overlapping_template(BitView bits, BitView tmpl, std::size_t block_len,
                                    int degrees = 5);
std::vector<double> overlapping_probabilities(std::size_t m, std::size_t block_len, int degrees);
// A template is aperiodic when no proper prefix equals the suffix of the same length.
bool is_aperiodic(BitView tmpl);

struct UniversalResult {
    double fn;
    double p_value;
};
UniversalResult universal(BitView bits, int L, std::size_t Q);

int berlekamp_massey(BitView bits);

struct LinearComplexityResult {
    std::array<int, 7> nu;
    double chi2;
    double p_value;
};
LinearComplexityResult linear_complexity(BitView bits, std::size_t block_len);

struct SerialResult {
    double psi_m, psi_m1, psi_m2;
    double del1, del2;
    double p1, p2;
};
SerialResult serial(BitView bits, int m);

struct ApEnResult {
    double apen;
    double chi2;
    double p_value;
};
ApEnResult approximate_entropy(BitView bits, int m);

struct CusumResult {
    double z;  // max |partial sum|
    double p_value;
};
CusumResult cumulative_sums(BitView bits, bool forward);

}  // namespace cipherprint::nist
