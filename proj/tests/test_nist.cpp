#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "cipherprint/nist.hpp"
#include "test_support.hpp"

using namespace cipherprint::nist;

namespace {

const std::string kPi100 =
    "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000";
const std::string kLongest128 =
    "11001100000101010110110001001100111000000000001001001101010100010001001111010110100000001101011111001100"
    "111001101101100010110010";

constexpr double kTol = 1e-4;

}  // namespace

TEST(Nist, BitsFromBytesIsMsbFirst) {
    const std::uint8_t b[] = {0xa0, 0x01};
    EXPECT_EQ(bits_from_bytes(b), bits_from_string("1010000000000001"));
}

TEST(Nist, FrequencyWorkedExamples) {
    EXPECT_NEAR(frequency(bits_from_string("1011010101")).p_value, 0.527089, kTol);
    EXPECT_NEAR(frequency(bits_from_string(kPi100)).p_value, 0.109599, kTol);
    EXPECT_NEAR(frequency(cptest::e_bits()).p_value, 0.953749, kTol);
}

TEST(Nist, BlockFrequencyWorkedExamples) {
    const auto r = block_frequency(bits_from_string("0110011010"), 3);
    EXPECT_NEAR(r.chi2, 1.0, 1e-12);
    EXPECT_NEAR(r.p_value, 0.801252, kTol);
    EXPECT_NEAR(block_frequency(bits_from_string(kPi100), 10).p_value, 0.706438, kTol);
    EXPECT_NEAR(block_frequency(cptest::e_bits(), 128).p_value, 0.211072, kTol);
}

TEST(Nist, RunsWorkedExamples) {
    const auto r = runs(bits_from_string("1001101011"));
    EXPECT_EQ(r.v_obs, 7.0);
    EXPECT_NEAR(r.p_value, 0.147232, kTol);
    EXPECT_NEAR(runs(bits_from_string(kPi100)).p_value, 0.500798, kTol);
    EXPECT_NEAR(runs(cptest::e_bits()).p_value, 0.561917, kTol);
}

TEST(Nist, LongestRunWorkedExamples) {
    ASSERT_EQ(kLongest128.size(), 128u);
    const auto r = longest_run(bits_from_string(kLongest128), 8);
    EXPECT_EQ(r.nu, (std::vector<int>{4, 9, 3, 0}));
    EXPECT_NEAR(r.chi2, 4.882605, kTol);
    EXPECT_NEAR(r.p_value, 0.180598, kTol);
    EXPECT_NEAR(longest_run(cptest::e_bits(), 10000).p_value, 0.718945, kTol);
}

TEST(Nist, RankProbabilities) {
    const auto p = rank_probabilities();
    EXPECT_NEAR(p[0], 0.2887880951538411, 1e-15);
    EXPECT_NEAR(p[1], 0.5775761901732046, 1e-15);
}

TEST(Nist, BinaryRankSmallCases) {
    std::array<std::uint32_t, 32> identity{};
    for (int i = 0; i < 32; ++i) identity[static_cast<std::size_t>(i)] = 1u << i;
    EXPECT_EQ(binary_rank32(identity), 32);
    std::array<std::uint32_t, 32> zero{};
    EXPECT_EQ(binary_rank32(zero), 0);
    auto dup = identity;
    dup[5] = dup[6];
    EXPECT_EQ(binary_rank32(dup), 31);
}

TEST(Nist, RankOnE) {
    const auto& e = cptest::e_bits();
    const Bits first(e.begin(), e.begin() + 100000);
    const auto r = rank(first);
    EXPECT_EQ(r.counts, (std::array<int, 3>{23, 60, 14}));
    EXPECT_NEAR(r.chi2, 1.2619656, kTol);
    EXPECT_NEAR(r.p_value, 0.532069, kTol);
    EXPECT_NEAR(rank(e).p_value, 0.306156, kTol);
}

TEST(Nist, DftCountToPValueMapping) {
    // The published small example states N1 = 4 for n = 10.
    const auto r = dft_from_count(4.0, 10);
    EXPECT_NEAR(r.d, -2.176429, kTol);
    EXPECT_NEAR(r.p_value, 0.029523, kTol);
}

TEST(Nist, DftPeakCountMatchesNaiveTransform) {
    const auto bits = bits_from_string("1001010011");
    const double n = static_cast<double>(bits.size());
    const double threshold = std::sqrt(std::log(20.0) * n);
    double n1 = 0.0;
    for (std::size_t k = 0; k < bits.size() / 2; ++k) {
        std::complex<double> s = 0.0;
        for (std::size_t j = 0; j < bits.size(); ++j) {
            const double x = bits[j] ? 1.0 : -1.0;
            s += x * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j * k) / n);
        }
        n1 += std::abs(s) < threshold ? 1.0 : 0.0;
    }
    EXPECT_EQ(dft(bits).n1, n1);
    const auto r = dft(cptest::e_bits());
    EXPECT_EQ(r.n1, 475021.0);
    EXPECT_NEAR(r.p_value, 0.847187, kTol);
}

TEST(Nist, NonOverlappingTemplateWorkedExamples) {
    const auto r = non_overlapping_template(bits_from_string("10100100101110010110"), bits_from_string("001"), 2);
    EXPECT_EQ(r.counts, (std::vector<int>{2, 1}));
    EXPECT_NEAR(r.chi2, 2.133333, kTol);
    EXPECT_NEAR(r.p_value, 0.344154, kTol);
    EXPECT_NEAR(non_overlapping_template(cptest::e_bits(), bits_from_string("000000001"), 8).p_value, 0.078790,
                kTol);
}

TEST(Nist, OverlappingTemplateOnE) {
    const auto r = overlapping_template(cptest::e_bits(), bits_from_string("111111111"), 1032, 5);
    EXPECT_EQ(r.counts, (std::vector<int>{329, 164, 150, 111, 78, 136}));
    EXPECT_NEAR(r.p_value, 0.110434, kTol);
}

TEST(Nist, TemplatesAreAperiodic) {
    EXPECT_TRUE(is_aperiodic(bits_from_string("000000001")));
    EXPECT_TRUE(is_aperiodic(bits_from_string("100000000")));
    EXPECT_FALSE(is_aperiodic(bits_from_string("101")));
    EXPECT_FALSE(is_aperiodic(bits_from_string("111111111")));
}

TEST(Nist, UniversalWorkedExamples) {
    EXPECT_NEAR(universal(bits_from_string("01011010011101010111"), 2, 4).fn, 1.1949875, 1e-6);
    EXPECT_NEAR(universal(cptest::e_bits(), 7, 1280).p_value, 0.282568, kTol);
}

TEST(Nist, BerlekampMassey) {
    EXPECT_EQ(berlekamp_massey(bits_from_string("1101011110001")), 4);
    EXPECT_EQ(berlekamp_massey(bits_from_string("0000000000")), 0);
    EXPECT_EQ(berlekamp_massey(bits_from_string("0000000001")), 10);
}

TEST(Nist, LinearComplexityOnE) {
    const auto r = linear_complexity(cptest::e_bits(), 1000);
    EXPECT_EQ(r.nu, (std::array<int, 7>{11, 31, 116, 501, 258, 57, 26}));
    EXPECT_NEAR(r.chi2, 2.700348, kTol);
    EXPECT_NEAR(r.p_value, 0.845406, kTol);
    EXPECT_NEAR(linear_complexity(cptest::e_bits(), 500).p_value, 0.826335, kTol);
}

TEST(Nist, SerialWorkedExamples) {
    const auto r = serial(bits_from_string("0011011101"), 3);
    EXPECT_NEAR(r.psi_m, 2.8, 1e-12);
    EXPECT_NEAR(r.psi_m1, 1.2, 1e-12);
    EXPECT_NEAR(r.psi_m2, 0.4, 1e-12);
    EXPECT_NEAR(r.del1, 1.6, 1e-12);
    EXPECT_NEAR(r.del2, 0.8, 1e-12);
    EXPECT_NEAR(r.p1, 0.808792, kTol);
    EXPECT_NEAR(r.p2, 0.670320, kTol);
    const auto e = serial(cptest::e_bits(), 16);
    EXPECT_NEAR(e.p1, 0.766182, kTol);
    EXPECT_NEAR(e.p2, 0.462921, kTol);
}

TEST(Nist, ApproximateEntropyWorkedExamples) {
    const auto r = approximate_entropy(bits_from_string("0100110101"), 3);
    EXPECT_NEAR(r.apen, 0.190954, kTol);
    EXPECT_NEAR(r.chi2, 10.043859, kTol);
    EXPECT_NEAR(r.p_value, 0.261961, kTol);
    EXPECT_NEAR(approximate_entropy(bits_from_string(kPi100), 2).p_value, 0.235301, kTol);
    EXPECT_NEAR(approximate_entropy(cptest::e_bits(), 10).p_value, 0.700073, kTol);
}

TEST(Nist, CumulativeSumsWorkedExamples) {
    const auto r = cumulative_sums(bits_from_string("1011010111"), true);
    EXPECT_EQ(r.z, 4.0);
    EXPECT_NEAR(r.p_value, 0.4116588, kTol);
    EXPECT_NEAR(cumulative_sums(bits_from_string(kPi100), true).p_value, 0.219194, kTol);
    EXPECT_NEAR(cumulative_sums(bits_from_string(kPi100), false).p_value, 0.114866, kTol);
    EXPECT_NEAR(cumulative_sums(cptest::e_bits(), true).p_value, 0.669886, kTol);
    EXPECT_NEAR(cumulative_sums(cptest::e_bits(), false).p_value, 0.724265, kTol);
}

TEST(Nist, EBitsMatchKnownPrefix) {
    // e = 10.1011011111100001010100010110001010001010111011010010...
    const auto& e = cptest::e_bits();
    const auto prefix = bits_from_string("1010110111111000010101000101100010100010101110110100");
    EXPECT_TRUE(std::equal(prefix.begin(), prefix.end(), e.begin()));
}
