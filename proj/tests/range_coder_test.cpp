#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "mdq/image_io.hpp"
#include "mdq/range_coder.hpp"
#include "test_util.hpp"

namespace mdq {
namespace {

using test::AdaptiveProvider;
using test::FixedProvider;
using test::sample;

TEST(Cdf, SymmetricAroundZeroMean) {
    for (double b : {0.05, 0.7, 3.0, 40.0}) {
        const auto t = build_cdf(0.0, b, -256, 256);
        t.validate();
        for (int s = 1; s <= 256; ++s) ASSERT_EQ(t.mass(s), t.mass(-s)) << "b " << b << " s " << s;
    }
}

TEST(Cdf, TotalMassAndMinimum) {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const auto t = build_cdf(rng.uniform(-300, 300), std::exp(rng.uniform(-7, 7)), -256, 255);
        t.validate();
        EXPECT_EQ(t.cumulative.back(), kCdfTotal);
        for (int s = -256; s <= 255; ++s) ASSERT_GE(t.mass(s), 1u);
    }
}

TEST(Cdf, CentralMassMatchesClosedForm) {
    const auto t = build_cdf(0.0, 1.0, -8, 8);
    const double expect = (1.0 - std::exp(-0.5)) / (1.0 - std::exp(-8.5));
    EXPECT_NEAR(t.mass(0) / double(kCdfTotal), expect, 2e-4);
}

TEST(Cdf, AllZeroWeightsSpreadEvenly) {
    const std::vector<double> w(3, 0.0);
    const auto t = quantize_masses(0, w);
    t.validate();
    EXPECT_LE(t.mass(0) - t.mass(2), 1u);
}

TEST(Cdf, Errors) {
    EXPECT_THROW(build_cdf(0.0, 1.0, 3, 3), Error);
    EXPECT_THROW(build_cdf(0.0, 0.0, -3, 3), Error);
    EXPECT_THROW(build_cdf(0.0, 1.0, 0, 70000), Error);
    const std::vector<double> bad = {1.0, -1.0};
    EXPECT_THROW(quantize_masses(0, bad), Error);
}

TEST(Coder, EmptySequence) {
    const auto t = build_cdf(0.0, 1.0, -4, 4);
    const auto bytes = encode_symbols({}, FixedProvider{t});
    EXPECT_LE(bytes.size(), 8u);
    EXPECT_TRUE(decode_symbols(bytes, 0, FixedProvider{t}).empty());
}

TEST(Coder, HundredThousandSymbols) {
    const auto t = build_cdf(1.3, 2.5, -256, 255);
    Rng rng(2);
    std::vector<std::int32_t> s(100000);
    for (auto& v : s) v = sample(t, rng);
    const auto bytes = encode_symbols(s, FixedProvider{t});
    EXPECT_EQ(decode_symbols(bytes, s.size(), FixedProvider{t}), s);
    EXPECT_LE(8.0 * bytes.size(), ideal_codelength(s, FixedProvider{t}) + 32);
}

TEST(Coder, RawBitsRoundTrip) {
    const auto t = build_cdf(0.0, 3.0, -16, 16);
    RangeEncoder enc;
    enc.encode(t, 5);
    enc.encode_bits(0xDEADBEEFCAFEull, 48);
    enc.encode(t, -16);
    enc.encode_bits(1, 1);
    const auto bytes = enc.finish();
    RangeDecoder dec(bytes);
    EXPECT_EQ(dec.decode(t), 5);
    EXPECT_EQ(dec.decode_bits(48), 0xDEADBEEFCAFEull);
    EXPECT_EQ(dec.decode(t), -16);
    EXPECT_EQ(dec.decode_bits(1), 1u);
}

TEST(Coder, FuzzThousandCases) {
    Rng rng(3);
    for (int c = 0; c < 1000; ++c) {
        const auto r = test::coder_fuzz_case(c, rng);
        ASSERT_TRUE(r.exact) << "case " << c;
        EXPECT_LE(r.coded_bits, r.ideal_bits + 32) << "case " << c;
    }
}

TEST(Coder, OutOfAlphabetNamesIndex) {
    const auto t = build_cdf(0.0, 1.0, -4, 4);
    const std::vector<std::int32_t> s = {0, 1, 9, 0};
    try {
        encode_symbols(s, FixedProvider{t});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::out_of_alphabet);
        EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
    }
}

TEST(Coder, TruncatedStreamIsAnError) {
    const auto t = build_cdf(0.0, 20.0, -256, 255);
    Rng rng(4);
    std::vector<std::int32_t> s(2000);
    for (auto& v : s) v = sample(t, rng);
    const auto bytes = encode_symbols(s, FixedProvider{t});
    // anything shorter than half the stream cannot carry 2000 symbols
    for (std::size_t cut = 0; cut < bytes.size() / 2; ++cut) {
        const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + cut);
        EXPECT_THROW(decode_symbols(part, s.size(), FixedProvider{t}), Error) << "cut " << cut;
    }
}

// Fixed stream pinning the exact byte output of the coder. Regenerate with
// MDQ_WRITE_GOLDEN=1 only when the format changes on purpose.
std::vector<std::uint8_t> golden_stream() {
    AdaptiveProvider gen;
    Rng rng(20240601);
    std::vector<std::int32_t> s(4096);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = sample(gen(i, std::span<const std::int32_t>(s.data(), i)), rng);
    return encode_symbols(s, AdaptiveProvider{});
}

TEST(Coder, GoldenBytes) {
    const auto path = test::data_path("range_golden.bin");
    const auto bytes = golden_stream();
    if (std::getenv("MDQ_WRITE_GOLDEN")) write_file(path, bytes);
    EXPECT_EQ(read_file(path), bytes);
}

} // namespace
} // namespace mdq
