#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "test_util.hpp"

namespace mdq {
namespace {

using test::random_values;

Image random_image(std::size_t w, std::size_t h, std::size_t c, std::uint64_t seed) {
    Image img(w, h, c);
    img.data = random_values(img.data.size(), seed, 0.0, 1.0);
    return img;
}

TEST(Psnr, IdenticalIsCapped) {
    const auto a = random_image(8, 8, 3, 1);
    EXPECT_EQ(psnr(a, a), kPsnrCap);
}

TEST(Psnr, ClosedForm) {
    const Image a(10, 7, 3, 0.0), b(10, 7, 3, 16.0 / 255.0);
    const double expect = 10.0 * std::log10(255.0 * 255.0 / 256.0);
    EXPECT_NEAR(psnr(a, b), expect, 1e-6);
    EXPECT_NEAR(psnr(a, b), 24.05, 0.005);
}

TEST(Psnr, TwoPassOracle) {
    const auto a = random_image(13, 9, 3, 2), b = random_image(13, 9, 3, 3);
    // pass 1: per-row sums of squared error, pass 2: total
    std::vector<long double> rows(9, 0.0L);
    for (std::size_t r = 0; r < 9; ++r)
        for (std::size_t c = 0; c < 13; ++c)
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const long double d = (long double)a.at(r, c, ch) - b.at(r, c, ch);
                rows[r] += d * d;
            }
    long double total = 0.0L;
    for (auto v : rows) total += v;
    const double expect = -10.0 * std::log10(static_cast<double>(total / (13 * 9 * 3)));
    EXPECT_NEAR(psnr(a, b), expect, 1e-9);
}

TEST(Psnr, DimensionMismatch) { EXPECT_THROW(psnr(Image(4, 4, 1), Image(4, 4, 3)), Error); }

TEST(MsSsim, SelfIsExactlyOne) {
    const auto img = read_image(test::data_path("astronaut_128.ppm"));
    EXPECT_EQ(ms_ssim(img, img), 1.0);
    const auto r = random_image(40, 23, 1, 4);
    EXPECT_EQ(ms_ssim(r, r), 1.0);
}

TEST(MsSsim, Symmetric) {
    const auto img = read_image(test::data_path("astronaut_128.ppm"));
    Image noisy = img;
    Rng rng(5);
    for (double& v : noisy.data) v = std::clamp(v + rng.uniform(-0.1, 0.1), 0.0, 1.0);
    EXPECT_NEAR(ms_ssim(img, noisy), ms_ssim(noisy, img), 1e-12);
    const auto a = random_image(64, 50, 3, 6), b = random_image(64, 50, 3, 7);
    EXPECT_NEAR(ms_ssim(a, b), ms_ssim(b, a), 1e-12);
}

TEST(MsSsim, ScaleCounts) {
    EXPECT_EQ(ms_ssim_scales(512, 512), 5);
    EXPECT_EQ(ms_ssim_scales(176, 300), 5);
    EXPECT_EQ(ms_ssim_scales(175, 300), 4);
    EXPECT_EQ(ms_ssim_scales(128, 128), 4);
    EXPECT_EQ(ms_ssim_scales(21, 21), 1);
    EXPECT_EQ(ms_ssim_scales(10, 100), 0);
}

TEST(MsSsim, TooSmallIsAnError) { EXPECT_THROW(ms_ssim(Image(10, 10, 1), Image(10, 10, 1)), Error); }

// Single-scale value pinned from scikit-image's structural_similarity
// (gaussian_weights, sigma 1.5, population covariance, data_range 1).
TEST(MsSsim, SingleScaleMatchesReference) {
    const auto a = read_image(test::data_path("ssim_a.pgm")), b = read_image(test::data_path("ssim_b.pgm"));
    ASSERT_EQ(ms_ssim_scales(a.width, a.height), 1);
    EXPECT_NEAR(ms_ssim(a, b), 0.951779077751275, 1e-9);
}

TEST(MsSsim, NoiseMonotonicallyLowersScore) {
    const auto img = read_image(test::data_path("astronaut_512.png"));
    ASSERT_EQ(ms_ssim_scales(img.width, img.height), 5);
    double previous = 1.0;
    for (double amp : {0.01, 0.03, 0.06, 0.1, 0.2}) {
        Image noisy = img;
        Rng rng(8);
        for (double& v : noisy.data) v = std::clamp(v + amp * rng.uniform(-1.0, 1.0), 0.0, 1.0);
        const double s = ms_ssim(img, noisy);
        EXPECT_LT(s, previous) << "amplitude " << amp;
        EXPECT_GE(s, 0.0);
        previous = s;
    }
}

class ImageIo : public ::testing::Test {
protected:
    std::filesystem::path dir = std::filesystem::temp_directory_path() / "mdq_io_test";
    void SetUp() override { std::filesystem::create_directories(dir); }
    void TearDown() override { std::filesystem::remove_all(dir); }
};

TEST_F(ImageIo, PpmAndPngRoundTrip) {
    const auto img = to_8bit_grid(random_image(17, 11, 3, 9));
    const auto gray = to_8bit_grid(random_image(9, 5, 1, 10));
    for (const char* ext : {".ppm", ".png"}) {
        const auto p = (dir / (std::string("rgb") + ext)).string();
        write_image(p, img);
        EXPECT_EQ(read_image(p).data, img.data);
        const auto q = (dir / (std::string("gray") + ext)).string();
        write_image(q, gray);
        const auto back = read_image(q);
        EXPECT_EQ(back.channels, 1u);
        EXPECT_EQ(back.data, gray.data);
    }
}

TEST_F(ImageIo, FixturesAgree) {
    const auto small = read_image(test::data_path("astronaut_128.ppm"));
    EXPECT_EQ(small.width, 128u);
    EXPECT_EQ(small.channels, 3u);
    const auto big = read_image(test::data_path("astronaut_512.png"));
    EXPECT_EQ(big.width, 512u);
    EXPECT_EQ(big.height, 512u);
}

TEST_F(ImageIo, Errors) {
    EXPECT_THROW(read_image((dir / "missing.ppm").string()), Error);
    const auto p = (dir / "bad.ppm").string();
    const std::string text = "P3\n1 1\n255\n0 0 0\n";
    write_file(p, std::vector<std::uint8_t>(text.begin(), text.end()));
    EXPECT_THROW(read_image(p), Error);
    const std::string deep = "P6\n1 1\n65535\n";
    write_file(p, std::vector<std::uint8_t>(deep.begin(), deep.end()));
    EXPECT_THROW(read_image(p), Error);
    const std::string cut = "P6\n4 4\n255\nabc";
    write_file(p, std::vector<std::uint8_t>(cut.begin(), cut.end()));
    EXPECT_THROW(read_image(p), Error);
}

TEST(Export, EightBitGrid) {
    Image img(3, 1, 1);
    img.data = {-0.2, 0.5, 1.7};
    const auto e = to_8bit_grid(img);
    EXPECT_EQ(e.data[0], 0.0);
    EXPECT_EQ(e.data[1], 128.0 / 255.0);
    EXPECT_EQ(e.data[2], 1.0);
}

} // namespace
} // namespace mdq
