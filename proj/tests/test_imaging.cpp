#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "rigrecon/imaging/filters.hpp"
#include "rigrecon/imaging/image.hpp"
#include "rigrecon/imaging/phase_correlation.hpp"
#include "test_support.hpp"

namespace rigrecon::imaging {
namespace {

TEST(LaplacianVariance, ConstantImageIsZero) {
  EXPECT_DOUBLE_EQ(laplacian_variance(Image(17, 9, 1, 0.42)).value, 0.0);
}

TEST(LaplacianVariance, ImpulseHandConvolution) {
  Image img(3, 3, 1, 0.0);
  img.at(1, 1) = 1.0;
  // Replicated border: center -4, edge midpoints +1, corners 0.
  const std::vector<double> responses = {-4, 1, 1, 1, 1, 0, 0, 0, 0};
  EXPECT_NEAR(laplacian_variance(img).value, testing::population_variance(responses), 1e-15);
  EXPECT_NEAR(laplacian_variance(img).value, 20.0 / 9.0, 1e-15);
}

TEST(LaplacianVariance, ColorUsesLuma) {
  Image rgb(4, 4, 3, 0.0);
  Image gray(4, 4, 1, 0.0);
  rgb.at(1, 2, 0) = 1.0;
  rgb.at(1, 2, 1) = 0.5;
  gray.at(1, 2) = 0.299 + 0.587 * 0.5;
  EXPECT_NEAR(laplacian_variance(rgb).value, laplacian_variance(gray).value, 1e-15);
}

TEST(LaplacianVariance, BlurLowersScoreAndOffsetIsIgnored) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Image tex = testing::smooth_texture(64, 48, 3.0 + trial * 0.3, rng);
    const double sharp = laplacian_variance(tex).value;
    EXPECT_LT(laplacian_variance(gaussian_blur(tex, 1.5)).value, sharp);
    Image shifted = tex;
    for (double& v : shifted.data) v += 0.125;
    EXPECT_NEAR(laplacian_variance(shifted).value, sharp, 1e-12 * (1 + sharp));
  }
}

TEST(LaplacianVariance, EmptyImageThrows) {
  try {
    laplacian_variance(Image());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyImage);
  }
}

TEST(GaussianBlur, ZeroSigmaIsIdentity) {
  std::mt19937_64 rng(2);
  const Image tex = testing::smooth_texture(20, 10, 2.0, rng);
  EXPECT_EQ(gaussian_blur(tex, 0.0).data, tex.data);
}

TEST(GaussianBlur, ImpulseGivesSampledKernel) {
  const double sigma = 1.3;
  Image img(31, 31, 1, 0.0);
  img.at(15, 15) = 1.0;
  const Image out = gaussian_blur(img, sigma);
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) norm += std::exp(-0.5 * i * i / (sigma * sigma));
  const double k0 = 1.0 / norm;
  for (int i = -radius; i <= radius; ++i) {
    const double k = std::exp(-0.5 * i * i / (sigma * sigma)) / norm;
    EXPECT_NEAR(out.at(15 + i, 15), k * k0, 1e-15);
    EXPECT_NEAR(out.at(15, 15 + i), k * k0, 1e-15);
  }
  EXPECT_EQ(out.at(15 + radius + 1, 15), 0.0);
}

TEST(GaussianBlur, PreservesMean) {
  std::mt19937_64 rng(3);
  for (double sigma : {0.5, 1.5, 3.0}) {
    // Content kept away from the border so replicated samples are zeros.
    const Image tex = testing::smooth_texture(40, 30, 3.0, rng);
    Image img(80, 70, 1, 0.0);
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 40; ++x) img.at(x + 20, y + 20) = tex.at(x, y);
    EXPECT_NEAR(gaussian_blur(img, sigma).mean(), img.mean(), 1e-6);
  }
}

TEST(Clahe, ConstantStaysConstantAndInRange) {
  const Image out = clahe(Image(64, 48, 1, 0.3), 8, 2.0);
  for (double v : out.data) {
    EXPECT_DOUBLE_EQ(v, out.data.front());
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Clahe, StretchesEachHalf) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(64, 32, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) img.at(x, y) = x < 32 ? 0.10 + 0.10 * u(rng) : 0.70 + 0.10 * u(rng);
  const Image out = clahe(img, 2, 2.0);
  for (int half = 0; half < 2; ++half) {
    double in_lo = 1, in_hi = 0, out_lo = 1, out_hi = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = half * 32; x < half * 32 + 32; ++x) {
        in_lo = std::min(in_lo, img.at(x, y));
        in_hi = std::max(in_hi, img.at(x, y));
        out_lo = std::min(out_lo, out.at(x, y));
        out_hi = std::max(out_hi, out.at(x, y));
      }
    EXPECT_GE(out_hi - out_lo, in_hi - in_lo) << "half " << half;
  }
}

TEST(Clahe, OutputAlwaysInUnitRange) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Image img(23 + trial, 17 + 2 * trial, 1);
    for (double& v : img.data) v = u(rng) * u(rng);
    const Image out = clahe(img, 1 + trial % 9, 0.5 + trial * 0.3);
    for (double v : out.data) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(PhaseCorrelation, IdenticalFramesGiveZero) {
  std::mt19937_64 rng(6);
  const Image a = testing::smooth_texture(64, 64, 4.0, rng);
  const PhaseShift s = phase_correlate(a, a);
  EXPECT_EQ(s.peak_y, 0);
  EXPECT_EQ(s.peak_x, 0);
  EXPECT_NEAR(phase_correlate_vertical(a, a), 0.0, 1e-12);
}

TEST(PhaseCorrelation, CyclicShiftDown) {
  std::mt19937_64 rng(7);
  const Image a = testing::smooth_texture(64, 64, 4.0, rng);
  const Image b = testing::shift_rows_cyclic(a, 5);
  EXPECT_EQ(phase_correlate(a, b).peak_y, 5);
  EXPECT_NEAR(phase_correlate_vertical(a, b), 5.0, 0.01);
}

TEST(PhaseCorrelation, SubPixelBilinearShift) {
  std::mt19937_64 rng(8);
  const Image big = testing::smooth_texture(96, 120, 5.0, rng);
  // b(x, y) = a(x, y - 4.5) by averaging two integer shifts.
  Image a(96, 96, 1), b(96, 96, 1);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) {
      a.at(x, y) = big.at(x, y + 10);
      b.at(x, y) = 0.5 * (big.at(x, y + 10 - 4) + big.at(x, y + 10 - 5));
    }
  EXPECT_NEAR(phase_correlate_vertical(a, b), 4.5, 0.25);
}

TEST(PhaseCorrelation, Antisymmetric) {
  std::mt19937_64 rng(9);
  for (int k : {-7, -2, 3, 11}) {
    const Image a = testing::smooth_texture(64, 48, 3.5, rng);
    const Image b = testing::shift_rows_cyclic(a, k);
    EXPECT_NEAR(phase_correlate_vertical(a, b), -phase_correlate_vertical(b, a), 0.02);
  }
}

TEST(PhaseCorrelation, NonPowerOfTwoFrames) {
  std::mt19937_64 rng(10);
  const Image big = testing::smooth_texture(90, 100, 4.0, rng);
  Image a(90, 70, 1), b(90, 70, 1);
  for (int y = 0; y < 70; ++y)
    for (int x = 0; x < 90; ++x) {
      a.at(x, y) = big.at(x, y + 15);
      b.at(x, y) = big.at(x, y + 15 - 3);
    }
  EXPECT_NEAR(phase_correlate_vertical(a, b), 3.0, 0.25);
}

TEST(PhaseCorrelation, ZeroVarianceIsDegenerate) {
  std::mt19937_64 rng(11);
  const Image a = testing::smooth_texture(32, 32, 4.0, rng);
  try {
    phase_correlate_vertical(a, Image(32, 32, 1, 0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSpectrum);
  }
}

TEST(Pnm, WriteReadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "rigrecon_pnm_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(12);
  const Image gray = quantize8(testing::smooth_texture(13, 7, 2.0, rng));
  write_pnm(dir / "g.pgm", gray);
  EXPECT_EQ(read_pnm(dir / "g.pgm").data, gray.data);
  Image rgb(5, 4, 3);
  for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = (i % 256) / 255.0;
  write_pnm(dir / "c.ppm", rgb);
  const Image back = read_pnm(dir / "c.ppm");
  EXPECT_EQ(back.channels, 3);
  EXPECT_EQ(back.data, rgb.data);
  write_text_file(dir / "bad.pgm", "P2\n1 1\n255\n0\n");
  EXPECT_THROW(read_pnm(dir / "bad.pgm"), Error);
  EXPECT_THROW(read_pnm(dir / "missing.pgm"), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace rigrecon::imaging
