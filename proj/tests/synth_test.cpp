#include <gtest/gtest.h>

#include <cmath>

#include "rblu/synth.hpp"

using namespace rblu;

TEST(GenAbundances, UniformOnSimplex) {
    Rng rng(2024);
    const int r = 3, n = 100000;
    const Matrix a = gen_abundances(r, n, rng);
    EXPECT_NO_THROW(validate_abundances(a, 1e-12));
    const double expected_var = double(r - 1) / (r * r * (r + 1));
    for (int k = 0; k < r; ++k) {
        const double mean = a.row(k).mean();
        const double var = (a.row(k).array() - mean).square().mean();
        EXPECT_NEAR(mean, 1.0 / r, 0.005);
        EXPECT_NEAR(var / expected_var, 1.0, 0.10);
    }
    EXPECT_THROW(gen_abundances(1, 5, rng), std::invalid_argument);
}

TEST(OutlierSupport, FairIndependentSites) {
    Rng rng(1);
    const LabelCube z = gen_outlier_support(30, 30, 20, {0, 0, 0.5}, rng, 50);
    EXPECT_NEAR(double(z.count_ones()) / double(z.sites()), 0.5, 0.01);
}

TEST(OutlierSupport, SingleSiteClosedForm) {
    Rng rng(2);
    const LabelCube z = gen_outlier_support(30, 30, 20, {0, 0, 1}, rng, 50);
    EXPECT_NEAR(double(z.count_ones()) / double(z.sites()), 1.0 / (std::exp(1.0) + 1.0), 0.01);
}

TEST(OutlierSupport, FullScaleFractionNearTenPercent) {
    Rng rng(2024);
    const LabelCube z = gen_outlier_support(60, 60, 207, {0.25, 0.25, 0.55}, rng);
    EXPECT_NEAR(double(z.count_ones()) / double(z.sites()), 0.10, 0.03);
}

TEST(OutlierSupport, RangeRestrictedDraw) {
    Rng rng(3);
    const LabelCube z = gen_outlier_support_in_range(30, 30, 64, {0.25, 0.25, 0.55}, rng, 0.08, 0.13);
    const double frac = double(z.count_ones()) / double(z.sites());
    EXPECT_GE(frac, 0.08);
    EXPECT_LE(frac, 0.13);
}

TEST(LinearImage, NoiseFreeIsExactMixture) {
    Rng rng(4);
    const Matrix m = synthetic_endmembers(10, 3);
    const Matrix a = gen_abundances(3, 12, rng);
    LabelMatrix z = LabelMatrix::Zero(10, 12);
    z(3, 4) = 1;
    const SyntheticImage img = gen_linear_image(3, 4, m, a, z, 0.0, Vector::Zero(10), rng);
    EXPECT_TRUE(img.cube.data() == m * a);
}

TEST(LinearImage, ResidualVarianceMatchesSigma2) {
    Rng rng(5);
    const int h = 250, w = 400, l = 2;
    const Matrix m = synthetic_endmembers(l, 2);
    const Matrix a = gen_abundances(2, h * w, rng);
    LabelMatrix z = LabelMatrix::Zero(l, h * w);
    for (Eigen::Index i = 0; i < z.size(); i += 7) z(i) = 1;
    Vector sigma2(2);
    sigma2 << 1e-4, 4e-3;
    const SyntheticImage img = gen_linear_image(h, w, m, a, z, 0.1, sigma2, rng);
    const Matrix e = img.cube.data() - m * a - z.cast<double>().cwiseProduct(img.truth.outlier_values);
    for (int b = 0; b < l; ++b) {
        const double var = e.row(b).squaredNorm() / double(h * w);
        EXPECT_NEAR(var / sigma2(b), 1.0, 0.02);
    }
    EXPECT_TRUE(img.truth.labels == z);
    EXPECT_DOUBLE_EQ(img.truth.s2, 0.1);
}

TEST(LinearImage, RejectsMismatchedInputs) {
    Rng rng(6);
    const Matrix m = synthetic_endmembers(4, 2);
    const Matrix a = gen_abundances(2, 6, rng);
    EXPECT_THROW(gen_linear_image(2, 2, m, a, LabelMatrix::Zero(4, 6), 0.1, Vector::Ones(4), rng), DimensionError);
    EXPECT_THROW(gen_linear_image(2, 3, m, a, LabelMatrix::Zero(3, 6), 0.1, Vector::Ones(4), rng), DimensionError);
}

TEST(GbmImage, HalfHalfBilinearTerm) {
    Matrix m(3, 2);
    m << 0.2, 0.6, 0.4, 0.5, 0.9, 0.1;
    Matrix a(2, 1);
    a << 0.5, 0.5;
    Rng rng(7);
    const SyntheticImage img =
        gen_gbm_image(1, 1, m, a, Matrix::Ones(1, 1), Vector::Zero(3), LabelMatrix::Ones(1, 1), rng);
    const Vector term = img.cube.data().col(0) - m * a.col(0);
    EXPECT_LT((term - 0.25 * m.col(0).cwiseProduct(m.col(1))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GbmImage, PurePixelsHaveNoBilinearTerm) {
    const Matrix m = synthetic_endmembers(8, 3);
    const Matrix a = Matrix::Identity(3, 3);
    Rng rng(8);
    const SyntheticImage img = gen_gbm_image(1, 3, m, a, Matrix::Ones(3, 3), Vector::Zero(8), LabelMatrix::Ones(1, 3), rng);
    EXPECT_TRUE(img.cube.data().isApprox(m));
}

TEST(GbmImage, DegenerateCasesEqualLinearImage) {
    const int h = 5, w = 6, l = 9;
    const Matrix m = synthetic_endmembers(l, 3);
    Rng ra(9);
    const Matrix a = gen_abundances(3, h * w, ra);
    const Vector sigma2 = Vector::Constant(l, 1e-3);
    Rng r1(10), r2(10), r3(10);
    const SyntheticImage lin = gen_linear_image(h, w, m, a, LabelMatrix::Zero(l, h * w), 0.1, sigma2, r1);
    const SyntheticImage zero_gamma = gen_gbm_image(h, w, m, a, Matrix::Zero(3, h * w), sigma2,
                                                    LabelMatrix::Ones(1, h * w), r2);
    const SyntheticImage empty_mask = gen_gbm_image(h, w, m, a, Matrix::Ones(3, h * w), sigma2,
                                                    LabelMatrix::Zero(1, h * w), r3);
    EXPECT_TRUE(lin.cube.data() == zero_gamma.cube.data());
    EXPECT_TRUE(lin.cube.data() == empty_mask.cube.data());
    Rng r4(11);
    EXPECT_THROW(gen_gbm_image(h, w, m, a, Matrix::Constant(3, h * w, 1.5), sigma2, LabelMatrix::Ones(1, h * w), r4),
                 std::invalid_argument);
}

TEST(Presets, FullScaleSettings) {
    const Preset i2 = preset("paper-I2");
    EXPECT_EQ(i2.height, 60);
    EXPECT_EQ(i2.width, 60);
    EXPECT_EQ(i2.bands, 207);
    EXPECT_DOUBLE_EQ(i2.sigma2, 1e-4);
    EXPECT_DOUBLE_EQ(i2.s2, 0.1);
    EXPECT_EQ(i2.beta, (IsingParams{0.25, 0.25, 0.55}));
    EXPECT_TRUE(i2.outliers);
    EXPECT_FALSE(preset("paper-I1").outliers);
    const Preset gbm = preset("paper-gbm");
    EXPECT_TRUE(gbm.bilinear);
    EXPECT_DOUBLE_EQ(gbm.snr_db, 28.0);
    EXPECT_THROW(preset("paper-I3"), std::invalid_argument);
    EXPECT_THROW(preset("I2"), std::invalid_argument);
}

TEST(Presets, DeskGbmQuarterMaskAndSnr) {
    const SyntheticImage img = generate(preset("desk-gbm"), 2024);
    ASSERT_TRUE(img.truth.nonlinear_mask.has_value());
    EXPECT_EQ(img.truth.nonlinear_mask->cast<int>().sum(), 225);
    // clean signal: linear mixture plus the bilinear terms inside the mask
    const Matrix& m = img.truth.endmembers;
    const Matrix& a = img.truth.abundances;
    Matrix clean = m * a;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        if (!(*img.truth.nonlinear_mask)(0, j)) continue;
        for (int i = 0; i < 3; ++i)
            for (int k = i + 1; k < 3; ++k) clean.col(j) += a(i, j) * a(k, j) * m.col(i).cwiseProduct(m.col(k));
    }
    const double snr = 10 * std::log10(clean.squaredNorm() / double(clean.size()) / img.truth.noise_var(0));
    EXPECT_NEAR(snr, 28.0, 1e-9);
    EXPECT_EQ(img.cube.bands(), 64);
}

TEST(Presets, DeskI2FractionInRange) {
    const SyntheticImage img = generate(preset("desk-I2"), 2024);
    const double frac = double(img.truth.labels.cast<long>().sum()) / double(img.truth.labels.size());
    EXPECT_GE(frac, 0.08);
    EXPECT_LE(frac, 0.13);
}

TEST(Generate, ReproducibleFromSeed) {
    const SyntheticImage a = generate(preset("desk-I2"), 7);
    const SyntheticImage b = generate(preset("desk-I2"), 7);
    const SyntheticImage c = generate(preset("desk-I2"), 8);
    EXPECT_TRUE(a.cube.data() == b.cube.data());
    EXPECT_TRUE(a.truth.labels == b.truth.labels);
    EXPECT_FALSE(a.cube.data() == c.cube.data());
}
