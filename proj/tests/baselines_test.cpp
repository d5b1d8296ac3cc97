#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "rblu/baselines.hpp"
#include "rblu/metrics.hpp"
#include "rblu/synth.hpp"

using namespace rblu;

namespace {

// Brute force over every support set: unconstrained LS on the support,
// keep feasible solutions, return the best.
Vector nnls_oracle(const Matrix& a, const Vector& b) {
    const auto n = a.cols();
    Vector best = Vector::Zero(n);
    double best_obj = b.squaredNorm();
    for (unsigned mask = 1; mask < (1U << n); ++mask) {
        std::vector<int> idx;
        for (int j = 0; j < n; ++j)
            if (mask & (1U << j)) idx.push_back(j);
        Matrix sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) sub.col(k) = a.col(idx[k]);
        const Vector s = sub.colPivHouseholderQr().solve(b);
        if (s.minCoeff() < 0) continue;
        Vector x = Vector::Zero(n);
        for (std::size_t k = 0; k < idx.size(); ++k) x(idx[k]) = s(k);
        const double obj = (a * x - b).squaredNorm();
        if (obj < best_obj) {
            best_obj = obj;
            best = x;
        }
    }
    return best;
}

// Exhaustive search over the simplex grid with the given step.
double grid_objective(const Matrix& m, const Vector& y, double step) {
    const int k = static_cast<int>(std::lround(1.0 / step));
    double best = std::numeric_limits<double>::infinity();
    Vector a(3);
    for (int i = 0; i <= k; ++i)
        for (int j = 0; i + j <= k; ++j) {
            a << i * step, j * step, (k - i - j) * step;
            best = std::min(best, (y - m * a).squaredNorm());
        }
    return best;
}

}  // namespace

TEST(Nnls, MatchesActiveSetEnumeration) {
    Rng rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix a = Matrix::Random(7, 4);
        Vector b(7);
        for (int i = 0; i < 7; ++i) b(i) = rng.normal();
        const Vector x = nnls(a, b);
        const Vector oracle = nnls_oracle(a, b);
        EXPECT_GE(x.minCoeff(), 0.0);
        EXPECT_NEAR((a * x - b).squaredNorm(), (a * oracle - b).squaredNorm(), 1e-10);
        EXPECT_LT((x - oracle).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Fcls, RecoversFeasibleExactFit) {
    Rng rng(2);
    const Matrix m = synthetic_endmembers(20, 3);
    const Matrix a = gen_abundances(3, 50, rng);
    const Matrix est = fcls(m * a, m);
    EXPECT_LT((est - a).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Fcls, VertexPixel) {
    const Matrix m = synthetic_endmembers(20, 3);
    const Matrix est = fcls(Matrix(m.col(1)), m);
    EXPECT_NEAR(est(0, 0), 0.0, 1e-10);
    EXPECT_NEAR(est(1, 0), 1.0, 1e-10);
    EXPECT_NEAR(est(2, 0), 0.0, 1e-10);
}

TEST(Fcls, ObjectiveMatchesGridSearch) {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix m = Matrix::Random(5, 3).cwiseAbs();
        Vector y(5);
        for (int i = 0; i < 5; ++i) y(i) = 0.5 + 0.5 * rng.normal();
        const Vector a = fcls(Matrix(y), m).col(0);
        const double obj = (y - m * a).squaredNorm();
        const double grid = grid_objective(m, y, 1e-3);
        EXPECT_LE(obj, grid + 1e-12);
        EXPECT_NEAR(obj, grid, 1e-5);
    }
}

TEST(Fcls, SimplexAndNeverWorseThanBestVertex) {
    Rng rng(6);
    const Matrix m = synthetic_endmembers(12, 4);
    Matrix y = Matrix::Random(12, 100).cwiseAbs();
    const Matrix a = fcls(y, m);
    EXPECT_NO_THROW(validate_abundances(a, 1e-6));
    for (Eigen::Index n = 0; n < y.cols(); ++n) {
        const double obj = (y.col(n) - m * a.col(n)).squaredNorm();
        double vertex = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 4; ++k) vertex = std::min(vertex, (y.col(n) - m.col(k)).squaredNorm());
        EXPECT_LE(obj, vertex + 1e-9);
    }
}

TEST(Fcls, RejectsRankDeficientAndMismatchedInputs) {
    Matrix m(3, 2);
    m << 1, 2, 1, 2, 1, 2;
    EXPECT_THROW(fcls(Matrix::Ones(3, 1), m), NumericalError);
    EXPECT_THROW(fcls(Matrix::Ones(4, 1), synthetic_endmembers(3, 2)), DimensionError);
    FclsOptions bad;
    bad.delta = 0;
    EXPECT_THROW(fcls(Matrix::Ones(3, 1), synthetic_endmembers(3, 2), bad), std::invalid_argument);
}

TEST(OFcls, NoiselessImageIsExact) {
    Rng rng(2024);
    const Matrix m = synthetic_endmembers(64, 3);
    const Matrix a = gen_abundances(3, 900, rng);
    const HsiCube cube(30, 30, m * a);
    const OracleFclsResult r = o_fcls(cube, m);
    EXPECT_TRUE(r.oracle_endmembers);
    EXPECT_LE(rnmse(r.abundances, a), 1e-6);
}

TEST(Vca, RecoversPurePixelsNoiseless) {
    Rng gen(9);
    const int r = 3, h = 10, w = 10;
    const Matrix m = synthetic_endmembers(30, r);
    Matrix a = gen_abundances(r, h * w, gen);
    const std::vector<int> pure = {13, 57, 88};
    for (int k = 0; k < r; ++k) a.col(pure[k]) = Vector::Unit(r, k);
    const HsiCube cube(h, w, m * a);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Rng rng(seed);
        VcaDiagnostics diag;
        const Matrix est = vca_init(cube, r, rng, &diag);
        EXPECT_FALSE(diag.low_snr_branch);
        EXPECT_EQ(std::set<int>(diag.indices.begin(), diag.indices.end()), std::set<int>(pure.begin(), pure.end()));
        const EndmemberMatch match = match_endmembers(est, m);
        for (int k = 0; k < r; ++k)
            EXPECT_LT((est.col(match.truth_to_estimate[k]) - m.col(k)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Vca, SingleEndmemberPicksLargestProjection) {
    Rng gen(4);
    const Matrix y = Matrix::Random(8, 30).cwiseAbs();
    const HsiCube cube(5, 6, y);
    Eigen::JacobiSVD<Matrix> svd(y, Eigen::ComputeThinU);
    Eigen::Index expected;
    (svd.matrixU().col(0).transpose() * y).cwiseAbs().maxCoeff(&expected);
    VcaDiagnostics diag;
    vca_init(cube, 1, gen, &diag);
    ASSERT_EQ(diag.indices.size(), 1u);
    EXPECT_EQ(diag.indices[0], expected);
}

TEST(Vca, InteriorDataReturnsDataPixels) {
    Rng gen(11);
    const Matrix m = synthetic_endmembers(25, 3);
    Matrix a(3, 64);
    for (int n = 0; n < 64; ++n) {
        Vector c = gen_abundances(3, 1, gen).col(0);
        a.col(n) = 0.2 * Vector::Constant(3, 1.0 / 3) + 0.8 * c;  // bounded away from the vertices
    }
    const HsiCube cube(8, 8, m * a);
    Rng rng(3);
    VcaDiagnostics diag;
    const Matrix est = vca_init(cube, 3, rng, &diag);
    for (int k = 0; k < 3; ++k) {
        ASSERT_GE(diag.indices[k], 0);
        ASSERT_LT(diag.indices[k], 64);
        EXPECT_LT((est.col(k) - cube.data().col(diag.indices[k])).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Vca, LowSnrBranchOnNoisyData) {
    Rng gen(12);
    const Matrix m = synthetic_endmembers(40, 3);
    const Matrix a = gen_abundances(3, 400, gen);
    Matrix y = m * a;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += 0.08 * gen.normal();
    Rng rng(1);
    VcaDiagnostics diag;
    const Matrix est = vca_init(HsiCube(20, 20, y), 3, rng, &diag);
    EXPECT_TRUE(diag.low_snr_branch);
    EXPECT_LT(diag.snr_db, 15 + 10 * std::log10(3.0));
    EXPECT_GE(est.minCoeff(), 0.0);
    EXPECT_EQ(std::set<int>(diag.indices.begin(), diag.indices.end()).size(), 3u);
}

TEST(Vca, RejectsDegenerateData) {
    Rng rng(1);
    EXPECT_THROW(vca_init(HsiCube(3, 3, Matrix::Constant(5, 9, 0.4)), 3, rng), NumericalError);
    EXPECT_THROW(vca_init(HsiCube(1, 2, Matrix::Ones(5, 2)), 3, rng), DimensionError);
}
