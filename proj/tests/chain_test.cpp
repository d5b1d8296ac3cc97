#include <gtest/gtest.h>

#include <cmath>

#include "rblu/metrics.hpp"
#include "rblu/rblu_sampler.hpp"
#include "rblu/synth.hpp"

using namespace rblu;

namespace {

SyntheticImage small_image(std::uint64_t seed, bool outliers) {
    Preset p = preset(outliers ? "desk-I2" : "desk-I1");
    p.height = 8;
    p.width = 8;
    p.bands = 16;
    p.min_outlier_fraction = 0.0;
    p.max_outlier_fraction = 1.0;
    return generate(p, seed);
}

SamplerConfig short_config(std::uint64_t seed) {
    SamplerConfig cfg;
    cfg.n_mc = 60;
    cfg.n_bi = 20;
    cfg.seed = seed;
    cfg.check_invariants = true;
    return cfg;
}

// Chain whose retained draws are supplied directly.
Chain handmade_chain(int h, int w, int l, int r, int retained) {
    Chain c;
    c.height = h;
    c.width = w;
    c.config.n_mc = retained + 1;
    c.config.n_bi = 1;
    c.retained = retained;
    c.label_counts = CountMatrix::Zero(l, h * w);
    c.outlier_value_sums = Matrix::Zero(l, h * w);
    for (int k = 0; k < retained; ++k) {
        c.endmember_samples.push_back(Matrix::Constant(l, r, 0.5));
        c.abundance_samples.push_back(Matrix::Constant(r, h * w, 1.0 / r));
    }
    c.noise_trace.assign(retained + 1, Vector::Constant(l, 0.1));
    c.s2_trace.assign(retained + 1, 0.2);
    c.final_state.beta = {0.3, 0.2, 0.6};
    return c;
}

}  // namespace

TEST(RunChain, SameSeedGivesIdenticalSummary) {
    const SyntheticImage img = small_image(3, true);
    const PosteriorSummary a = summarize(run_chain(img.cube, 3, short_config(9)));
    const PosteriorSummary b = summarize(run_chain(img.cube, 3, short_config(9)));
    EXPECT_TRUE(a.endmembers == b.endmembers);
    EXPECT_TRUE(a.abundances == b.abundances);
    EXPECT_TRUE(a.labels == b.labels);
    EXPECT_TRUE(a.outliers == b.outliers);
    EXPECT_EQ(a.beta, b.beta);
    EXPECT_TRUE(a.noise_var_mean == b.noise_var_mean);

    const PosteriorSummary c = summarize(run_chain(img.cube, 3, short_config(10)));
    EXPECT_FALSE(a.abundances == c.abundances);
}

TEST(RunChain, MultiThreadScheduleIsDeterministicPerThreadCount) {
    const SyntheticImage img = small_image(4, true);
    SamplerConfig cfg = short_config(5);
    cfg.threads = 3;
    const PosteriorSummary a = summarize(run_chain(img.cube, 3, cfg));
    const PosteriorSummary b = summarize(run_chain(img.cube, 3, cfg));
    EXPECT_TRUE(a.abundances == b.abundances);
    EXPECT_TRUE(a.labels == b.labels);
}

TEST(RunChain, StatesSatisfyInvariantsAndTracesHaveLength) {
    const SyntheticImage img = small_image(6, true);
    SamplerConfig cfg = short_config(2);
    cfg.thinning = 3;
    int calls = 0;
    const Chain chain = run_chain(img.cube, 3, cfg, std::nullopt, [&](int t, const MixingState& s) {
        ++calls;
        EXPECT_EQ(s.iteration, t);
        EXPECT_NO_THROW(validate_abundances(s.abundances()));
        EXPECT_GE(s.endmembers.minCoeff(), 0.0);
    });
    EXPECT_EQ(calls, 60);
    EXPECT_EQ(chain.beta_trace.size(), 60u);
    EXPECT_EQ(chain.retained, 14);  // iterations 21, 24, ..., 60
    EXPECT_LE(chain.label_counts.maxCoeff(), chain.retained);
    for (std::size_t t = 20; t < chain.beta_trace.size(); ++t) EXPECT_EQ(chain.beta_trace[t], chain.beta_trace[19]);
}

TEST(RunChain, RejectsBadInputs) {
    const SyntheticImage img = small_image(1, false);
    SamplerConfig cfg = short_config(1);
    EXPECT_THROW(run_chain(img.cube, 1, cfg), std::invalid_argument);
    cfg.n_bi = cfg.n_mc;
    EXPECT_THROW(run_chain(img.cube, 3, cfg), std::invalid_argument);
    cfg = short_config(1);
    EXPECT_THROW(run_chain(img.cube, 3, cfg, Initialization{Matrix::Ones(5, 3), Matrix::Ones(3, 64) / 3}),
                 DimensionError);
    EXPECT_THROW(run_chain(HsiCube(1, 2, Matrix::Ones(16, 2)), 3, cfg), DimensionError);
}

TEST(RunChain, FrozenLabelsKnownEndmembersNoiseless) {
    // Z frozen at zero and beta frozen: plain Bayesian LMM unmixing.
    Rng rng(7);
    const int h = 6, w = 6, l = 16;
    const Matrix m = synthetic_endmembers(l, 3);
    const Matrix a = gen_abundances(3, h * w, rng);
    const HsiCube cube(h, w, m * a);
    SamplerConfig cfg;
    cfg.n_mc = 200;
    cfg.n_bi = 50;
    cfg.seed = 3;
    cfg.frozen.labels = cfg.frozen.beta = cfg.frozen.endmembers = true;
    Initialization init{m, Matrix::Constant(3, h * w, 1.0 / 3)};
    const PosteriorSummary s = summarize(run_chain(cube, 3, cfg, init));
    EXPECT_LE(rnmse(s.abundances, a), 1e-3);
    EXPECT_EQ(s.labels.count_ones(), 0);
    EXPECT_TRUE(s.endmembers.isApprox(m, 1e-14));
}

TEST(RunChain, InitialisedAtTruthStaysNearTruth) {
    Rng rng(8);
    const int h = 6, w = 6, l = 16;
    const Matrix m = synthetic_endmembers(l, 3);
    const Matrix a = gen_abundances(3, h * w, rng);
    Matrix y = m * a;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += 1e-3 * rng.normal();
    SamplerConfig cfg;
    cfg.n_mc = 150;
    cfg.n_bi = 50;
    cfg.seed = 4;
    const Chain chain = run_chain(HsiCube(h, w, y), 3, cfg, Initialization{m, a});
    const PosteriorSummary s = summarize(chain);
    // spread of retained abundance draws around their mean
    double spread = 0;
    for (const auto& draw : chain.abundance_samples) spread += (draw - s.abundances).squaredNorm();
    const double sd = std::sqrt(spread / chain.retained / double(a.size()));
    EXPECT_LE(rnmse(s.abundances, a), 10 * sd);
    EXPECT_LT(rnmse(s.abundances, a), 0.02);
}

TEST(Summarize, IdenticalSamplesReproduceTheSample) {
    Chain c = handmade_chain(2, 2, 3, 2, 4);
    c.label_counts(1, 2) = 4;
    c.outlier_value_sums(1, 2) = 4 * 0.7;
    const PosteriorSummary s = summarize(c);
    EXPECT_TRUE(s.endmembers == c.endmember_samples[0]);
    EXPECT_TRUE(s.abundances == c.abundance_samples[0]);
    EXPECT_EQ(s.labels(1, 2), 1);
    EXPECT_DOUBLE_EQ(s.outliers(1, 2), 0.7);
    EXPECT_DOUBLE_EQ(s.outlier_energy(2), 0.7 * 0.7);
    EXPECT_DOUBLE_EQ(s.band_outlier_energy(1), 0.49 / 4);
    EXPECT_EQ(s.beta, (IsingParams{0.3, 0.2, 0.6}));
    EXPECT_NEAR(s.outlier_var_mean, 0.2, 1e-15);
}

TEST(Summarize, MajorityRuleAndSparsity) {
    Chain c = handmade_chain(2, 3, 2, 2, 10);
    c.label_counts(0, 0) = 4;   // 40 %
    c.outlier_value_sums(0, 0) = 4.0;
    c.label_counts(1, 1) = 5;   // exactly half is not a majority
    c.outlier_value_sums(1, 1) = 1.0;
    c.label_counts(1, 4) = 6;
    c.outlier_value_sums(1, 4) = -3.0;
    const PosteriorSummary s = summarize(c);
    EXPECT_EQ(s.labels(0, 0), 0);
    EXPECT_EQ(s.outliers(0, 0), 0.0);
    EXPECT_EQ(s.labels(1, 1), 0);
    EXPECT_EQ(s.labels(1, 4), 1);
    EXPECT_DOUBLE_EQ(s.outliers(1, 4), -0.5);
    const auto nonzero = (s.outliers.array() != 0.0).count();
    EXPECT_EQ(nonzero, s.labels.count_ones());
    for (Eigen::Index i = 0; i < s.outliers.size(); ++i) {
        if (s.labels.labels()(i) == 0) {
            EXPECT_EQ(s.outliers(i), 0.0);
        }
    }
}

TEST(Summarize, EmptyChainRaises) {
    Chain c = handmade_chain(1, 1, 1, 2, 0);
    EXPECT_THROW(summarize(c), DataError);
}

TEST(Summarize, SparseOnRealChain) {
    const SyntheticImage img = small_image(11, true);
    const PosteriorSummary s = summarize(run_chain(img.cube, 3, short_config(3)));
    EXPECT_EQ((s.outliers.array() != 0.0).count(), s.labels.count_ones());
}
