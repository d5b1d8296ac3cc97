#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rblu/ising.hpp"
#include "rblu/random.hpp"
#include "rblu/types.hpp"

namespace rblu {

/// Everything used to generate a synthetic cube.
struct GroundTruth {
    Matrix endmembers;      // L x R
    Matrix abundances;      // R x N
    LabelMatrix labels;     // L x N outlier support (all zero when absent)
    Matrix outlier_values;  // L x N
    Vector noise_var;       // L
    double s2 = 0;
    std::optional<LabelMatrix> nonlinear_mask;  // 1 x N, set for bilinear images
};

struct SyntheticImage {
    HsiCube cube;
    GroundTruth truth;
};

/// Smooth reflectance-like spectra: a slope plus two Gaussian bumps per
/// endmember, with bump centres staggered across the endmembers. Values lie
/// in (0, 1).
inline Matrix synthetic_endmembers(int bands, int r) {
    if (bands < 1 || r < 1) throw std::invalid_argument("synthetic_endmembers: bands and R must be positive");
    Matrix m(bands, r);
    for (int k = 0; k < r; ++k) {
        const double c1 = (k + 0.5) / r;
        const double c2 = std::fmod(c1 + 0.45, 1.0);
        const double slope = (k % 2 == 0 ? 0.25 : -0.2) * (1.0 + 0.3 * k / std::max(1, r - 1));
        const double base = 0.15 + 0.25 * (k % 3) / 2.0;
        for (int l = 0; l < bands; ++l) {
            const double t = bands > 1 ? double(l) / (bands - 1) : 0.5;
            const double b1 = std::exp(-0.5 * std::pow((t - c1) / 0.09, 2));
            const double b2 = std::exp(-0.5 * std::pow((t - c2) / 0.16, 2));
            const double v = base + slope * (t - 0.5) + 0.45 * b1 + 0.2 * b2;
            m(l, k) = std::clamp(v, 0.02, 0.98);
        }
    }
    return m;
}

/// Columns i.i.d. uniform on the simplex (Dirichlet(1,...,1)) via
/// normalised exponentials.
inline Matrix gen_abundances(int r, int n, Rng& rng) {
    if (r < 2) throw std::invalid_argument("gen_abundances: need R >= 2");
    Matrix a(r, n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < r; ++i) a(i, j) = rng.exponential();
        a.col(j) /= a.col(j).sum();
    }
    return a;
}

/// Outlier support drawn from the Ising prior: Bernoulli(1/2) start, then
/// `sweeps` coloured Gibbs sweeps.
inline LabelCube gen_outlier_support(int height, int width, int bands, const IsingParams& beta, Rng& rng,
                                     int sweeps = 500) {
    beta.validate();
    LabelCube z(height, width, bands);
    for (int n = 0; n < z.pixels(); ++n)
        for (int l = 0; l < bands; ++l) z(l, n) = rng.bernoulli(0.5) ? 1 : 0;
    for (int s = 0; s < sweeps; ++s) gibbs_sweep_colored(z, beta, rng);
    return z;
}

/// Repeated support draws (each on its own split stream) until the
/// fraction of ones lands in [lo, hi]. Falls back to the closest draw after
/// `max_attempts`.
inline LabelCube gen_outlier_support_in_range(int height, int width, int bands, const IsingParams& beta, Rng& rng,
                                              double lo, double hi, int sweeps = 500, int max_attempts = 64) {
    std::optional<LabelCube> best;
    double best_gap = std::numeric_limits<double>::infinity();
    const Rng root(rng.next_u64());
    for (int k = 0; k < max_attempts; ++k) {
        Rng stream = root.split(static_cast<std::uint64_t>(k));
        LabelCube z = gen_outlier_support(height, width, bands, beta, stream, sweeps);
        const double frac = double(z.count_ones()) / double(z.sites());
        if (frac >= lo && frac <= hi) return z;
        const double gap = frac < lo ? lo - frac : frac - hi;
        if (gap < best_gap) {
            best_gap = gap;
            best = std::move(z);
        }
    }
    return *best;
}

/// Noise variance giving the requested SNR (dB) for a noise-free image:
/// 10 log10( sum ||y_n||^2 / (N L sigma^2) ).
inline double noise_variance_for_snr(const Matrix& clean, double snr_db) {
    return clean.squaredNorm() / static_cast<double>(clean.size()) / std::pow(10.0, snr_db / 10.0);
}

namespace detail {
// Child streams of the image generators, so the noise draws do not depend on
// whether outlier values were drawn.
inline constexpr std::uint64_t kOutlierStream = 1;
inline constexpr std::uint64_t kNoiseStream = 2;
}  // namespace detail

/// Y = M A + Z .* X + E with X ~ N(0, s2) entrywise and E_{l,n} ~ N(0, sigma2_l).
inline SyntheticImage gen_linear_image(int height, int width, const Matrix& endmembers, const Matrix& abundances,
                                       const LabelMatrix& labels, double s2, const Vector& sigma2, Rng& rng) {
    const auto l = endmembers.rows();
    const auto n = abundances.cols();
    detail::require_dims(abundances.rows() == endmembers.cols(), "abundances",
                         "expected " + std::to_string(endmembers.cols()) + " rows");
    detail::require_dims(n == static_cast<Eigen::Index>(height) * width, "abundances",
                         "expected " + std::to_string(static_cast<long>(height) * width) + " pixels");
    detail::require_dims(labels.rows() == l && labels.cols() == n, "labels", "expected " + detail::shape(l, n));
    detail::require_dims(sigma2.size() == l, "sigma2", "expected length " + std::to_string(l));
    if (s2 < 0 || (sigma2.array() < 0).any()) throw std::invalid_argument("gen_linear_image: negative variance");

    GroundTruth truth;
    truth.endmembers = endmembers;
    truth.abundances = abundances;
    truth.labels = labels;
    truth.noise_var = sigma2;
    truth.s2 = s2;
    const Rng root(rng.next_u64());
    Rng value_rng = root.split(detail::kOutlierStream);
    Rng noise_rng = root.split(detail::kNoiseStream);
    truth.outlier_values.resize(l, n);
    const double sd = std::sqrt(s2);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < l; ++i) truth.outlier_values(i, j) = sd * value_rng.normal();

    Matrix y = endmembers * abundances + labels.cast<double>().cwiseProduct(truth.outlier_values);
    const Vector noise_sd = sigma2.cwiseSqrt();
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < l; ++i) y(i, j) += noise_sd(i) * noise_rng.normal();
    return {HsiCube(height, width, std::move(y)), std::move(truth)};
}

/// Number of endmember pairs i < j.
inline int bilinear_pairs(int r) { return r * (r - 1) / 2; }

/// Generalised bilinear mixture: for masked pixels
/// y_n = M a_n + sum_{i<j} gamma_{ij,n} a_i a_j (m_i .* m_j) + e_n;
/// other pixels follow the linear model. `gamma` is pairs x N with pairs
/// ordered (0,1), (0,2), ..., (1,2), ...
inline SyntheticImage gen_gbm_image(int height, int width, const Matrix& endmembers, const Matrix& abundances,
                                    const Matrix& gamma, const Vector& sigma2, const LabelMatrix& nonlinear_mask,
                                    Rng& rng) {
    const auto l = endmembers.rows();
    const auto r = static_cast<int>(endmembers.cols());
    const auto n = abundances.cols();
    detail::require_dims(abundances.rows() == r, "abundances", "expected " + std::to_string(r) + " rows");
    detail::require_dims(n == static_cast<Eigen::Index>(height) * width, "abundances",
                         "expected " + std::to_string(static_cast<long>(height) * width) + " pixels");
    detail::require_dims(gamma.rows() == bilinear_pairs(r) && gamma.cols() == n, "gamma",
                         "expected " + detail::shape(bilinear_pairs(r), n));
    detail::require_dims(nonlinear_mask.rows() == 1 && nonlinear_mask.cols() == n, "nonlinear_mask",
                         "expected " + detail::shape(1, n));
    detail::require_dims(sigma2.size() == l, "sigma2", "expected length " + std::to_string(l));
    if ((gamma.array() < 0).any() || (gamma.array() > 1).any())
        throw std::invalid_argument("gen_gbm_image: gamma entries must lie in [0, 1]");

    Matrix y = endmembers * abundances;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!nonlinear_mask(0, j)) continue;
        int p = 0;
        for (int a = 0; a < r - 1; ++a)
            for (int b = a + 1; b < r; ++b, ++p)
                y.col(j) += gamma(p, j) * abundances(a, j) * abundances(b, j) *
                            endmembers.col(a).cwiseProduct(endmembers.col(b));
    }
    const Rng root(rng.next_u64());
    Rng noise_rng = root.split(detail::kNoiseStream);
    const Vector noise_sd = sigma2.cwiseSqrt();
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < l; ++i) y(i, j) += noise_sd(i) * noise_rng.normal();

    GroundTruth truth;
    truth.endmembers = endmembers;
    truth.abundances = abundances;
    truth.labels = LabelMatrix::Zero(l, n);
    truth.outlier_values = Matrix::Zero(l, n);
    truth.noise_var = sigma2;
    truth.nonlinear_mask = nonlinear_mask;
    return {HsiCube(height, width, std::move(y)), std::move(truth)};
}

/// Contiguous block covering the top-left quadrant of the grid.
inline LabelMatrix quadrant_mask(int height, int width) {
    LabelMatrix m = LabelMatrix::Zero(1, static_cast<Eigen::Index>(height) * width);
    for (int row = 0; row < height / 2; ++row)
        for (int col = 0; col < width / 2; ++col) m(0, row * width + col) = 1;
    return m;
}

/// Named synthetic setups.
struct Preset {
    std::string name;
    int height = 60;
    int width = 60;
    int bands = 207;
    int r = 3;
    double sigma2 = 1e-4;
    double s2 = 0.0;
    bool outliers = false;
    IsingParams beta{0.25, 0.25, 0.55};
    int support_sweeps = 500;
    double min_outlier_fraction = 0.0;  // support redrawn until the fraction is in range
    double max_outlier_fraction = 1.0;
    bool bilinear = false;
    double snr_db = 28.0;  // bilinear images only; sets sigma2
};

inline std::vector<std::string> preset_names() {
    return {"paper-I1", "paper-I2", "paper-gbm", "desk-I1", "desk-I2", "desk-gbm"};
}

inline Preset preset(const std::string& name) {
    Preset p;
    p.name = name;
    const bool desk = name.rfind("desk-", 0) == 0;
    if (desk) {
        p.height = 30;
        p.width = 30;
        p.bands = 64;
    }
    const std::string kind = name.substr(name.find('-') + 1);
    if ((name.rfind("paper-", 0) != 0 && !desk) || (kind != "I1" && kind != "I2" && kind != "gbm"))
        throw std::invalid_argument("unknown preset '" + name + "'");
    if (kind == "I2") {
        p.outliers = true;
        p.s2 = 0.1;
        if (desk) {
            p.min_outlier_fraction = 0.08;
            p.max_outlier_fraction = 0.13;
        }
    } else if (kind == "gbm") {
        p.bilinear = true;
    }
    return p;
}

/// Generates the image for a preset from a single seed.
inline SyntheticImage generate(const Preset& p, std::uint64_t seed) {
    Rng rng(seed);
    const Matrix m = synthetic_endmembers(p.bands, p.r);
    const int n = p.height * p.width;
    const Matrix a = gen_abundances(p.r, n, rng);
    if (p.bilinear) {
        const LabelMatrix mask = quadrant_mask(p.height, p.width);
        const Matrix gamma = Matrix::Ones(bilinear_pairs(p.r), n);
        Matrix clean = m * a;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!mask(0, j)) continue;
            for (int i = 0; i < p.r - 1; ++i)
                for (int k = i + 1; k < p.r; ++k) clean.col(j) += a(i, j) * a(k, j) * m.col(i).cwiseProduct(m.col(k));
        }
        const Vector sigma2 = Vector::Constant(p.bands, noise_variance_for_snr(clean, p.snr_db));
        return gen_gbm_image(p.height, p.width, m, a, gamma, sigma2, mask, rng);
    }
    LabelMatrix labels = LabelMatrix::Zero(p.bands, n);
    if (p.outliers) {
        labels = gen_outlier_support_in_range(p.height, p.width, p.bands, p.beta, rng, p.min_outlier_fraction,
                                              p.max_outlier_fraction, p.support_sweeps)
                     .labels();
    }
    return gen_linear_image(p.height, p.width, m, a, labels, p.s2, Vector::Constant(p.bands, p.sigma2), rng);
}

}  // namespace rblu
