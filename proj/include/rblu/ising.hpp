#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include "rblu/random.hpp"
#include "rblu/types.hpp"

namespace rblu {

/// Hyperparameters of the spatial-spectral Ising prior:
/// beta_N (spatial granularity), beta_L (spectral granularity) and beta_0
/// (outlier-absence weight; larger means fewer outliers).
struct IsingParams {
    double beta_N = 1.0;
    double beta_L = 1.0;
    double beta_0 = 0.5;

    void validate(double bound = std::numeric_limits<double>::infinity()) const {
        if (!(beta_N >= 0 && beta_N <= bound) || !(beta_L >= 0 && beta_L <= bound))
            throw std::invalid_argument("IsingParams: beta_N and beta_L must lie in [0, " + std::to_string(bound) + "]");
        if (!(beta_0 >= 0 && beta_0 <= 1)) throw std::invalid_argument("IsingParams: beta_0 must lie in [0, 1]");
    }

    bool operator==(const IsingParams&) const = default;
};

/// Binary label cube Z (bands x pixels) over an H x W grid.
///
/// Spatial neighbours: up/down/left/right within the grid, same band.
/// Spectral neighbours: bands l-1 and l+1, same pixel. Missing neighbours at
/// the edges are simply absent.
class LabelCube {
public:
    LabelCube() = default;

    LabelCube(int height, int width, int bands)
        : height_(height), width_(width), z_(LabelMatrix::Zero(bands, static_cast<Eigen::Index>(height) * width)) {
        check();
    }

    LabelCube(int height, int width, LabelMatrix z) : height_(height), width_(width), z_(std::move(z)) { check(); }

    int height() const { return height_; }
    int width() const { return width_; }
    int bands() const { return static_cast<int>(z_.rows()); }
    int pixels() const { return static_cast<int>(z_.cols()); }
    std::int64_t sites() const { return static_cast<std::int64_t>(z_.size()); }

    std::uint8_t operator()(int band, int pixel) const { return z_(band, pixel); }
    std::uint8_t& operator()(int band, int pixel) { return z_(band, pixel); }

    const LabelMatrix& labels() const { return z_; }
    LabelMatrix& labels() { return z_; }

    std::int64_t count_ones() const { return z_.cast<std::int64_t>().sum(); }

    /// Two-colouring by parity of (row + col + band); no site shares a colour
    /// with any of its neighbours.
    int color(int band, int pixel) const { return (pixel / width_ + pixel % width_ + band) & 1; }

    /// Number of spatial and spectral neighbours of (band, pixel) whose label
    /// equals `value`.
    void agreeing_neighbours(int band, int pixel, std::uint8_t value, int& spatial, int& spectral) const {
        const int row = pixel / width_;
        const int col = pixel % width_;
        spatial = 0;
        spectral = 0;
        if (row > 0) spatial += z_(band, pixel - width_) == value;
        if (row + 1 < height_) spatial += z_(band, pixel + width_) == value;
        if (col > 0) spatial += z_(band, pixel - 1) == value;
        if (col + 1 < width_) spatial += z_(band, pixel + 1) == value;
        if (band > 0) spectral += z_(band - 1, pixel) == value;
        if (band + 1 < bands()) spectral += z_(band + 1, pixel) == value;
    }

    bool operator==(const LabelCube& o) const {
        return height_ == o.height_ && width_ == o.width_ && z_.rows() == o.z_.rows() && z_ == o.z_;
    }

private:
    void check() const {
        if (height_ <= 0 || width_ <= 0) throw DataError("LabelCube: height and width must be positive");
        detail::require_dims(z_.cols() == static_cast<Eigen::Index>(height_) * width_, "LabelCube labels",
                             "expected " + std::to_string(static_cast<long>(height_) * width_) + " pixel columns");
        if ((z_.array() > 1).any()) throw DataError("LabelCube: labels must be 0 or 1");
    }

    int height_ = 1;
    int width_ = 1;
    LabelMatrix z_;
};

/// Agreement statistics of a label cube. Each unordered neighbour pair is
/// counted once per direction.
struct Potentials {
    std::int64_t phi_L = 0;
    std::int64_t phi_N = 0;
    std::int64_t n0 = 0;
    std::int64_t n1 = 0;
};

inline Potentials potentials(const LabelCube& z) {
    Potentials p;
    const int w = z.width();
    for (int n = 0; n < z.pixels(); ++n) {
        const int col = n % w;
        const int row = n / w;
        for (int l = 0; l < z.bands(); ++l) {
            const auto v = z(l, n);
            (v ? p.n1 : p.n0) += 1;
            // forward pairs only, doubled below
            if (col + 1 < w) p.phi_N += z(l, n + 1) == v;
            if (row + 1 < z.height()) p.phi_N += z(l, n + w) == v;
            if (l + 1 < z.bands()) p.phi_L += z(l + 1, n) == v;
        }
    }
    p.phi_N *= 2;
    p.phi_L *= 2;
    return p;
}

/// beta_N phi_N + beta_L phi_L + beta_0 n0 + (1 - beta_0) n1.
inline double log_unnormalized(const LabelCube& z, const IsingParams& params) {
    const Potentials p = potentials(z);
    return params.beta_N * double(p.phi_N) + params.beta_L * double(p.phi_L) + params.beta_0 * double(p.n0) +
           (1.0 - params.beta_0) * double(p.n1);
}

struct PriorLogits {
    double logit0 = 0;
    double logit1 = 0;

    double prob_one() const { return 1.0 / (1.0 + std::exp(logit0 - logit1)); }
};

/// Unnormalised log-conditionals of the two candidate labels at one site.
/// Each incident pair contributes twice because flipping the site changes
/// both directed copies of it.
inline PriorLogits local_prior_logits(const LabelCube& z, int band, int pixel, const IsingParams& params) {
    if (band < 0 || band >= z.bands() || pixel < 0 || pixel >= z.pixels())
        throw std::out_of_range("local_prior_logits: site (" + std::to_string(band) + ", " + std::to_string(pixel) +
                                ") out of range");
    int s0, l0, s1, l1;
    z.agreeing_neighbours(band, pixel, 0, s0, l0);
    z.agreeing_neighbours(band, pixel, 1, s1, l1);
    return {2.0 * (params.beta_N * s0 + params.beta_L * l0) + params.beta_0,
            2.0 * (params.beta_N * s1 + params.beta_L * l1) + (1.0 - params.beta_0)};
}

/// Visit every site of one colour with band in [band_begin, band_end).
template <class Fn>
void for_each_site_of_color(const LabelCube& z, int color, int band_begin, int band_end, Fn&& fn) {
    const int w = z.width();
    for (int n = 0; n < z.pixels(); ++n) {
        const int parity = (n / w + n % w) & 1;
        int l = band_begin + ((parity + band_begin + color) & 1);
        for (; l < band_end; l += 2) fn(l, n);
    }
}

/// One sweep of the prior alone: colour 0 sites, then colour 1 sites, each
/// redrawn from its local conditional.
inline void gibbs_sweep_colored(LabelCube& z, const IsingParams& params, Rng& rng) {
    for (int color = 0; color < 2; ++color) {
        for_each_site_of_color(z, color, 0, z.bands(), [&](int l, int n) {
            const PriorLogits lg = local_prior_logits(z, l, n, params);
            z(l, n) = rng.bernoulli(lg.prob_one()) ? 1 : 0;
        });
    }
}

/// Derivatives of log_unnormalized with respect to (beta_N, beta_L, beta_0).
struct GradStats {
    double phi_N = 0;
    double phi_L = 0;
    double g0 = 0;
};

inline GradStats grad_stats(const LabelCube& z) {
    const Potentials p = potentials(z);
    return {double(p.phi_N), double(p.phi_L), double(p.n0 - p.n1)};
}

/// Exact normaliser and per-site marginals P(z = 1) by enumeration.
struct ExactIsing {
    double log_partition = 0;
    Matrix marginals;  // bands x pixels
};

inline constexpr int kMaxEnumerableSites = 20;

inline ExactIsing enumerate_exact(int height, int width, int bands, const IsingParams& params) {
    const long sites = static_cast<long>(height) * width * bands;
    if (height <= 0 || width <= 0 || bands <= 0) throw std::invalid_argument("enumerate_exact: bad dimensions");
    if (sites > kMaxEnumerableSites)
        throw std::invalid_argument("enumerate_exact: lattice of " + std::to_string(sites) +
                                    " sites exceeds the enumeration budget");
    const int npix = height * width;
    LabelCube z(height, width, bands);
    const std::uint64_t configs = std::uint64_t{1} << sites;

    // Two passes: the max for a stable log-sum-exp, then the weighted sums.
    double max_log = -std::numeric_limits<double>::infinity();
    auto load = [&](std::uint64_t bits) {
        for (long s = 0; s < sites; ++s) z(static_cast<int>(s / npix), static_cast<int>(s % npix)) = (bits >> s) & 1U;
    };
    for (std::uint64_t c = 0; c < configs; ++c) {
        load(c);
        max_log = std::max(max_log, log_unnormalized(z, params));
    }
    double total = 0;
    Matrix ones = Matrix::Zero(bands, npix);
    for (std::uint64_t c = 0; c < configs; ++c) {
        load(c);
        const double w = std::exp(log_unnormalized(z, params) - max_log);
        total += w;
        for (long s = 0; s < sites; ++s)
            if ((c >> s) & 1U) ones(s / npix, s % npix) += w;
    }
    return {max_log + std::log(total), ones / total};
}

}  // namespace rblu
