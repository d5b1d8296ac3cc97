#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rblu/random.hpp"
#include "rblu/types.hpp"

namespace rblu {

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal upper tail, 1 - Phi(x), without cancellation for large x.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Standard normal quantile.
///
/// Acklam's rational approximation (relative error 1.15e-9) followed by one
/// Halley step against erfc, which brings the result to near machine
/// precision over (1e-300, 1 - 1e-16).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("normal_quantile: probability outside [0, 1]");
    }
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01, -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement. In the lower half the error term is formed from the
    // CDF directly; in the upper half from the survival function so that it
    // stays accurate when p is close to one.
    const double e = x <= 0.0 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    if (std::isfinite(u)) x -= u / (1.0 + 0.5 * x * u);
    return x;
}

struct TruncatedNormalSpec {
    double mu = 0.0;
    double sigma = 1.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(sigma > 0) || !std::isfinite(sigma))
            throw std::invalid_argument("truncated normal: sigma must be positive and finite");
        if (!std::isfinite(mu)) throw std::invalid_argument("truncated normal: mu must be finite");
        if (!(lower < upper)) throw std::invalid_argument("truncated normal: empty interval");
    }
};

namespace detail {

/// Standard normal restricted to [a, b] with a > 0, via a translated
/// exponential proposal (rate tuned for the left edge), itself truncated to
/// the interval by inversion.
inline double std_truncnorm_tail(double a, double b, Rng& rng) {
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    const double width = b - a;
    const double mass = std::isfinite(width) ? -std::expm1(-rate * width) : 1.0;
    for (;;) {
        const double z = a - std::log1p(-rng.uniform() * mass) / rate;
        const double d = z - rate;
        if (rng.uniform() <= std::exp(-0.5 * d * d)) return std::min(z, b);
    }
}

/// Standard normal restricted to [a, b] by CDF inversion. Works on the side
/// of the origin where the tail probabilities are small so that precision
/// is kept.
inline double std_truncnorm_inverse(double a, double b, Rng& rng) {
    const double u = rng.uniform();
    double x;
    if (a >= 0.0) {
        const double qa = normal_sf(a);
        const double qb = normal_sf(b);
        x = -normal_quantile(qa - u * (qa - qb));
    } else {
        const double pa = normal_cdf(a);
        const double pb = normal_cdf(b);
        x = normal_quantile(pa + u * (pb - pa));
    }
    if (!std::isfinite(x) && std::isfinite(a) && std::isfinite(b)) x = a + u * (b - a);
    return std::clamp(x, a, b);
}

}  // namespace detail

/// One draw from N(mu, sigma^2) restricted to [lower, upper].
///
/// CDF inversion when the interval reaches within two standard deviations
/// of the mean; exponential-proposal rejection for far-tail intervals.
inline double sample_truncnorm(const TruncatedNormalSpec& spec, Rng& rng) {
    spec.validate();
    const double a = (spec.lower - spec.mu) / spec.sigma;
    const double b = (spec.upper - spec.mu) / spec.sigma;
    constexpr double kTailSwitch = 2.0;
    double z;
    if (a > kTailSwitch)
        z = detail::std_truncnorm_tail(a, b, rng);
    else if (b < -kTailSwitch)
        z = -detail::std_truncnorm_tail(-b, -a, rng);
    else
        z = detail::std_truncnorm_inverse(a, b, rng);
    return std::clamp(spec.mu + spec.sigma * z, spec.lower, spec.upper);
}

namespace detail {

inline Matrix precision_from_covariance(const Matrix& cov) {
    detail::require_dims(cov.rows() == cov.cols(), "cov", "must be square");
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance is not symmetric positive-definite");
    return llt.solve(Matrix::Identity(cov.rows(), cov.cols()));
}

// Conditional of coordinate i of N(mean, Q^{-1}) given the others:
// variance 1/Q_ii, mean mean_i - (1/Q_ii) sum_{j != i} Q_ij (x_j - mean_j).
inline void conditional_moments(const Vector& mean, const Matrix& precision, const Vector& state, Eigen::Index i,
                                double& cmean, double& csd) {
    const double qii = precision(i, i);
    if (!(qii > 0)) throw NumericalError("precision matrix has a non-positive diagonal entry");
    double acc = precision.col(i).dot(state - mean) - qii * (state(i) - mean(i));
    cmean = mean(i) - acc / qii;
    csd = 1.0 / std::sqrt(qii);
}

}  // namespace detail

/// Coordinate-Gibbs sweeps for N(mean, precision^{-1}) restricted to the
/// positive orthant. `state` is the caller-held chain position (all >= 0)
/// and is advanced in place.
inline const Vector& positive_orthant_gibbs(const Vector& mean, const Matrix& precision, Vector& state, Rng& rng,
                                            int sweeps = 1) {
    const auto r = mean.size();
    detail::require_dims(precision.rows() == r && precision.cols() == r, "precision",
                         "expected " + detail::shape(r, r));
    detail::require_dims(state.size() == r, "state", "expected length " + std::to_string(r));
    if ((state.array() < 0.0).any() || !state.allFinite())
        throw std::invalid_argument("positive_orthant_gibbs: state outside the positive orthant");
    for (int s = 0; s < sweeps; ++s) {
        for (Eigen::Index i = 0; i < r; ++i) {
            double cm, cs;
            detail::conditional_moments(mean, precision, state, i, cm, cs);
            state(i) = sample_truncnorm({cm, cs, 0.0, std::numeric_limits<double>::infinity()}, rng);
        }
    }
    return state;
}

/// Covariance form of `positive_orthant_gibbs`.
inline const Vector& sample_positive_row(const Vector& mean, const Matrix& cov, Vector& state, Rng& rng,
                                         int sweeps = 1) {
    detail::require_dims(cov.rows() == mean.size() && cov.cols() == mean.size(), "cov",
                         "expected " + detail::shape(mean.size(), mean.size()));
    return positive_orthant_gibbs(mean, detail::precision_from_covariance(cov), state, rng, sweeps);
}

/// Slack kept between the coordinate sum and one, so that the implied last
/// abundance stays strictly positive.
inline constexpr double kSimplexSlack = 1e-15;

/// Coordinate-Gibbs sweeps for N(mean, precision^{-1}) restricted to the
/// simplex {c >= 0, sum c <= 1}. Coordinate r is drawn on
/// [0, 1 - sum_{j != r} c_j].
inline const Vector& simplex_gibbs(const Vector& mean, const Matrix& precision, Vector& state, Rng& rng,
                                   int sweeps = 1) {
    const auto r = mean.size();
    detail::require_dims(precision.rows() == r && precision.cols() == r, "precision",
                         "expected " + detail::shape(r, r));
    detail::require_dims(state.size() == r, "state", "expected length " + std::to_string(r));
    if (!state.allFinite() || (state.array() < 0.0).any() || state.sum() > 1.0 - kSimplexSlack)
        throw std::invalid_argument("simplex_gibbs: state outside the simplex");
    for (int s = 0; s < sweeps; ++s) {
        for (Eigen::Index i = 0; i < r; ++i) {
            const double rest = state.sum() - state(i);
            const double ub = 1.0 - kSimplexSlack - rest;
            if (!(ub > 0.0)) {
                state(i) = 0.0;
                continue;
            }
            double cm, cs;
            detail::conditional_moments(mean, precision, state, i, cm, cs);
            double v = sample_truncnorm({cm, cs, 0.0, ub}, rng);
            while (v > 0.0 && rest + v > 1.0 - kSimplexSlack) v = std::nextafter(v, 0.0);
            state(i) = v;
        }
    }
    return state;
}

/// Gibbs updates of the same simplex-truncated Gaussian along arbitrary
/// fixed directions (columns of `directions`): for each direction v the
/// state moves to c + t v with t drawn from its exact conditional, a 1D
/// truncated normal on the segment of the line inside the simplex.
inline const Vector& simplex_line_gibbs(const Vector& mean, const Matrix& precision, const Matrix& directions,
                                        Vector& state, Rng& rng) {
    const auto r = mean.size();
    detail::require_dims(directions.rows() == r, "directions", "expected " + std::to_string(r) + " rows");
    const double cap = 1.0 - kSimplexSlack;
    for (Eigen::Index k = 0; k < directions.cols(); ++k) {
        const Vector v = directions.col(k);
        const double curv = v.dot(precision * v);
        if (!(curv > 0)) continue;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < r; ++i) {
            if (v(i) > 0) lo = std::max(lo, -state(i) / v(i));
            if (v(i) < 0) hi = std::min(hi, -state(i) / v(i));
        }
        const double vs = v.sum();
        const double room = cap - state.sum();
        if (vs > 0) hi = std::min(hi, room / vs);
        if (vs < 0) lo = std::max(lo, room / vs);
        lo = std::min(lo, 0.0);
        hi = std::max(hi, 0.0);
        if (!(hi > lo)) continue;
        const double centre = -v.dot(precision * (state - mean)) / curv;
        double t = sample_truncnorm({centre, 1.0 / std::sqrt(curv), lo, hi}, rng);
        // rounding can push the endpoint a hair outside; step back towards 0
        Vector next = state + t * v;
        for (int guard = 0; guard < 64 && ((next.array() < 0.0).any() || next.sum() > cap); ++guard) {
            t *= 1.0 - 1e-12;
            next = state + t * v;
        }
        if ((next.array() < 0.0).any() || next.sum() > cap) next = (next.cwiseMax(0.0)).eval();
        if (next.sum() <= cap) state = next;
    }
    return state;
}

/// Covariance form of `simplex_gibbs`.
inline const Vector& sample_simplex_gaussian(const Vector& mean, const Matrix& cov, Vector& state, Rng& rng,
                                             int sweeps = 1) {
    detail::require_dims(cov.rows() == mean.size() && cov.cols() == mean.size(), "cov",
                         "expected " + detail::shape(mean.size(), mean.size()));
    return simplex_gibbs(mean, detail::precision_from_covariance(cov), state, rng, sweeps);
}

/// Draw from IG(shape, scale), density proportional to x^{-shape-1} exp(-scale/x).
inline double sample_inverse_gamma(double shape, double scale, Rng& rng) {
    if (!(shape > 0) || !(scale > 0) || !std::isfinite(shape) || !std::isfinite(scale))
        throw std::invalid_argument("inverse gamma: shape and scale must be positive");
    for (;;) {
        const double g = rng.gamma(shape);
        if (g > 0.0) return scale / g;
    }
}

}  // namespace rblu
