#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rblu/random.hpp"
#include "rblu/types.hpp"

namespace rblu {

struct FclsOptions {
    double delta = 1e3;         // weight of the appended sum-to-one row
    int max_iterations = 500;   // active-set iterations per pixel
    double tolerance = 1e-10;

    void validate() const {
        if (!(delta > 0) || max_iterations <= 0 || !(tolerance > 0))
            throw std::invalid_argument("FclsOptions: all settings must be positive");
    }
};

/// Lawson-Hanson active-set non-negative least squares:
/// argmin ||A x - b|| subject to x >= 0.
inline Vector nnls(const Matrix& a, const Vector& b, int max_iterations = 500, double tolerance = 1e-10) {
    detail::require_dims(a.rows() == b.size(), "b", "expected length " + std::to_string(a.rows()));
    const auto n = a.cols();
    Vector x = Vector::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double scale = std::max(1.0, (a.transpose() * b).cwiseAbs().maxCoeff());
    const double tol = tolerance * scale;

    auto solve_passive = [&](Vector& s) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[j]) idx.push_back(j);
        Matrix ap(a.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
        const Vector sp = ap.colPivHouseholderQr().solve(b);
        s.setZero(n);
        for (std::size_t k = 0; k < idx.size(); ++k) s(idx[k]) = sp(static_cast<Eigen::Index>(k));
    };

    int iterations = 0;
    for (;;) {
        const Vector w = a.transpose() * (b - a * x);
        Eigen::Index best = -1;
        double wmax = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[j] && w(j) > wmax) {
                wmax = w(j);
                best = j;
            }
        if (best < 0) break;
        passive[best] = true;

        Vector s;
        for (;;) {
            if (++iterations > max_iterations) throw NumericalError("nnls: active-set iteration limit reached");
            solve_passive(s);
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[j] && s(j) <= 0) feasible = false;
            if (feasible) break;
            double alpha = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[j] && s(j) <= 0) alpha = std::min(alpha, x(j) / (x(j) - s(j)));
            x += alpha * (s - x);
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[j] && x(j) <= tol * 1e-3) {
                    passive[j] = false;
                    x(j) = 0;
                }
        }
        x = s;
    }
    return x;
}

/// Fully constrained least squares per pixel: non-negative abundances
/// summing to one. Solved as NNLS on [M; delta 1^T] x = [y; delta], then
/// renormalised so the sum is exact.
inline Matrix fcls(const Matrix& pixels, const Matrix& endmembers, const FclsOptions& opts = {}) {
    opts.validate();
    detail::require_dims(pixels.rows() == endmembers.rows(), "endmembers",
                         "expected " + std::to_string(pixels.rows()) + " bands, got " +
                             std::to_string(endmembers.rows()));
    const auto l = endmembers.rows();
    const auto r = endmembers.cols();
    if (r == 0 || Eigen::ColPivHouseholderQR<Matrix>(endmembers).rank() < r)
        throw NumericalError("fcls: endmember matrix is rank deficient");

    Matrix aug(l + 1, r);
    aug.topRows(l) = endmembers;
    aug.row(l).setConstant(opts.delta);
    Matrix out(r, pixels.cols());
    Vector rhs(l + 1);
    for (Eigen::Index n = 0; n < pixels.cols(); ++n) {
        rhs.head(l) = pixels.col(n);
        rhs(l) = opts.delta;
        Vector a = nnls(aug, rhs, opts.max_iterations, opts.tolerance).cwiseMax(0.0);
        const double s = a.sum();
        if (!(s > 0)) throw NumericalError("fcls: pixel " + std::to_string(n) + " has an all-zero solution");
        out.col(n) = a / s;
    }
    return out;
}

inline Matrix fcls(const HsiCube& cube, const Matrix& endmembers, const FclsOptions& opts = {}) {
    return fcls(cube.data(), endmembers, opts);
}

/// FCLS with the true endmembers supplied: the oracle baseline.
struct OracleFclsResult {
    Matrix abundances;
    bool oracle_endmembers = true;
};

inline OracleFclsResult o_fcls(const HsiCube& cube, const Matrix& true_endmembers, const FclsOptions& opts = {}) {
    return {fcls(cube, true_endmembers, opts), true};
}

struct VcaDiagnostics {
    double snr_db = 0;
    bool low_snr_branch = false;
    std::vector<int> indices;
};

/// Vertex component analysis.
///
/// Projects the data onto a dominant subspace, then picks R pixels one at a
/// time, each the extreme point along a random direction orthogonal to the
/// vertices found so far. The subspace depends on an SNR estimate: above
/// 15 + 10 log10(R) dB the data is projected onto R uncentred principal
/// directions and rescaled projectively; below it onto R-1 centred
/// directions with a constant lift. Returns the selected pixels' projected
/// spectra clamped to be non-negative. `diag`, when given, receives the SNR
/// estimate, the branch taken and the selected pixel indices.
inline Matrix vca_init(const HsiCube& cube, int r, Rng& rng, VcaDiagnostics* diag = nullptr) {
    const Matrix& y = cube.data();
    const auto l = y.rows();
    const auto n = y.cols();
    if (r < 1) throw std::invalid_argument("vca_init: need at least one endmember");
    if (n < r || l < r)
        throw DimensionError("vca_init: need at least R pixels and R bands (R=" + std::to_string(r) + ")");

    const double dn = static_cast<double>(n);
    const Vector mean = y.rowwise().mean();
    const Matrix centred = y.colwise() - mean;
    Eigen::SelfAdjointEigenSolver<Matrix> ceig(centred * centred.transpose() / dn);
    Eigen::SelfAdjointEigenSolver<Matrix> ueig(y * y.transpose() / dn);
    if (ceig.info() != Eigen::Success || ueig.info() != Eigen::Success)
        throw NumericalError("vca_init: eigendecomposition failed");
    const double top = ueig.eigenvalues()(l - 1);
    if (!(top > 0)) throw NumericalError("vca_init: data is identically zero");
    if (r >= 2 && ueig.eigenvalues()(l - r) <= 1e-13 * top)
        throw NumericalError("vca_init: data rank below the requested number of endmembers");

    // eigenvalues ascend, so the dominant directions are the rightmost columns
    const double power_y = y.squaredNorm() / dn;
    const Matrix centred_basis = ceig.eigenvectors().rightCols(r);
    const double power_x = (centred_basis.transpose() * centred).squaredNorm() / dn + mean.squaredNorm();
    const double ratio = (power_x - static_cast<double>(r) / static_cast<double>(l) * power_y) / (power_y - power_x);
    const double snr_db = ratio > 0 ? 10.0 * std::log10(ratio) : -std::numeric_limits<double>::infinity();
    const double threshold = 15.0 + 10.0 * std::log10(static_cast<double>(r));
    const bool low_snr = r >= 2 && snr_db < threshold && std::isfinite(power_y - power_x) && power_y > power_x;

    Matrix projected;  // L x N, data restricted to the chosen subspace
    Matrix points;     // r x N, coordinates searched for extreme points
    if (low_snr) {
        const Matrix basis = ceig.eigenvectors().rightCols(r - 1);
        const Matrix x = basis.transpose() * centred;
        projected = (basis * x).colwise() + mean;
        const double lift = x.colwise().norm().maxCoeff();
        points.resize(r, n);
        points.topRows(r - 1) = x;
        points.row(r - 1).setConstant(lift > 0 ? lift : 1.0);
    } else {
        const Matrix basis = ueig.eigenvectors().rightCols(r);
        const Matrix x = basis.transpose() * y;
        projected = basis * x;
        const Vector u = x.rowwise().mean();
        points.resize(r, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            double d = x.col(j).dot(u);
            if (std::abs(d) < 1e-300) d = 1e-300;
            points.col(j) = x.col(j) / d;
        }
    }

    std::vector<int> chosen;
    if (r == 1) {
        // projective scaling is constant in one dimension; use the raw projection
        Eigen::Index idx;
        (ueig.eigenvectors().col(l - 1).transpose() * y).cwiseAbs().maxCoeff(&idx);
        chosen.push_back(static_cast<int>(idx));
    } else {
        Matrix vertices = Matrix::Zero(r, r);
        vertices(r - 1, 0) = 1.0;
        for (int i = 0; i < r; ++i) {
            Vector w(r);
            for (int k = 0; k < r; ++k) w(k) = rng.normal();
            const Matrix pinv = vertices.completeOrthogonalDecomposition().pseudoInverse();
            Vector f = w - vertices * (pinv * w);
            const double fn = f.norm();
            if (fn > 0) f /= fn;
            Eigen::Index idx;
            (f.transpose() * points).cwiseAbs().maxCoeff(&idx);
            vertices.col(i) = points.col(idx);
            chosen.push_back(static_cast<int>(idx));
        }
    }

    Matrix m(l, r);
    for (int i = 0; i < r; ++i) m.col(i) = projected.col(chosen[i]).cwiseMax(0.0);
    if (diag) *diag = {snr_db, low_snr, chosen};
    return m;
}

}  // namespace rblu
