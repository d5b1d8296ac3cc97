#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rblu/types.hpp"

namespace rblu {

/// Noise-free linear mixture plus outliers: M A + Z .* X.
inline Matrix forward_mix(const Matrix& endmembers, const Matrix& abundances, const OutlierField& outliers) {
    detail::require_dims(endmembers.cols() == abundances.rows(), "abundances",
                         "expected " + std::to_string(endmembers.cols()) + " rows, got " +
                             std::to_string(abundances.rows()));
    detail::require_dims(outliers.labels.rows() == endmembers.rows() && outliers.labels.cols() == abundances.cols(),
                         "outliers",
                         "expected " + detail::shape(endmembers.rows(), abundances.cols()) + ", got " +
                             detail::shape(outliers.labels.rows(), outliers.labels.cols()));
    return endmembers * abundances + outliers.dense();
}

/// Root normalised mean square error between abundance matrices.
inline double rnmse(const Matrix& estimate, const Matrix& truth) {
    detail::require_dims(estimate.rows() == truth.rows() && estimate.cols() == truth.cols(), "A_hat",
                         detail::shape(estimate.rows(), estimate.cols()) + " vs truth " +
                             detail::shape(truth.rows(), truth.cols()));
    if (truth.size() == 0) return 0.0;
    return std::sqrt((estimate - truth).squaredNorm() / static_cast<double>(truth.size()));
}

/// Spectral angle between two spectra, in radians.
inline double sam(const Vector& estimate, const Vector& truth) {
    detail::require_dims(estimate.size() == truth.size(), "m_hat",
                         std::to_string(estimate.size()) + " bands vs " + std::to_string(truth.size()));
    const double ne = estimate.norm();
    const double nt = truth.norm();
    if (!(ne > 0) || !(nt > 0)) throw DataError("sam: angle undefined for a zero-norm spectrum");
    const double c = std::clamp(estimate.dot(truth) / (ne * nt), -1.0, 1.0);
    return std::acos(c);
}

/// Column assignment of estimated endmembers to true endmembers.
/// `truth_to_estimate[r]` is the estimated column matched to true column r.
struct EndmemberMatch {
    std::vector<int> truth_to_estimate;
    std::vector<double> angles;  // SAM of each matched pair, indexed by true column

    double mean_angle() const {
        double s = 0;
        for (double a : angles) s += a;
        return angles.empty() ? 0.0 : s / static_cast<double>(angles.size());
    }
};

/// Greedy minimal-angle matching: repeatedly pair the globally closest
/// (estimate, truth) columns among those still unmatched.
inline EndmemberMatch match_endmembers(const Matrix& estimate, const Matrix& truth) {
    detail::require_dims(estimate.rows() == truth.rows() && estimate.cols() == truth.cols(), "M_hat",
                         detail::shape(estimate.rows(), estimate.cols()) + " vs truth " +
                             detail::shape(truth.rows(), truth.cols()));
    const auto r = static_cast<int>(truth.cols());
    Matrix angle(r, r);  // (estimate, truth)
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) angle(i, j) = sam(estimate.col(i), truth.col(j));

    EndmemberMatch out;
    out.truth_to_estimate.assign(r, -1);
    out.angles.assign(r, 0.0);
    std::vector<bool> used_est(r, false);
    for (int k = 0; k < r; ++k) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        for (int i = 0; i < r; ++i) {
            if (used_est[i]) continue;
            for (int j = 0; j < r; ++j) {
                if (out.truth_to_estimate[j] >= 0) continue;
                if (angle(i, j) < best) {
                    best = angle(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        used_est[bi] = true;
        out.truth_to_estimate[bj] = bi;
        out.angles[bj] = best;
    }
    return out;
}

/// Reorder the rows of an estimated abundance matrix so that row r refers
/// to true endmember r.
inline Matrix align_abundances(const Matrix& estimate, const EndmemberMatch& match) {
    Matrix out(estimate.rows(), estimate.cols());
    for (std::size_t r = 0; r < match.truth_to_estimate.size(); ++r)
        out.row(static_cast<Eigen::Index>(r)) = estimate.row(match.truth_to_estimate[r]);
    return out;
}

/// Per-pixel Euclidean norm of y_n - M a_n - r_n.
inline Vector reconstruction_error(const HsiCube& cube, const Matrix& endmembers, const Matrix& abundances,
                                   const OutlierField& outliers) {
    const Matrix fit = forward_mix(endmembers, abundances, outliers);
    detail::require_dims(fit.rows() == cube.bands() && fit.cols() == cube.pixels(), "model",
                         detail::shape(fit.rows(), fit.cols()) + " vs cube " +
                             detail::shape(cube.bands(), cube.pixels()));
    return (cube.data() - fit).colwise().norm().transpose();
}

/// 2x2 detection table indexed [estimated][true].
struct Confusion {
    std::array<std::array<std::int64_t, 2>, 2> counts{};

    std::int64_t tn() const { return counts[0][0]; }
    std::int64_t fn() const { return counts[0][1]; }
    std::int64_t fp() const { return counts[1][0]; }
    std::int64_t tp() const { return counts[1][1]; }
    std::int64_t total() const { return tn() + fn() + fp() + tp(); }

    double tpr() const { return tp() + fn() > 0 ? double(tp()) / double(tp() + fn()) : 0.0; }
    double fpr() const { return fp() + tn() > 0 ? double(fp()) / double(fp() + tn()) : 0.0; }
};

inline Confusion detection_confusion(const LabelMatrix& estimate, const LabelMatrix& truth) {
    detail::require_dims(estimate.rows() == truth.rows() && estimate.cols() == truth.cols(), "Z_hat",
                         detail::shape(estimate.rows(), estimate.cols()) + " vs truth " +
                             detail::shape(truth.rows(), truth.cols()));
    Confusion c;
    for (Eigen::Index j = 0; j < truth.cols(); ++j)
        for (Eigen::Index i = 0; i < truth.rows(); ++i) ++c.counts[estimate(i, j) != 0][truth(i, j) != 0];
    return c;
}

/// Area under the ROC curve of `scores` against binary `positive` labels,
/// with ties counted as one half (Mann-Whitney form).
inline double roc_auc(const Vector& scores, const std::vector<bool>& positive) {
    detail::require_dims(static_cast<std::size_t>(scores.size()) == positive.size(), "positive",
                         "size differs from scores");
    std::vector<std::pair<double, bool>> s;
    s.reserve(positive.size());
    for (std::size_t i = 0; i < positive.size(); ++i) s.emplace_back(scores(static_cast<Eigen::Index>(i)), positive[i]);
    std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum = 0;
    std::int64_t npos = 0;
    for (std::size_t i = 0; i < s.size();) {
        std::size_t j = i;
        while (j < s.size() && s[j].first == s[i].first) ++j;
        const double mid_rank = 0.5 * (double(i + 1) + double(j));
        for (std::size_t k = i; k < j; ++k)
            if (s[k].second) {
                rank_sum += mid_rank;
                ++npos;
            }
        i = j;
    }
    const auto nneg = static_cast<std::int64_t>(s.size()) - npos;
    if (npos == 0 || nneg == 0) return 0.5;
    return (rank_sum - 0.5 * double(npos) * double(npos + 1)) / (double(npos) * double(nneg));
}

}  // namespace rblu
