#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "rblu/error.hpp"

namespace rblu {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using LabelMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Absolute tolerance on the abundance sum-to-one constraint.
inline constexpr double kSimplexTolerance = 1e-10;

/// Observed reflectance cube: L bands by N = H*W pixels.
///
/// Pixel n sits at spatial position (n / W, n % W); every map export and
/// every neighbourhood computation in the library uses this row-major
/// convention.
class HsiCube {
public:
    HsiCube() = default;

    HsiCube(int height, int width, Matrix data) : height_(height), width_(width), data_(std::move(data)) {
        if (height <= 0 || width <= 0) throw DataError("HsiCube: height and width must be positive");
        if (data_.rows() <= 0) throw DataError("HsiCube: cube needs at least one band");
        detail::require_dims(data_.cols() == static_cast<Eigen::Index>(height) * width, "HsiCube data",
                             "expected " + std::to_string(static_cast<long>(height) * width) + " pixel columns, got " +
                                 std::to_string(data_.cols()));
        if (!data_.allFinite()) throw DataError("HsiCube: data contains non-finite entries");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int bands() const { return static_cast<int>(data_.rows()); }
    int pixels() const { return static_cast<int>(data_.cols()); }
    const Matrix& data() const { return data_; }

    int pixel_index(int row, int col) const { return row * width_ + col; }

private:
    int height_ = 0;
    int width_ = 0;
    Matrix data_;
};

/// Sparse additive deviation from the linear model, factored as labels
/// (where) times values (how much).
struct OutlierField {
    LabelMatrix labels;  // Z, L x N, entries 0/1
    Matrix values;       // X, L x N

    OutlierField() = default;
    OutlierField(LabelMatrix z, Matrix x) : labels(std::move(z)), values(std::move(x)) {
        detail::require_dims(labels.rows() == values.rows() && labels.cols() == values.cols(), "OutlierField",
                             "labels " + detail::shape(labels.rows(), labels.cols()) + " vs values " +
                                 detail::shape(values.rows(), values.cols()));
    }

    static OutlierField none(Eigen::Index bands, Eigen::Index pixels) {
        return {LabelMatrix::Zero(bands, pixels), Matrix::Zero(bands, pixels)};
    }

    /// R = Z .* X
    Matrix dense() const { return labels.cast<double>().cwiseProduct(values); }
};

struct NoiseModel {
    Vector sigma2;       // per-band noise variances
    double s2 = 0.01;    // outlier value variance
};

/// Fixed model hyperparameters: endmember prior variance and the
/// inverse-Gamma shape/scale on the outlier variance.
struct Hyperparams {
    double xi = 1e3;
    double gamma = 1e-3;
    double nu = 1e-3;

    void validate() const {
        if (!(xi > 0) || !(gamma > 0) || !(nu > 0))
            throw std::invalid_argument("Hyperparams: xi, gamma and nu must be strictly positive");
    }
};

inline void validate_endmembers(const Matrix& m) {
    if (!m.allFinite()) throw DataError("endmembers: non-finite entries");
    if ((m.array() < 0.0).any()) throw DataError("endmembers: negative entries outside the prior support");
}

inline void validate_abundances(const Matrix& a, double tol = kSimplexTolerance) {
    if (!a.allFinite()) throw DataError("abundances: non-finite entries");
    if ((a.array() < 0.0).any()) throw DataError("abundances: negative entries");
    for (Eigen::Index n = 0; n < a.cols(); ++n) {
        if (std::abs(a.col(n).sum() - 1.0) > tol)
            throw DataError("abundances: column " + std::to_string(n) + " does not sum to one");
    }
}

/// Free coordinates C (first R-1 rows) to full abundances A.
inline Matrix abundances_from_coords(const Matrix& coords) {
    Matrix a(coords.rows() + 1, coords.cols());
    a.topRows(coords.rows()) = coords;
    a.row(coords.rows()) = (1.0 - coords.colwise().sum().array()).matrix();
    return a;
}

}  // namespace rblu
