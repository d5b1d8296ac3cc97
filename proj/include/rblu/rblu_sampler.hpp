#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "rblu/baselines.hpp"
#include "rblu/ising.hpp"
#include "rblu/random.hpp"
#include "rblu/samplers.hpp"
#include "rblu/types.hpp"

namespace rblu {

/// Steps of the sampler that can be held fixed, for reduced models and tests.
struct FrozenSteps {
    bool labels = false;
    bool endmembers = false;
    bool abundances = false;
    bool outlier_values = false;
    bool noise_variances = false;
    bool outlier_variance = false;
    bool beta = false;
};

struct SamplerConfig {
    int n_mc = 1000;             // total iterations
    int n_bi = 300;              // burn-in; also the adaptation window for beta'
    double beta_bound = 10.0;    // upper bound B_t on beta_N and beta_L
    int endmember_sweeps = 1;    // interior Gibbs sweeps per row of M
    int abundance_sweeps = 1;    // interior Gibbs sweeps per abundance vector
    bool abundance_eigen_moves = true;  // also update along the principal axes of the abundance conditional
    int aux_sweeps = 1;          // prior sweeps producing Z' for each beta' update
    bool per_site_beta_step = true;  // divide the beta' step by the number of label sites
    int ridge_proposals = 20;    // joint (M, A) moves per iteration; 0 disables them
    double ridge_scale = 0.002;  // size of the log-scale perturbation in those moves
    int thinning = 1;
    int threads = 1;             // 1 = sequential, bit-reproducible schedule
    std::uint64_t seed = 1;

    Hyperparams hyper;
    IsingParams beta_init{0.0, 0.0, 0.5};
    double s2_init = 0.01;
    FrozenSteps frozen;
    bool check_invariants = false;  // validate the full state after every iteration

    void validate() const {
        if (n_mc < 1 || n_bi < 0 || n_bi >= n_mc)
            throw std::invalid_argument("SamplerConfig: need 0 <= n_bi < n_mc");
        if (!(beta_bound > 0)) throw std::invalid_argument("SamplerConfig: beta_bound must be positive");
        if (endmember_sweeps < 1 || abundance_sweeps < 1 || aux_sweeps < 1 || thinning < 1 || threads < 1)
            throw std::invalid_argument("SamplerConfig: sweep counts, thinning and threads must be >= 1");
        if (ridge_proposals < 0 || !(ridge_scale > 0 && std::isfinite(ridge_scale)))
            throw std::invalid_argument("SamplerConfig: ridge_proposals must be >= 0 and ridge_scale positive");
        if (!(s2_init > 0)) throw std::invalid_argument("SamplerConfig: s2_init must be positive");
        hyper.validate();
        beta_init.validate(beta_bound);
    }
};

/// Step size of the stochastic-gradient beta' update at iteration t >= 1.
inline double beta_step_size(int t) { return std::pow(static_cast<double>(t), -0.75); }

inline constexpr double kVarianceFloor = 1e-12;

/// One coherent snapshot of every sampled quantity.
struct MixingState {
    Matrix endmembers;      // M, L x R
    Matrix coords;          // C, (R-1) x N
    Matrix outlier_values;  // X, L x N
    LabelCube labels;       // Z
    Vector noise_var;       // sigma^2, length L
    double outlier_var = 0.01;
    IsingParams beta;
    int iteration = 0;

    Matrix abundances() const { return abundances_from_coords(coords); }
    OutlierField outliers() const { return {labels.labels(), outlier_values}; }
    Matrix outlier_matrix() const { return labels.labels().cast<double>().cwiseProduct(outlier_values); }

    void check_invariants(double beta_bound) const {
        validate_endmembers(endmembers);
        if (!coords.allFinite() || (coords.array() < 0.0).any() ||
            (coords.colwise().sum().array() > 1.0).any())
            throw DataError("MixingState: abundance coordinates left the simplex");
        if (!(noise_var.array() > 0.0).all()) throw DataError("MixingState: non-positive noise variance");
        if (!(outlier_var > 0)) throw DataError("MixingState: non-positive outlier variance");
        if (!outlier_values.allFinite()) throw DataError("MixingState: non-finite outlier values");
        beta.validate(beta_bound);
    }
};

namespace detail {

/// Run body(begin, end, rng) over [0, count). With one thread the caller's
/// generator is used directly; otherwise each chunk gets a child stream
/// split from a seed drawn from the caller's generator, so results depend
/// only on the seed and the thread count.
template <class Body>
void parallel_chunks(Eigen::Index count, int threads, Rng& rng, Body&& body) {
    if (threads <= 1 || count < 2) {
        body(Eigen::Index{0}, count, rng);
        return;
    }
    const Rng root(rng.next_u64());
    const auto chunks = std::min<Eigen::Index>(threads, count);
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (Eigen::Index k = 0; k < chunks; ++k) {
        const Eigen::Index begin = count * k / chunks;
        const Eigen::Index end = count * (k + 1) / chunks;
        pool.emplace_back([&, k, begin, end] {
            Rng local = root.split(static_cast<std::uint64_t>(k));
            try {
                body(begin, end, local);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

inline void check_data(const MixingState& s, const Matrix& y) {
    require_dims(s.endmembers.rows() == y.rows(), "endmembers",
                 "expected " + std::to_string(y.rows()) + " bands, got " + std::to_string(s.endmembers.rows()));
    require_dims(s.coords.cols() == y.cols() && s.coords.rows() + 1 == s.endmembers.cols(), "coords",
                 "expected " + shape(s.endmembers.cols() - 1, y.cols()) + ", got " +
                     shape(s.coords.rows(), s.coords.cols()));
    require_dims(s.labels.bands() == y.rows() && s.labels.pixels() == y.cols(), "labels",
                 "expected " + shape(y.rows(), y.cols()));
    require_dims(s.outlier_values.rows() == y.rows() && s.outlier_values.cols() == y.cols(), "outlier values",
                 "expected " + shape(y.rows(), y.cols()));
    require_dims(s.noise_var.size() == y.rows(), "noise variances", "expected length " + std::to_string(y.rows()));
}

}  // namespace detail

/// Gaussian conditional in precision form, before any truncation.
struct GaussianConditional {
    Vector mean;
    Matrix precision;

    Matrix covariance() const { return precision.llt().solve(Matrix::Identity(precision.rows(), precision.cols())); }
};

/// Conditional of row `band` of M: precision sigma_l^{-2} A A^T + xi^{-1} I,
/// mean = precision^{-1} sigma_l^{-2} A (y_l - r_l)^T. Truncated to the
/// positive orthant when sampled.
inline GaussianConditional endmember_row_conditional(const MixingState& s, const Matrix& y, int band,
                                                     const Hyperparams& hyper) {
    detail::check_data(s, y);
    const Matrix a = s.abundances();
    const double inv = 1.0 / s.noise_var(band);
    const RowVector ytilde = y.row(band) - s.outlier_matrix().row(band);
    GaussianConditional g;
    g.precision = inv * (a * a.transpose());
    g.precision.diagonal().array() += 1.0 / hyper.xi;
    g.mean = g.precision.llt().solve(inv * (a * ytilde.transpose()));
    return g;
}

/// Conditional of the free abundance coordinates of pixel n after
/// substituting a_R = 1 - sum c: with D = [m_1 - m_R, ..., m_{R-1} - m_R],
/// precision D^T Sigma^{-1} D and mean precision^{-1} D^T Sigma^{-1}
/// (y_n - r_n - m_R). Truncated to the simplex when sampled.
inline GaussianConditional abundance_conditional(const MixingState& s, const Matrix& y, int pixel) {
    detail::check_data(s, y);
    const auto r = s.endmembers.cols();
    const Matrix d = s.endmembers.leftCols(r - 1).colwise() - s.endmembers.col(r - 1);
    const Vector w = s.noise_var.cwiseInverse();
    const Vector ybar = y.col(pixel) - s.outlier_matrix().col(pixel) - s.endmembers.col(r - 1);
    GaussianConditional g;
    g.precision = d.transpose() * w.asDiagonal() * d;
    g.mean = g.precision.llt().solve(d.transpose() * w.asDiagonal() * ybar);
    return g;
}

/// Redraw every label from its two-point conditional: Gaussian likelihood
/// of the site with and without its outlier value, plus the local Ising
/// logit. Colour 0 then colour 1; sites of one colour are independent.
inline void sample_labels(MixingState& s, const Matrix& y, Rng& rng, const SamplerConfig& cfg = {}) {
    detail::check_data(s, y);
    const Matrix fit = s.endmembers * s.abundances();
    LabelCube& z = s.labels;
    for (int color = 0; color < 2; ++color) {
        detail::parallel_chunks(z.bands(), cfg.threads, rng, [&](Eigen::Index b, Eigen::Index e, Rng& r) {
            for_each_site_of_color(z, color, static_cast<int>(b), static_cast<int>(e), [&](int l, int n) {
                const double resid = y(l, n) - fit(l, n);
                const double dev = resid - s.outlier_values(l, n);
                const double half_prec = 0.5 / s.noise_var(l);
                const PriorLogits lg = local_prior_logits(z, l, n, s.beta);
                const double w0 = lg.logit0 - resid * resid * half_prec;
                const double w1 = lg.logit1 - dev * dev * half_prec;
                z(l, n) = r.bernoulli(1.0 / (1.0 + std::exp(w0 - w1))) ? 1 : 0;
            });
        });
    }
}

/// Redraw each row of M from its positive-orthant truncated Gaussian
/// conditional. Rows are independent given the rest.
inline void sample_endmembers(MixingState& s, const Matrix& y, Rng& rng, const SamplerConfig& cfg = {}) {
    detail::check_data(s, y);
    const Matrix a = s.abundances();
    const Matrix aat = a * a.transpose();
    const Matrix yat = (y - s.outlier_matrix()) * a.transpose();  // L x R
    const double ridge = 1.0 / cfg.hyper.xi;
    detail::parallel_chunks(y.rows(), cfg.threads, rng, [&](Eigen::Index b, Eigen::Index e, Rng& g) {
        for (Eigen::Index l = b; l < e; ++l) {
            const double inv = 1.0 / s.noise_var(l);
            Matrix prec = inv * aat;
            prec.diagonal().array() += ridge;
            Eigen::LLT<Matrix> llt(prec);
            if (llt.info() != Eigen::Success)
                throw NumericalError("sample_endmembers: conditional precision of band " + std::to_string(l) +
                                     " is not positive-definite (degenerate abundances)");
            const Vector mean = llt.solve(inv * yat.row(l).transpose());
            Vector row = s.endmembers.row(l).transpose();
            positive_orthant_gibbs(mean, prec, row, g, cfg.endmember_sweeps);
            s.endmembers.row(l) = row.transpose();
        }
    });
}

/// Redraw each pixel's free abundance coordinates from the simplex-truncated
/// Gaussian conditional: coordinate sweeps, then (optionally) one pass along
/// the eigenvectors of the conditional precision, which moves freely along
/// poorly determined combinations. Pixels are independent given the rest.
inline void sample_abundances(MixingState& s, const Matrix& y, Rng& rng, const SamplerConfig& cfg = {}) {
    detail::check_data(s, y);
    const auto r = s.endmembers.cols();
    if (r < 2) throw std::invalid_argument("sample_abundances: need at least two endmembers");
    const Matrix d = s.endmembers.leftCols(r - 1).colwise() - s.endmembers.col(r - 1);
    const Vector w = s.noise_var.cwiseInverse();
    const Matrix g = d.transpose() * w.asDiagonal();  // (R-1) x L
    const Matrix prec = g * d;
    Eigen::LLT<Matrix> llt(prec);
    const Vector piv = llt.matrixLLT().diagonal();
    if (llt.info() != Eigen::Success || !(piv.minCoeff() > 1e-8 * piv.maxCoeff()))
        throw NumericalError("sample_abundances: endmember differences are rank deficient (degenerate geometry)");
    Matrix ybar = y - s.outlier_matrix();
    ybar.colwise() -= s.endmembers.col(r - 1);
    const Matrix means = llt.solve(g * ybar);
    Matrix axes;
    if (cfg.abundance_eigen_moves && r > 2) axes = Eigen::SelfAdjointEigenSolver<Matrix>(prec).eigenvectors();
    detail::parallel_chunks(y.cols(), cfg.threads, rng, [&](Eigen::Index b, Eigen::Index e, Rng& gen) {
        Vector c;
        for (Eigen::Index n = b; n < e; ++n) {
            c = s.coords.col(n);
            simplex_gibbs(means.col(n), prec, c, gen, cfg.abundance_sweeps);
            if (axes.size() > 0) simplex_line_gibbs(means.col(n), prec, axes, c, gen);
            s.coords.col(n) = c;
        }
    });
}

/// Metropolis moves along the directions that leave M A unchanged:
/// M' = M T, A' = T^{-1} A with T = exp(eps G), columns of G summing to zero
/// so that T preserves sum-to-one. Returns the number accepted.
inline int ridge_moves(MixingState& s, const Matrix& y, Rng& rng, int proposals, double scale,
                       const Hyperparams& hyper = {}) {
    detail::check_data(s, y);
    const auto r = s.endmembers.cols();
    const auto n = y.cols();
    const double dim_gap = static_cast<double>(s.endmembers.rows()) - static_cast<double>(n);
    const Matrix target = y - s.outlier_matrix();
    const Vector w = s.noise_var.cwiseInverse();
    auto misfit = [&](const Matrix& m, const Matrix& a) {
        return 0.5 * ((target - m * a).array().square().colwise() * w.array()).sum();
    };
    Matrix a = s.abundances();
    double current = misfit(s.endmembers, a);
    int accepted = 0;
    for (int k = 0; k < proposals; ++k) {
        Matrix g(r, r);
        for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.normal();
        g.rowwise() -= g.colwise().mean();
        g *= scale;
        const Matrix t = g.exp();
        const Matrix m_new = s.endmembers * t;
        const Matrix a_new = (-g).exp() * a;
        const Matrix c_new = a_new.topRows(r - 1);
        const double log_u = std::log(rng.uniform());
        if ((m_new.array() < 0.0).any() || (c_new.array() < 0.0).any() ||
            (c_new.colwise().sum().array() > 1.0 - kSimplexSlack).any())
            continue;
        const double proposed = misfit(m_new, a_new);
        const double log_ratio = current - proposed + dim_gap * g.trace() -
                                 0.5 / hyper.xi * (m_new.squaredNorm() - s.endmembers.squaredNorm());
        if (log_u < log_ratio) {
            s.endmembers = m_new;
            s.coords = c_new;
            a = a_new;
            current = proposed;
            ++accepted;
        }
    }
    return accepted;
}

/// Redraw every outlier value: N(0, s^2) where z = 0, otherwise the
/// conjugate posterior around the linear-model residual.
inline void sample_outlier_values(MixingState& s, const Matrix& y, Rng& rng, const SamplerConfig& cfg = {}) {
    detail::check_data(s, y);
    const Matrix fit = s.endmembers * s.abundances();
    const double s2 = s.outlier_var;
    const double prior_sd = std::sqrt(s2);
    detail::parallel_chunks(y.cols(), cfg.threads, rng, [&](Eigen::Index b, Eigen::Index e, Rng& g) {
        for (Eigen::Index n = b; n < e; ++n) {
            for (Eigen::Index l = 0; l < y.rows(); ++l) {
                if (s.labels(static_cast<int>(l), static_cast<int>(n)) == 0) {
                    s.outlier_values(l, n) = prior_sd * g.normal();
                } else {
                    const double sig2 = s.noise_var(l);
                    const double var = sig2 * s2 / (sig2 + s2);
                    const double mean = (y(l, n) - fit(l, n)) * var / sig2;
                    s.outlier_values(l, n) = mean + std::sqrt(var) * g.normal();
                }
            }
        }
    });
}

/// sigma_l^2 ~ IG(N/2, ||y_l - m_l A - r_l||^2 / 2), independently per band.
inline void sample_noise_variances(MixingState& s, const Matrix& y, Rng& rng) {
    detail::check_data(s, y);
    if (y.cols() < 3) throw std::invalid_argument("sample_noise_variances: need at least 3 pixels");
    const Matrix resid = y - s.endmembers * s.abundances() - s.outlier_matrix();
    const double shape = 0.5 * static_cast<double>(y.cols());
    for (Eigen::Index l = 0; l < y.rows(); ++l) {
        const double scale = std::max(0.5 * resid.row(l).squaredNorm(), 1e-300);
        s.noise_var(l) = std::max(sample_inverse_gamma(shape, scale, rng), kVarianceFloor);
    }
}

/// s^2 ~ IG(NL/2 + gamma, nu + sum x^2 / 2) over every entry of X.
inline void sample_outlier_variance(MixingState& s, Rng& rng, const Hyperparams& hyper = {}) {
    const double shape = 0.5 * static_cast<double>(s.outlier_values.size()) + hyper.gamma;
    const double scale = hyper.nu + 0.5 * s.outlier_values.squaredNorm();
    s.outlier_var = std::max(sample_inverse_gamma(shape, scale, rng), kVarianceFloor);
}

/// Projected gradient step on beta': each component moves by
/// delta * (statistic of Z - statistic of Z'), then beta_N and beta_L are
/// clipped to [0, bound] and beta_0 to [0, 1].
inline IsingParams beta_gradient_step(const IsingParams& prev, const GradStats& current, const GradStats& aux,
                                      double delta, double bound) {
    IsingParams next;
    next.beta_N = std::clamp(prev.beta_N + delta * (current.phi_N - aux.phi_N), 0.0, bound);
    next.beta_L = std::clamp(prev.beta_L + delta * (current.phi_L - aux.phi_L), 0.0, bound);
    next.beta_0 = std::clamp(prev.beta_0 + delta * (current.g0 - aux.g0), 0.0, 1.0);
    return next;
}

/// Stochastic-gradient update of beta' at iteration t: draws the auxiliary
/// Z' by `aux_sweeps` coloured prior sweeps started from the current Z
/// under the current beta', then takes the projected step.
inline IsingParams update_beta(const MixingState& s, Rng& rng, int t, const SamplerConfig& cfg = {},
                               LabelCube* aux_out = nullptr) {
    if (t < 1) throw std::invalid_argument("update_beta: iterations are numbered from 1");
    LabelCube aux = s.labels;
    for (int k = 0; k < cfg.aux_sweeps; ++k) gibbs_sweep_colored(aux, s.beta, rng);
    double delta = beta_step_size(t);
    if (cfg.per_site_beta_step) delta /= static_cast<double>(s.labels.sites());
    const IsingParams next = beta_gradient_step(s.beta, grad_stats(s.labels), grad_stats(aux), delta, cfg.beta_bound);
    if (aux_out) *aux_out = std::move(aux);
    return next;
}

/// Starting point for the chain. When absent, run_chain uses VCA + FCLS.
struct Initialization {
    Matrix endmembers;
    Matrix abundances;
};

struct Chain {
    int height = 0;
    int width = 0;
    SamplerConfig config;
    Initialization init;

    std::vector<Matrix> endmember_samples;  // retained draws of M
    std::vector<Matrix> abundance_samples;  // retained draws of A
    CountMatrix label_counts;               // per site, retained draws with z = 1
    Matrix outlier_value_sums;              // per site, sum of x over those draws
    int retained = 0;

    std::vector<IsingParams> beta_trace;  // after each iteration
    std::vector<Vector> noise_trace;
    std::vector<double> s2_trace;

    MixingState final_state;
};

using ChainObserver = std::function<void(int iteration, const MixingState&)>;

namespace detail {

inline MixingState initial_state(const HsiCube& cube, const Initialization& init, const SamplerConfig& cfg) {
    const Matrix& y = cube.data();
    const auto r = init.endmembers.cols();
    MixingState s;
    s.endmembers = init.endmembers;
    s.coords = init.abundances.topRows(r - 1).cwiseMax(0.0);
    for (Eigen::Index n = 0; n < s.coords.cols(); ++n) {
        const double sum = s.coords.col(n).sum();
        if (sum > 1.0 - 4 * kSimplexSlack) s.coords.col(n) *= (1.0 - 4 * kSimplexSlack) / sum;
    }
    s.outlier_values = Matrix::Zero(y.rows(), y.cols());
    s.labels = LabelCube(cube.height(), cube.width(), cube.bands());
    const Matrix resid = y - init.endmembers * init.abundances;
    s.noise_var = (resid.rowwise().squaredNorm() / static_cast<double>(y.cols())).cwiseMax(kVarianceFloor);
    s.outlier_var = cfg.s2_init;
    s.beta = cfg.beta_init;
    return s;
}

}  // namespace detail

/// Runs the full sampler: per iteration labels, endmembers, abundances,
/// the joint (M, A) moves, outlier values, noise variances, outlier
/// variance, then (during burn-in only) the beta' update. Post-burn-in
/// draws are retained for the estimators.
inline Chain run_chain(const HsiCube& cube, int r, const SamplerConfig& cfg,
                       std::optional<Initialization> init = std::nullopt, const ChainObserver& observer = {}) {
    cfg.validate();
    const Matrix& y = cube.data();
    if (r < 2) throw std::invalid_argument("run_chain: need at least two endmembers");
    if (cube.bands() < r || cube.pixels() < r || cube.pixels() < 3)
        throw DimensionError("run_chain: cube of " + detail::shape(cube.bands(), cube.pixels()) +
                             " is too small for R=" + std::to_string(r));

    Rng rng(cfg.seed);
    if (!init) {
        Initialization fresh;
        fresh.endmembers = vca_init(cube, r, rng);
        fresh.abundances = fcls(cube, fresh.endmembers);
        init = std::move(fresh);
    } else {
        detail::require_dims(init->endmembers.rows() == cube.bands() && init->endmembers.cols() == r,
                             "initial endmembers", "expected " + detail::shape(cube.bands(), r));
        detail::require_dims(init->abundances.rows() == r && init->abundances.cols() == cube.pixels(),
                             "initial abundances", "expected " + detail::shape(r, cube.pixels()));
        validate_endmembers(init->endmembers);
        validate_abundances(init->abundances, 1e-6);
    }

    Chain chain;
    chain.height = cube.height();
    chain.width = cube.width();
    chain.config = cfg;
    chain.init = *init;
    chain.label_counts = CountMatrix::Zero(y.rows(), y.cols());
    chain.outlier_value_sums = Matrix::Zero(y.rows(), y.cols());
    chain.beta_trace.reserve(cfg.n_mc);
    chain.noise_trace.reserve(cfg.n_mc);
    chain.s2_trace.reserve(cfg.n_mc);

    MixingState s = detail::initial_state(cube, *init, cfg);
    const FrozenSteps& fz = cfg.frozen;
    for (int t = 1; t <= cfg.n_mc; ++t) {
        s.iteration = t;
        if (!fz.labels) sample_labels(s, y, rng, cfg);
        if (!fz.endmembers) sample_endmembers(s, y, rng, cfg);
        if (!fz.abundances) sample_abundances(s, y, rng, cfg);
        if (cfg.ridge_proposals > 0 && !fz.endmembers && !fz.abundances)
            ridge_moves(s, y, rng, cfg.ridge_proposals, cfg.ridge_scale, cfg.hyper);
        if (!fz.outlier_values) sample_outlier_values(s, y, rng, cfg);
        if (!fz.noise_variances) sample_noise_variances(s, y, rng);
        if (!fz.outlier_variance) sample_outlier_variance(s, rng, cfg.hyper);
        if (!fz.beta && t <= cfg.n_bi) s.beta = update_beta(s, rng, t, cfg);
        if (cfg.check_invariants) s.check_invariants(cfg.beta_bound);

        chain.beta_trace.push_back(s.beta);
        chain.noise_trace.push_back(s.noise_var);
        chain.s2_trace.push_back(s.outlier_var);

        if (t > cfg.n_bi && (t - cfg.n_bi - 1) % cfg.thinning == 0) {
            chain.endmember_samples.push_back(s.endmembers);
            chain.abundance_samples.push_back(s.abundances());
            const auto& z = s.labels.labels();
            chain.label_counts += z.cast<std::int64_t>();
            chain.outlier_value_sums += z.cast<double>().cwiseProduct(s.outlier_values);
            ++chain.retained;
        }
        if (observer) observer(t, s);
    }
    chain.final_state = std::move(s);
    return chain;
}

/// Monte Carlo estimators from a finished chain.
struct PosteriorSummary {
    Matrix endmembers;   // MMSE
    Matrix abundances;   // MMSE
    LabelCube labels;    // MMAP
    Matrix outliers;     // MMSE of x given the MMAP label; zero where that label is 0
    IsingParams beta;    // final (post-adaptation) beta'
    Vector outlier_energy;  // ||r_n||^2 per pixel
    Vector band_outlier_energy;  // mean over pixels of r_{l,n}^2 per band
    Vector noise_var_mean;  // over retained iterations
    double outlier_var_mean = 0;
    int retained = 0;

    OutlierField outlier_field() const {
        return {labels.labels(), outliers};
    }
};

inline PosteriorSummary summarize(const Chain& chain) {
    if (chain.retained == 0 || chain.endmember_samples.empty()) throw DataError("summarize: chain has no retained samples");
    PosteriorSummary out;
    out.retained = chain.retained;
    const double k = static_cast<double>(chain.retained);

    out.endmembers = Matrix::Zero(chain.endmember_samples.front().rows(), chain.endmember_samples.front().cols());
    for (const auto& m : chain.endmember_samples) out.endmembers += m;
    out.endmembers /= static_cast<double>(chain.endmember_samples.size());
    out.abundances = Matrix::Zero(chain.abundance_samples.front().rows(), chain.abundance_samples.front().cols());
    for (const auto& a : chain.abundance_samples) out.abundances += a;
    out.abundances /= static_cast<double>(chain.abundance_samples.size());

    const auto l = chain.label_counts.rows();
    const auto n = chain.label_counts.cols();
    LabelMatrix z(l, n);
    out.outliers = Matrix::Zero(l, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < l; ++i) {
            const auto c = chain.label_counts(i, j);
            const bool on = 2.0 * static_cast<double>(c) > k;
            z(i, j) = on ? 1 : 0;
            if (on) out.outliers(i, j) = chain.outlier_value_sums(i, j) / static_cast<double>(c);
        }
    }
    out.labels = LabelCube(chain.height, chain.width, std::move(z));
    out.beta = chain.final_state.beta;
    out.outlier_energy = out.outliers.colwise().squaredNorm().transpose();
    out.band_outlier_energy = out.outliers.rowwise().squaredNorm() / static_cast<double>(n);

    const auto first = static_cast<std::size_t>(chain.config.n_bi);
    out.noise_var_mean = Vector::Zero(l);
    double s2 = 0;
    std::size_t count = 0;
    for (std::size_t t = first; t < chain.noise_trace.size(); ++t, ++count) {
        out.noise_var_mean += chain.noise_trace[t];
        s2 += chain.s2_trace[t];
    }
    if (count > 0) {
        out.noise_var_mean /= static_cast<double>(count);
        out.outlier_var_mean = s2 / static_cast<double>(count);
    }
    return out;
}

}  // namespace rblu
