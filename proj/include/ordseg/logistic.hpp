// Latent logistic process: class proportions pi_k(t; w), ordered partitions
// extracted from them, and the IRLS solver for the weighted multinomial
// logistic problem.
#ifndef ORDSEG_LOGISTIC_HPP
#define ORDSEG_LOGISTIC_HPP

#include "ordseg/linalg.hpp"
#include "ordseg/series.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ordseg {

/// n x K matrix of non-negative entries whose rows sum to one (posteriors tau_ik
/// or hard indicators z_ik).
using WeightMatrix = Eigen::MatrixXd;

inline void validate_weights(const WeightMatrix& w, double tol = 1e-9) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        if ((w.row(i).array() < 0.0).any() || !w.row(i).allFinite()) {
            throw std::invalid_argument("weights: negative or non-finite entry in row " + std::to_string(i));
        }
        const double s = w.row(i).sum();
        if (std::abs(s - 1.0) > tol) {
            throw std::invalid_argument("weights: row " + std::to_string(i) + " does not sum to 1");
        }
    }
}

/// Affine scores a_k(t) = w_k0 + w_k1 t for k = 1..K with class K pinned to
/// (0, 0). The softmax form exp(lambda_k (t + gamma_k)) maps to
/// w_k1 = lambda_k, w_k0 = lambda_k * gamma_k.
class LogisticParams {
public:
    /// All-zero coefficients: uniform proportions.
    explicit LogisticParams(int num_classes) : coef_(Eigen::MatrixXd::Zero(num_classes, 2)) {
        if (num_classes < 1) throw std::invalid_argument("LogisticParams: K must be >= 1");
    }

    /// From a K x 2 matrix of (intercept, slope) rows. The last row is
    /// subtracted from every row, which leaves the proportions unchanged.
    static LogisticParams from_coefficients(const Eigen::MatrixXd& coef) {
        if (coef.rows() < 1 || coef.cols() != 2) {
            throw std::invalid_argument("LogisticParams: coefficients must be K x 2");
        }
        LogisticParams p(static_cast<int>(coef.rows()));
        for (Eigen::Index k = 0; k < coef.rows(); ++k) p.coef_.row(k) = coef.row(k) - coef.row(coef.rows() - 1);
        return p;
    }

    /// From slopes lambda_k and offsets gamma_k (length K, or K-1 with class K
    /// implicitly zero).
    static LogisticParams from_lambda_gamma(std::span<const double> lambda, std::span<const double> gamma,
                                            int num_classes) {
        if (lambda.size() != gamma.size()) throw std::invalid_argument("lambda and gamma differ in length");
        const auto k_count = static_cast<std::size_t>(num_classes);
        if (lambda.size() != k_count && lambda.size() + 1 != k_count) {
            throw std::invalid_argument("lambda/gamma must hold K or K-1 entries");
        }
        Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(num_classes, 2);
        for (std::size_t k = 0; k < lambda.size(); ++k) {
            coef(static_cast<Eigen::Index>(k), 0) = lambda[k] * gamma[k];
            coef(static_cast<Eigen::Index>(k), 1) = lambda[k];
        }
        return from_coefficients(coef);
    }

    int num_classes() const noexcept { return static_cast<int>(coef_.rows()); }
    const Eigen::MatrixXd& coefficients() const noexcept { return coef_; }
    double intercept(int k) const { return coef_(k, 0); }
    double slope(int k) const { return coef_(k, 1); }

    double lambda(int k) const { return coef_(k, 1); }
    /// gamma_k = w_k0 / w_k1; undefined when the slope is zero.
    std::optional<double> gamma(int k) const {
        if (coef_(k, 1) == 0.0) return std::nullopt;
        return coef_(k, 0) / coef_(k, 1);
    }

    /// Free coefficients (w_10, w_11, ..., w_{K-1,0}, w_{K-1,1}).
    Eigen::VectorXd free_vector() const {
        Eigen::VectorXd v(2 * (num_classes() - 1));
        for (int k = 0; k + 1 < num_classes(); ++k) {
            v(2 * k) = coef_(k, 0);
            v(2 * k + 1) = coef_(k, 1);
        }
        return v;
    }

    static LogisticParams from_free_vector(const Eigen::VectorXd& v, int num_classes) {
        if (v.size() != 2 * (num_classes - 1)) throw std::invalid_argument("free vector has wrong length");
        LogisticParams p(num_classes);
        for (int k = 0; k + 1 < num_classes; ++k) {
            p.coef_(k, 0) = v(2 * k);
            p.coef_(k, 1) = v(2 * k + 1);
        }
        return p;
    }

    friend bool operator==(const LogisticParams& a, const LogisticParams& b) { return a.coef_ == b.coef_; }

private:
    Eigen::MatrixXd coef_;
};

namespace detail {

/// Column-wise log-softmax of the affine scores w_k0 + w_k1 t_i into `out`
/// (n x K), with max subtraction.
inline void log_softmax_into(const Eigen::Ref<const Eigen::ArrayXd>& t, const Eigen::MatrixXd& coef,
                             Eigen::ArrayXXd& out) {
    const Eigen::Index n = t.size();
    const Eigen::Index k_count = coef.rows();
    out.resize(n, k_count);
    for (Eigen::Index k = 0; k < k_count; ++k) out.col(k) = coef(k, 0) + coef(k, 1) * t;
    Eigen::ArrayXd m = out.col(0);
    for (Eigen::Index k = 1; k < k_count; ++k) m = m.max(out.col(k));
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(n);
    for (Eigen::Index k = 0; k < k_count; ++k) {
        out.col(k) -= m;
        sum += out.col(k).exp();
    }
    const Eigen::ArrayXd log_sum = sum.log();
    for (Eigen::Index k = 0; k < k_count; ++k) out.col(k) -= log_sum;
}

inline Eigen::Map<const Eigen::ArrayXd> as_array(std::span<const double> t) {
    return {t.data(), static_cast<Eigen::Index>(t.size())};
}

}  // namespace detail

/// n x K matrix of log pi_k(t_i; w), computed with max subtraction.
inline Eigen::MatrixXd logistic_log_probabilities(std::span<const double> t, const LogisticParams& params) {
    Eigen::ArrayXXd out;
    detail::log_softmax_into(detail::as_array(t), params.coefficients(), out);
    return out.matrix();
}

/// n x K matrix of proportions pi_k(t_i; w); rows sum to one.
inline Eigen::MatrixXd logistic_probabilities(std::span<const double> t, const LogisticParams& params) {
    Eigen::ArrayXXd out;
    detail::log_softmax_into(detail::as_array(t), params.coefficients(), out);
    out = out.exp();
    // Renormalize so rows sum to one to rounding.
    const Eigen::ArrayXd sums = out.rowwise().sum();
    for (Eigen::Index k = 0; k < out.cols(); ++k) out.col(k) /= sums;
    return out.matrix();
}

namespace detail {

/// Index of the row maximum; the lowest index wins ties.
template <typename Row>
int argmax_lowest(const Row& row) {
    int best = 0;
    for (Eigen::Index k = 1; k < row.size(); ++k)
        if (row(k) > row(best)) best = static_cast<int>(k);
    return best;
}

/// Makes labels non-decreasing by giving any point whose label drops below its
/// left neighbour's the neighbour's label.
inline void repair_left_neighbour(std::vector<int>& labels) {
    for (std::size_t i = 1; i < labels.size(); ++i) labels[i] = std::max(labels[i], labels[i - 1]);
}

}  // namespace detail

struct LogisticPartition {
    OrderedPartition partition;
    /// Raised when fewer than K segments are non-empty.
    bool has_empty_classes = false;
    /// Number of points whose label was changed by the contiguity repair.
    std::size_t repaired_points = 0;
};

/// Labels each instant by argmax_k pi_k(t_i; w). The log-odds between classes
/// are affine in t, so every class wins on one interval; the labels are
/// non-decreasing when the classes are numbered in the order they first win
/// (as the estimators return them). Otherwise, and for rounding strays, a
/// point whose label drops is reassigned to its left neighbour's class.
inline LogisticPartition ordered_partition_from_logistic(std::span<const double> t, const LogisticParams& params) {
    const Eigen::MatrixXd logp = logistic_log_probabilities(t, params);
    std::vector<int> labels(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) labels[i] = detail::argmax_lowest(logp.row(static_cast<Eigen::Index>(i)));
    const std::vector<int> raw = labels;
    detail::repair_left_neighbour(labels);
    LogisticPartition out;
    for (std::size_t i = 0; i < labels.size(); ++i) out.repaired_points += labels[i] != raw[i] ? 1 : 0;
    out.partition = OrderedPartition::from_labels(labels, params.num_classes());
    out.has_empty_classes = !out.partition.all_nonempty();
    return out;
}

namespace detail {

/// sum_ik weights_ik * logp_ik, skipping zero weights (so -inf log
/// probabilities on classes without weight do not poison the sum).
inline double weighted_log_sum(const Eigen::MatrixXd& weights, const Eigen::ArrayXXd& logp) {
    return (weights.array() == 0.0).select(0.0, weights.array() * logp).sum();
}

}  // namespace detail

/// Q1(w) = sum_i sum_k weights_ik log pi_k(t_i; w).
inline double logistic_objective(std::span<const double> t, const WeightMatrix& weights, const LogisticParams& params) {
    Eigen::ArrayXXd logp;
    detail::log_softmax_into(detail::as_array(t), params.coefficients(), logp);
    return detail::weighted_log_sum(weights, logp);
}

struct IrlsOptions {
    int max_iterations = 50;
    double objective_tol = 1e-8;
    double gradient_tol = 1e-7;
    int max_halvings = 30;
    double coefficient_limit = 1e4;
    double jitter = 1e-10;
};

struct IrlsResult {
    LogisticParams params;
    /// Q1 at the initial point followed by Q1 after each accepted Newton step.
    std::vector<double> objective_trace;
    int iterations = 0;
    double gradient_norm = 0.0;
    /// Set when the maximum is not attained at finite coefficients: either a
    /// coefficient reached the limit, or hard weights are perfectly separated
    /// by the fitted proportions.
    bool saturated = false;
};

/// Maximizes Q1 by Newton-Raphson on the 2(K-1) free coefficients with
/// step halving.
inline IrlsResult irls_fit(std::span<const double> t, const WeightMatrix& weights, const LogisticParams& init,
                           const IrlsOptions& options = {}) {
    const int k_count = init.num_classes();
    const auto n = static_cast<Eigen::Index>(t.size());
    if (weights.rows() != n || weights.cols() != k_count) {
        throw std::invalid_argument("irls_fit: weights must be n x K");
    }
    const auto tt = detail::as_array(t);
    IrlsResult result{init, {}, 0, 0.0, false};
    Eigen::ArrayXXd logp;
    detail::log_softmax_into(tt, init.coefficients(), logp);
    result.objective_trace.push_back(detail::weighted_log_sum(weights, logp));
    if (k_count == 1) return result;

    const int free_count = k_count - 1;
    const Eigen::Index dim = 2 * free_count;
    const Eigen::ArrayXd row_mass = weights.rowwise().sum().array();
    const Eigen::ArrayXd t2 = tt.square();

    Eigen::VectorXd v = init.free_vector();
    double q = result.objective_trace.back();
    bool clamped = false;

    Eigen::VectorXd grad(dim);
    Eigen::MatrixXd neg_hess(dim, dim);
    Eigen::ArrayXXd pi(n, k_count);
    Eigen::ArrayXXd candidate_logp;
    Eigen::ArrayXd r(n), h(n);
    bool converged = false;
    for (int iter = 0; iter < options.max_iterations && !converged; ++iter) {
        pi = logp.exp();
        for (int k = 0; k < free_count; ++k) {
            r = weights.col(k).array() - row_mass * pi.col(k);
            grad(2 * k) = r.sum();
            grad(2 * k + 1) = (r * tt).sum();
            for (int l = 0; l <= k; ++l) {
                h = row_mass * pi.col(k) * ((k == l ? 1.0 : 0.0) - pi.col(l));
                const double h0 = h.sum();
                const double h1 = (h * tt).sum();
                const double h2 = (h * t2).sum();
                neg_hess(2 * k, 2 * l) = h0;
                neg_hess(2 * k, 2 * l + 1) = h1;
                neg_hess(2 * k + 1, 2 * l) = h1;
                neg_hess(2 * k + 1, 2 * l + 1) = h2;
            }
        }
        for (Eigen::Index a = 0; a < dim; ++a)
            for (Eigen::Index b = a + 1; b < dim; ++b) neg_hess(a, b) = neg_hess(b, a);

        result.gradient_norm = grad.lpNorm<Eigen::Infinity>();
        if (result.gradient_norm < options.gradient_tol) break;

        const Eigen::VectorXd step = detail::solve_spd_jittered(neg_hess, grad, options.jitter);
        double scale = 1.0;
        bool accepted = false;
        for (int halving = 0; halving <= options.max_halvings; ++halving, scale *= 0.5) {
            Eigen::VectorXd candidate = v + scale * step;
            bool hit_limit = false;
            for (Eigen::Index j = 0; j < dim; ++j) {
                if (std::abs(candidate(j)) > options.coefficient_limit) {
                    candidate(j) = std::copysign(options.coefficient_limit, candidate(j));
                    hit_limit = true;
                }
            }
            detail::log_softmax_into(tt, LogisticParams::from_free_vector(candidate, k_count).coefficients(),
                                     candidate_logp);
            const double q_new = detail::weighted_log_sum(weights, candidate_logp);
            if (q_new >= q) {
                const double delta = q_new - q;
                v = candidate;
                q = q_new;
                logp.swap(candidate_logp);
                clamped = clamped || hit_limit;
                accepted = true;
                result.objective_trace.push_back(q);
                ++result.iterations;
                converged = delta < options.objective_tol;
                break;
            }
        }
        if (!accepted) break;
    }

    result.params = LogisticParams::from_free_vector(v, k_count);
    result.saturated = clamped;
    if (!clamped) {
        // Hard weights reproduced exactly by argmax pi: the likelihood keeps
        // increasing along the current direction, no finite maximizer exists.
        const bool hard = ((weights.array() == 0.0) || (weights.array() == 1.0)).all();
        if (hard) {
            bool separated = true;
            for (Eigen::Index i = 0; i < n && separated; ++i) {
                int target = 0;
                weights.row(i).maxCoeff(&target);
                separated = detail::argmax_lowest(logp.row(i)) == target;
            }
            result.saturated = separated;
        }
    }
    return result;
}

/// Writes CSV rows (t, pi_1, ..., pi_K) over steps+1 evenly spaced instants.
inline void write_curves_csv(std::ostream& out, const LogisticParams& params, double t_min, double t_max, int steps) {
    if (steps < 1 || !(t_max > t_min)) throw std::invalid_argument("curves: need steps >= 1 and t_max > t_min");
    std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
    for (int s = 0; s <= steps; ++s) grid[static_cast<std::size_t>(s)] = t_min + (t_max - t_min) * s / steps;
    grid.back() = t_max;
    const Eigen::MatrixXd pi = logistic_probabilities(grid, params);
    out << "t";
    for (int k = 0; k < params.num_classes(); ++k) out << ",pi_" << (k + 1);
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", grid[i]);
        out << buf;
        for (int k = 0; k < params.num_classes(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", pi(static_cast<Eigen::Index>(i), k));
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace ordseg

#endif  // ORDSEG_LOGISTIC_HPP
