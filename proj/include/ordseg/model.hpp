// Regression mixture governed by the latent logistic process: parameters,
// Gaussian densities, observed-data and complete-data log-likelihoods, and
// weighted least-squares class fits.
#ifndef ORDSEG_MODEL_HPP
#define ORDSEG_MODEL_HPP

#include "ordseg/linalg.hpp"
#include "ordseg/logistic.hpp"
#include "ordseg/series.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace ordseg {

struct ClassRegression {
    Eigen::VectorXd beta;
    double sigma2 = 1.0;
};

/// Psi = (theta, w): per-class polynomial coefficients and variances, plus the
/// logistic coefficients.
struct RegressionMixtureParams {
    std::vector<ClassRegression> classes;
    LogisticParams logistic{1};

    int num_classes() const noexcept { return static_cast<int>(classes.size()); }
    int degree() const { return static_cast<int>(classes.front().beta.size()) - 1; }

    void validate() const {
        if (classes.empty()) throw std::invalid_argument("params: K must be >= 1");
        if (logistic.num_classes() != num_classes()) {
            throw std::invalid_argument("params: logistic and regression class counts differ");
        }
        for (const auto& c : classes) {
            if (c.beta.size() != classes.front().beta.size() || c.beta.size() < 1) {
                throw std::invalid_argument("params: classes must share one polynomial degree");
            }
            if (!(c.sigma2 > 0.0)) throw std::domain_error("params: sigma2 must be positive");
        }
    }

    /// Reorders classes (regressions and logistic rows together) so that new
    /// class j is old class order[j].
    RegressionMixtureParams permuted(const std::vector<int>& order) const {
        RegressionMixtureParams out;
        Eigen::MatrixXd coef(num_classes(), 2);
        for (std::size_t j = 0; j < order.size(); ++j) {
            out.classes.push_back(classes.at(static_cast<std::size_t>(order[j])));
            coef.row(static_cast<Eigen::Index>(j)) = logistic.coefficients().row(order[j]);
        }
        out.logistic = LogisticParams::from_coefficients(coef);
        return out;
    }
};

inline double gaussian_log_density(double y, double mean, double sigma2) {
    if (!(sigma2 > 0.0)) throw std::domain_error("gaussian_log_density: sigma2 must be positive");
    const double r = y - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * sigma2) - r * r / (2.0 * sigma2);
}

/// n x K matrix of log pi_k(t_i) + log N(y_i; beta_k' t_i, sigma_k^2).
inline Eigen::MatrixXd log_joint_matrix(const TimeSeries& series, const RegressionMixtureParams& params) {
    params.validate();
    const PolynomialBasis basis(params.degree());
    const Eigen::MatrixXd x = design_matrix(series, basis);
    Eigen::MatrixXd out = logistic_log_probabilities(series.t(), params.logistic);
    const auto y = series.y_vec();
    for (int k = 0; k < params.num_classes(); ++k) {
        const auto& c = params.classes[static_cast<std::size_t>(k)];
        const Eigen::VectorXd mean = x * c.beta;
        const double norm = -0.5 * std::log(2.0 * std::numbers::pi * c.sigma2);
        out.col(k).array() += norm - (y - mean).array().square() / (2.0 * c.sigma2);
    }
    return out;
}

/// log p(y | t; Psi) = sum_i log sum_k pi_k(t_i) N(y_i; beta_k' t_i, sigma_k^2).
inline double mixture_log_likelihood(const TimeSeries& series, const RegressionMixtureParams& params) {
    return detail::row_log_sum_exp(log_joint_matrix(series, params)).sum();
}

/// log p(y, z | t; Psi) for hard labels given as 0-based class indices.
inline double complete_data_log_likelihood(const TimeSeries& series, const RegressionMixtureParams& params,
                                           const std::vector<int>& labels) {
    if (labels.size() != series.size()) throw std::invalid_argument("labels and series differ in length");
    const Eigen::MatrixXd lj = log_joint_matrix(series, params);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= params.num_classes()) {
            throw std::domain_error("complete_data_log_likelihood: label out of range at index " + std::to_string(i));
        }
        total += lj(static_cast<Eigen::Index>(i), labels[i]);
    }
    return total;
}

inline double complete_data_log_likelihood(const TimeSeries& series, const RegressionMixtureParams& params,
                                           const OrderedPartition& partition) {
    if (partition.num_classes() != params.num_classes()) {
        throw std::invalid_argument("partition and params differ in K");
    }
    return complete_data_log_likelihood(series, params, partition.labels());
}

/// Thrown when a class receives zero total weight in an M-step.
class EmptyClassError : public std::runtime_error {
public:
    explicit EmptyClassError(int cls)
        : std::runtime_error("class " + std::to_string(cls + 1) + " has zero total weight"), cls_(cls) {}
    int class_index() const noexcept { return cls_; }

private:
    int cls_;
};

/// Weighted least squares for one class: solves (X'WX) beta = X'Wy and
/// sets sigma2 to the weighted mean squared residual, floored.
inline ClassRegression weighted_class_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& w, double floor) {
    const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
    const Eigen::VectorXd beta = detail::solve_spd_jittered(xtw * x, xtw * y);
    const double mass = w.sum();
    const double rss = (w.array() * (y - x * beta).array().square()).sum();
    return {beta, std::max(rss / mass, floor)};
}

/// Maximizes Q2({beta_k, sigma_k^2}) = sum_ik weights_ik log N(y_i; beta_k' t_i, sigma_k^2).
inline std::vector<ClassRegression> m_step_regression(const TimeSeries& series, const WeightMatrix& weights,
                                                      const PolynomialBasis& basis) {
    if (weights.rows() != static_cast<Eigen::Index>(series.size())) {
        throw std::invalid_argument("m_step_regression: weights must have n rows");
    }
    const Eigen::MatrixXd x = design_matrix(series, basis);
    const Eigen::VectorXd y = series.y_vec();
    const double floor = variance_floor(series);
    std::vector<ClassRegression> out;
    out.reserve(static_cast<std::size_t>(weights.cols()));
    for (Eigen::Index k = 0; k < weights.cols(); ++k) {
        if (!(weights.col(k).sum() > 0.0)) throw EmptyClassError(static_cast<int>(k));
        out.push_back(weighted_class_fit(x, y, weights.col(k), floor));
    }
    return out;
}

/// Q2 evaluated at given class regressions.
inline double regression_objective(const TimeSeries& series, const WeightMatrix& weights,
                                   const std::vector<ClassRegression>& classes) {
    const PolynomialBasis basis(static_cast<int>(classes.front().beta.size()) - 1);
    const Eigen::MatrixXd x = design_matrix(series, basis);
    double q = 0.0;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        const Eigen::VectorXd mean = x * classes[k].beta;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double w = weights(i, static_cast<Eigen::Index>(k));
            if (w != 0.0) q += w * gaussian_log_density(series.y()[static_cast<std::size_t>(i)], mean(i), classes[k].sigma2);
        }
    }
    return q;
}

}  // namespace ordseg

#endif  // ORDSEG_MODEL_HPP
