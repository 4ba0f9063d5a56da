// Maximum-likelihood fitting of the latent-process regression mixture by EM.
#ifndef ORDSEG_EM_HPP
#define ORDSEG_EM_HPP

#include "ordseg/logistic.hpp"
#include "ordseg/model.hpp"
#include "ordseg/rng.hpp"
#include "ordseg/series.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ordseg {

struct EmConfig {
    int max_iterations = 1000;
    double rel_tol = 1e-8;
    int n_restarts = 5;
    std::uint64_t seed = 0;
    IrlsOptions irls{};

    void validate() const {
        if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
        if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be > 0");
        if (n_restarts < 1) throw std::invalid_argument("n_restarts must be >= 1");
    }
};

struct FitReport {
    RegressionMixtureParams params;
    /// Final ordered partition (from the logistic proportions for EM, the last
    /// hard labeling for CEM).
    OrderedPartition partition;
    bool has_empty_classes = false;
    /// Per-point argmax of the final posteriors (may be non-contiguous).
    std::vector<int> posterior_labels;
    /// Objective after initialization and after every iteration: observed-data
    /// log-likelihood for EM, complete-data log-likelihood for CEM.
    std::vector<double> loglik_trace;
    int n_iterations = 0;
    std::vector<int> irls_iteration_counts;
    bool converged = false;
    double wall_clock_seconds = 0.0;
    int restart_index_selected = 0;
    std::vector<double> restart_final_objectives;
    int abandoned_restarts = 0;
    std::vector<std::string> warnings;

    double final_objective() const { return loglik_trace.back(); }
};

/// Posterior class probabilities tau_ik, normalized in log space.
inline WeightMatrix posteriors_from_log_joint(const Eigen::MatrixXd& log_joint) {
    const Eigen::ArrayXd lse = detail::row_log_sum_exp(log_joint);
    Eigen::ArrayXXd tau = log_joint.array().colwise() - lse;
    tau = tau.exp();
    const Eigen::ArrayXd sums = tau.rowwise().sum();
    tau.colwise() /= sums;
    return tau.matrix();
}

inline WeightMatrix e_step(const TimeSeries& series, const RegressionMixtureParams& params) {
    return posteriors_from_log_joint(log_joint_matrix(series, params));
}

/// Restart r's initial segmentation: r = 0 splits the points into K chunks of
/// (nearly) equal count; r >= 1 draws K-1 distinct random boundaries.
inline OrderedPartition initial_partition(std::size_t n, int num_classes, std::uint64_t seed, int restart) {
    const auto k_count = static_cast<std::size_t>(num_classes);
    if (k_count > n) throw std::invalid_argument("initialize: K must be <= n");
    std::vector<std::size_t> b{0};
    if (restart == 0) {
        for (std::size_t k = 1; k < k_count; ++k) b.push_back((k * n) / k_count);
    } else {
        CounterRng rng(hash_combine(seed, static_cast<std::uint64_t>(restart)));
        std::vector<std::size_t> cuts;
        while (cuts.size() + 1 < k_count) {
            const std::size_t c = 1 + static_cast<std::size_t>(rng.next_below(n - 1));
            if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
        }
        std::sort(cuts.begin(), cuts.end());
        b.insert(b.end(), cuts.begin(), cuts.end());
    }
    b.push_back(n);
    return OrderedPartition(std::move(b));
}

/// Regression parameters fitted on each chunk of an initial segmentation; the
/// logistic coefficients start at zero (uniform proportions).
inline RegressionMixtureParams initialize(const TimeSeries& series, int num_classes, const PolynomialBasis& basis,
                                          std::uint64_t seed, int restart = 0) {
    const OrderedPartition chunks = initial_partition(series.size(), num_classes, seed, restart);
    const WeightMatrix z = chunks.indicators();
    RegressionMixtureParams params;
    params.classes = m_step_regression(series, z, basis);
    params.logistic = LogisticParams(num_classes);
    return params;
}

/// Relabels classes by the order in which they first win argmax pi over t,
/// classes that never win go last. The likelihood is unchanged.
inline RegressionMixtureParams canonical_class_order(const TimeSeries& series, const RegressionMixtureParams& params) {
    const Eigen::MatrixXd logp = logistic_log_probabilities(series.t(), params.logistic);
    std::vector<int> order;
    for (Eigen::Index i = 0; i < logp.rows(); ++i) {
        const int k = detail::argmax_lowest(logp.row(i));
        if (std::find(order.begin(), order.end(), k) == order.end()) order.push_back(k);
    }
    for (int k = 0; k < params.num_classes(); ++k)
        if (std::find(order.begin(), order.end(), k) == order.end()) order.push_back(k);
    bool identity = true;
    for (std::size_t j = 0; j < order.size(); ++j) identity = identity && order[j] == static_cast<int>(j);
    return identity ? params : params.permuted(order);
}

inline std::vector<int> argmax_labels(const Eigen::MatrixXd& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = detail::argmax_lowest(m.row(i));
    return out;
}

namespace detail {

inline bool relative_change_below(double previous, double current, double tol) {
    const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
    return std::abs(current - previous) / scale < tol;
}

struct RunResult {
    RegressionMixtureParams params;
    std::vector<double> trace;
    std::vector<int> irls_counts;
    int iterations = 0;
    bool converged = false;
};

inline RunResult em_run(const TimeSeries& series, const PolynomialBasis& basis, RegressionMixtureParams params,
                        const EmConfig& config) {
    RunResult run;
    Eigen::MatrixXd lj = log_joint_matrix(series, params);
    auto loglik = [](const Eigen::MatrixXd& m) { return row_log_sum_exp(m).sum(); };
    run.trace.push_back(loglik(lj));
    for (int q = 0; q < config.max_iterations; ++q) {
        const WeightMatrix tau = posteriors_from_log_joint(lj);
        params.classes = m_step_regression(series, tau, basis);
        const IrlsResult irls = irls_fit(series.t(), tau, params.logistic, config.irls);
        params.logistic = irls.params;
        run.irls_counts.push_back(irls.iterations);
        ++run.iterations;

        lj = log_joint_matrix(series, params);
        const double current = loglik(lj);
        const double previous = run.trace.back();
        run.trace.push_back(current);
        if (relative_change_below(previous, current, config.rel_tol)) {
            run.converged = true;
            break;
        }
    }
    run.params = std::move(params);
    return run;
}

inline constexpr int kMaxRedraws = 10;

}  // namespace detail

/// EM with restarts; keeps the run with the highest final log-likelihood. The
/// final partition is the argmax of the fitted logistic proportions.
inline FitReport em_fit(const TimeSeries& series, int num_classes, const PolynomialBasis& basis,
                        const EmConfig& config = {}) {
    config.validate();
    if (num_classes < 1 || static_cast<std::size_t>(num_classes) > series.size()) {
        throw std::invalid_argument("em_fit: K must satisfy 1 <= K <= n");
    }
    const auto started = std::chrono::steady_clock::now();
    FitReport report;
    if (series.size() < static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(basis.dim())) {
        report.warnings.push_back("n < K*(p+1): classes may be under-determined");
    }

    std::optional<detail::RunResult> best;
    int next_draw = config.n_restarts;  // redraws use restart indices past the configured ones
    for (int r = 0; r < config.n_restarts; ++r) {
        int draw = r;
        for (int attempt = 0; attempt <= detail::kMaxRedraws; ++attempt) {
            try {
                auto run = detail::em_run(series, basis, initialize(series, num_classes, basis, config.seed, draw),
                                          config);
                report.restart_final_objectives.push_back(run.trace.back());
                if (!best || run.trace.back() > best->trace.back()) {
                    best = std::move(run);
                    report.restart_index_selected = r;
                }
                break;
            } catch (const EmptyClassError&) {
                ++report.abandoned_restarts;
                draw = next_draw++;
            }
        }
    }
    if (!best) throw std::runtime_error("em_fit: every restart produced an empty class");

    report.params = canonical_class_order(series, best->params);
    const auto logistic_partition = ordered_partition_from_logistic(series.t(), report.params.logistic);
    report.partition = logistic_partition.partition;
    report.has_empty_classes = logistic_partition.has_empty_classes;
    report.posterior_labels = argmax_labels(log_joint_matrix(series, report.params));
    report.loglik_trace = std::move(best->trace);
    report.irls_iteration_counts = std::move(best->irls_counts);
    report.n_iterations = best->iterations;
    report.converged = best->converged;
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

}  // namespace ordseg

#endif  // ORDSEG_EM_HPP
