// Classification EM: alternates posterior computation, a hard ordered
// classification step and parameter maximization on the complete-data
// log-likelihood.
#ifndef ORDSEG_CEM_HPP
#define ORDSEG_CEM_HPP

#include "ordseg/em.hpp"
#include "ordseg/logistic.hpp"
#include "ordseg/model.hpp"
#include "ordseg/series.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ordseg {

enum class EmptyClassPolicy { AbortRestart, ReseedSmallest };
enum class CStepRule { Posterior, Logistic };

struct CemConfig : EmConfig {
    EmptyClassPolicy empty_class_policy = EmptyClassPolicy::AbortRestart;
    CStepRule c_step_rule = CStepRule::Posterior;
};

/// Non-decreasing labeling maximizing sum_i scores(i, z_i). Among maximizers
/// the lexicographically smallest label vector is returned, so an already
/// ordered row-wise argmax (lowest index on ties) is returned unchanged.
inline std::vector<int> ordered_labeling(const Eigen::MatrixXd& scores) {
    const Eigen::Index n = scores.rows();
    const Eigen::Index k_count = scores.cols();
    std::vector<int> labels(static_cast<std::size_t>(n));
    if (n == 0) return labels;
    // value(i, k): best total over points i..n-1 given z_i = k.
    // tail(i, k) = max_{k' >= k} value(i, k').
    Eigen::MatrixXd value(n, k_count);
    Eigen::MatrixXd tail(n, k_count);
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        for (Eigen::Index k = 0; k < k_count; ++k) value(i, k) = scores(i, k) + (i + 1 < n ? tail(i + 1, k) : 0.0);
        tail(i, k_count - 1) = value(i, k_count - 1);
        for (Eigen::Index k = k_count - 2; k >= 0; --k) tail(i, k) = std::max(value(i, k), tail(i, k + 1));
    }
    int floor_label = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double target = tail(i, floor_label);
        int k = floor_label;
        while (value(i, k) != target) ++k;
        labels[static_cast<std::size_t>(i)] = k;
        floor_label = k;
    }
    return labels;
}

struct CStepResult {
    OrderedPartition partition;
    bool has_empty_classes = false;
    /// Points whose ordered label differs from the per-row argmax.
    std::size_t repaired_points = 0;
};

namespace detail {

inline CStepResult make_c_step_result(const std::vector<int>& labels, const std::vector<int>& raw, int num_classes) {
    CStepResult out;
    out.partition = OrderedPartition::from_labels(labels, num_classes);
    out.has_empty_classes = !out.partition.all_nonempty();
    for (std::size_t i = 0; i < labels.size(); ++i) out.repaired_points += labels[i] != raw[i] ? 1 : 0;
    return out;
}

}  // namespace detail

/// Hard assignment z_i = argmax_k tau_ik. When the row-wise argmax is not
/// ordered in time, the ordered labeling with the largest sum of log
/// posteriors is used instead.
inline CStepResult c_step(const WeightMatrix& posteriors) {
    const Eigen::MatrixXd logs = posteriors.array().max(std::numeric_limits<double>::min()).log().matrix();
    return detail::make_c_step_result(ordered_labeling(logs), argmax_labels(posteriors),
                                      static_cast<int>(posteriors.cols()));
}

namespace detail {

/// Moves one boundary point into each empty class, picking among the points
/// adjacent to the empty segment the one with the lowest maximum posterior.
/// Returns nullopt when no neighbouring segment can spare a point.
inline std::optional<OrderedPartition> reseed_empty(const OrderedPartition& partition, const Eigen::MatrixXd& log_joint) {
    std::vector<std::size_t> b = partition.boundaries();
    const int k_count = partition.num_classes();
    auto max_posterior = [&](std::size_t i) {
        const auto row = log_joint.row(static_cast<Eigen::Index>(i));
        return std::exp(row.maxCoeff() - log_sum_exp(row));
    };
    for (int k = 0; k < k_count; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        if (b[uk + 1] > b[uk]) continue;
        // Candidates: last point of the preceding non-empty segment, first of the following one.
        auto seg_size = [&](int j) { return b[static_cast<std::size_t>(j) + 1] - b[static_cast<std::size_t>(j)]; };
        std::optional<std::size_t> left, right;
        int prev = k - 1;
        while (prev >= 0 && seg_size(prev) == 0) --prev;
        if (prev >= 0 && seg_size(prev) >= 2) left = b[uk] - 1;
        int next = k + 1;
        while (next < k_count && seg_size(next) == 0) ++next;
        if (next < k_count && seg_size(next) >= 2) right = b[static_cast<std::size_t>(next)];
        if (!left && !right) return std::nullopt;
        const bool take_left = left && (!right || max_posterior(*left) <= max_posterior(*right));
        if (take_left) {
            // Segments between prev and k are empty, so shifting b[k] left by one
            // also shifts those empty boundaries.
            const std::size_t point = *left;
            for (int j = k; j >= 0 && b[static_cast<std::size_t>(j)] > point; --j) b[static_cast<std::size_t>(j)] = point;
        } else {
            const std::size_t point = *right;
            for (int j = k + 1; j <= k_count && b[static_cast<std::size_t>(j)] <= point; ++j)
                b[static_cast<std::size_t>(j)] = point + 1;
        }
    }
    OrderedPartition out(std::move(b));
    if (!out.all_nonempty()) return std::nullopt;
    return out;
}

inline OrderedPartition classify(const TimeSeries& series, const RegressionMixtureParams& params,
                                 const Eigen::MatrixXd& log_joint, CStepRule rule) {
    if (rule == CStepRule::Logistic) return ordered_partition_from_logistic(series.t(), params.logistic).partition;
    return OrderedPartition::from_labels(ordered_labeling(log_joint), params.num_classes());
}

inline RunResult cem_run(const TimeSeries& series, const PolynomialBasis& basis, RegressionMixtureParams params,
                         const CemConfig& config, OrderedPartition& final_partition) {
    RunResult run;
    Eigen::MatrixXd lj = log_joint_matrix(series, params);
    auto handle_empty = [&](OrderedPartition z) {
        if (z.all_nonempty()) return z;
        const int k = z.empty_classes().front();
        if (config.empty_class_policy == EmptyClassPolicy::AbortRestart) throw EmptyClassError(k);
        auto reseeded = reseed_empty(z, lj);
        if (!reseeded) throw EmptyClassError(k);
        return *reseeded;
    };
    auto complete_ll = [&](const OrderedPartition& z) {
        double total = 0.0;
        for (int k = 0; k < z.num_classes(); ++k)
            for (std::size_t i = z.segment_begin(k); i < z.segment_end(k); ++i) total += lj(static_cast<Eigen::Index>(i), k);
        return total;
    };

    OrderedPartition z = handle_empty(classify(series, params, lj, config.c_step_rule));
    run.trace.push_back(complete_ll(z));
    for (int q = 0; q < config.max_iterations; ++q) {
        const WeightMatrix hard = z.indicators();
        params.classes = m_step_regression(series, hard, basis);
        const IrlsResult irls = irls_fit(series.t(), hard, params.logistic, config.irls);
        params.logistic = irls.params;
        run.irls_counts.push_back(irls.iterations);
        ++run.iterations;

        lj = log_joint_matrix(series, params);
        OrderedPartition next = handle_empty(classify(series, params, lj, config.c_step_rule));
        const double previous = run.trace.back();
        const double current = complete_ll(next);
        run.trace.push_back(current);
        const bool fixpoint = next == z;
        z = std::move(next);
        if (fixpoint || relative_change_below(previous, current, config.rel_tol)) {
            run.converged = true;
            break;
        }
    }
    run.params = std::move(params);
    final_partition = std::move(z);
    return run;
}

}  // namespace detail

/// CEM with restarts; keeps the run with the highest final complete-data
/// log-likelihood. The final partition is the last hard labeling.
inline FitReport cem_fit(const TimeSeries& series, int num_classes, const PolynomialBasis& basis,
                         const CemConfig& config = {}) {
    config.validate();
    if (num_classes < 1 || static_cast<std::size_t>(num_classes) > series.size()) {
        throw std::invalid_argument("cem_fit: K must satisfy 1 <= K <= n");
    }
    const auto started = std::chrono::steady_clock::now();
    FitReport report;
    if (series.size() < static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(basis.dim())) {
        report.warnings.push_back("n < K*(p+1): classes may be under-determined");
    }

    std::optional<detail::RunResult> best;
    OrderedPartition best_partition;
    int next_draw = config.n_restarts;
    for (int r = 0; r < config.n_restarts; ++r) {
        int draw = r;
        for (int attempt = 0; attempt <= detail::kMaxRedraws; ++attempt) {
            try {
                OrderedPartition partition;
                auto run = detail::cem_run(series, basis, initialize(series, num_classes, basis, config.seed, draw),
                                           config, partition);
                report.restart_final_objectives.push_back(run.trace.back());
                if (!best || run.trace.back() > best->trace.back()) {
                    best = std::move(run);
                    best_partition = std::move(partition);
                    report.restart_index_selected = r;
                }
                break;
            } catch (const EmptyClassError&) {
                ++report.abandoned_restarts;
                draw = next_draw++;
            }
        }
    }
    if (!best) throw std::runtime_error("cem_fit: every restart produced an empty class");

    report.params = std::move(best->params);
    report.partition = std::move(best_partition);
    report.has_empty_classes = !report.partition.all_nonempty();
    report.posterior_labels = argmax_labels(log_joint_matrix(series, report.params));
    report.loglik_trace = std::move(best->trace);
    report.irls_iteration_counts = std::move(best->irls_counts);
    report.n_iterations = best->iterations;
    report.converged = best->converged;
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

/// Iterations and wall time of EM and CEM on the same data and seeds.
struct EmCemComparison {
    int em_iterations = 0;
    int cem_iterations = 0;
    double em_seconds = 0.0;
    double cem_seconds = 0.0;
    double em_loglik = 0.0;
    double cem_complete_loglik = 0.0;
    std::vector<std::size_t> em_boundaries;
    std::vector<std::size_t> cem_boundaries;

    friend bool operator==(const EmCemComparison&, const EmCemComparison&) = default;
};

inline EmCemComparison compare_em_cem(const TimeSeries& series, int num_classes, const PolynomialBasis& basis,
                                      const EmConfig& em_config, const CemConfig& cem_config) {
    const FitReport em = em_fit(series, num_classes, basis, em_config);
    const FitReport cem = cem_fit(series, num_classes, basis, cem_config);
    return {em.n_iterations, cem.n_iterations, em.wall_clock_seconds, cem.wall_clock_seconds, em.final_objective(),
            cem.final_objective(), em.partition.boundaries(), cem.partition.boundaries()};
}

}  // namespace ordseg

#endif  // ORDSEG_CEM_HPP
