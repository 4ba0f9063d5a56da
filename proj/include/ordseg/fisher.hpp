// Exact optimal segmentation into K ordered segments by dynamic programming
// over an additive within-segment cost (Fisher's algorithm).
#ifndef ORDSEG_FISHER_HPP
#define ORDSEG_FISHER_HPP

#include "ordseg/model.hpp"
#include "ordseg/series.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ordseg {

/// Within-segment cost: inertia about the mean, or residual sum of squares of
/// a degree-p least-squares polynomial.
struct DiameterKind {
    enum class Type { ConstantMean, Polynomial };
    Type type = Type::ConstantMean;
    int degree = 0;

    static DiameterKind constant_mean() { return {Type::ConstantMean, 0}; }
    static DiameterKind polynomial(int p) {
        if (p < 0) throw std::invalid_argument("DiameterKind: degree must be >= 0");
        return {Type::Polynomial, p};
    }
    /// Degree of the fitted polynomial (0 for ConstantMean).
    int fit_degree() const noexcept { return type == Type::ConstantMean ? 0 : degree; }
};

/// Largest series the dense cost matrix is built for (n^2 doubles).
inline constexpr std::size_t kMaxFisherPoints = 20000;

/// Dense n x n matrix of segment costs; entry (i, j), i <= j, is the cost of
/// the segment covering 0-based points i..j inclusive. Entries below the
/// diagonal are unused.
class CostMatrix {
public:
    explicit CostMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
    const double* row(std::size_t i) const noexcept { return data_.data() + i * n_; }

private:
    std::size_t n_;
    std::vector<double> data_;
};

namespace detail {

/// Fills row `start` of the cost matrix by extending the segment end one point
/// at a time and updating the normal-equation sums. Time and y are shifted to
/// the segment's first point; the residual sum of squares is invariant to
/// that shift because the basis contains the constant.
template <int MaxDim>
void fill_cost_row(const TimeSeries& series, int degree, std::size_t start, CostMatrix& cost) {
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, MaxDim, MaxDim>;
    using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, MaxDim, 1>;
    const auto& t = series.t();
    const auto& y = series.y();
    const std::size_t n = series.size();
    const Eigen::Index dim = degree + 1;

    Mat gram = Mat::Zero(dim, dim);
    Vec xty = Vec::Zero(dim);
    Vec x(dim);
    double yty = 0.0;
    Eigen::LLT<Mat> llt(dim);

    for (std::size_t j = start; j < n; ++j) {
        const double s = t[j] - t[start];
        const double v = y[j] - y[start];
        double power = 1.0;
        for (Eigen::Index a = 0; a < dim; ++a, power *= s) x(a) = power;
        gram.template selfadjointView<Eigen::Lower>().rankUpdate(x);
        xty += v * x;
        yty += v * v;

        const std::size_t len = j - start + 1;
        if (len <= static_cast<std::size_t>(dim)) {
            cost(start, j) = 0.0;
            continue;
        }
        double sse;
        if (dim == 1) {
            const double mean = xty(0) / gram(0, 0);
            sse = yty - mean * xty(0);
        } else {
            llt.compute(gram);
            if (llt.info() != Eigen::Success) {
                Mat shifted = gram.template selfadjointView<Eigen::Lower>();
                double jitter = 1e-10 * gram.trace();
                for (int attempt = 0; attempt < 20; ++attempt, jitter *= 10.0) {
                    shifted.diagonal() = gram.diagonal().array() + jitter;
                    llt.compute(shifted);
                    if (llt.info() == Eigen::Success) break;
                }
            }
            const Vec beta = llt.solve(xty);
            sse = yty - beta.dot(xty);
        }
        cost(start, j) = sse > 0.0 ? sse : 0.0;
    }
}

}  // namespace detail

inline CostMatrix compute_cost_matrix(const TimeSeries& series, const DiameterKind& kind) {
    const std::size_t n = series.size();
    if (n > kMaxFisherPoints) {
        throw std::invalid_argument("compute_cost_matrix: n exceeds " + std::to_string(kMaxFisherPoints));
    }
    CostMatrix cost(n);
    const int degree = kind.fit_degree();
    for (std::size_t i = 0; i < n; ++i) {
        if (degree < 8) {
            detail::fill_cost_row<8>(series, degree, i, cost);
        } else {
            detail::fill_cost_row<Eigen::Dynamic>(series, degree, i, cost);
        }
    }
    return cost;
}

struct SegmentationResult {
    OrderedPartition partition;
    std::vector<ClassRegression> per_segment_fits;
    double total_cost = 0.0;
};

/// Global minimizer of sum_k D(I_k) over ordered partitions into K non-empty
/// segments, for a precomputed cost matrix.
///
/// The recurrence runs over suffixes: best(k, i) is the cheapest split of
/// points i..n-1 into k segments. Reconstruction walks forward and takes the
/// earliest segment end that attains the optimum (strict-less scan), which
/// yields the lexicographically smallest boundary vector among minimizers.
inline SegmentationResult fisher_segment(const TimeSeries& series, int num_segments, const DiameterKind& kind,
                                         const CostMatrix& cost) {
    const std::size_t n = series.size();
    if (num_segments < 1 || static_cast<std::size_t>(num_segments) > n) {
        throw std::invalid_argument("fisher_segment: K must satisfy 1 <= K <= n (K=" + std::to_string(num_segments) +
                                    ", n=" + std::to_string(n) + ")");
    }
    if (cost.size() != n) throw std::invalid_argument("fisher_segment: cost matrix size mismatch");
    const auto k_count = static_cast<std::size_t>(num_segments);
    constexpr double inf = std::numeric_limits<double>::infinity();

    // best[k-1][i], end[k-1][i]: last index of the first segment of the optimal
    // k-split of the suffix starting at i.
    std::vector<std::vector<double>> best(k_count, std::vector<double>(n + 1, inf));
    std::vector<std::vector<std::size_t>> end(k_count, std::vector<std::size_t>(n, 0));
    for (std::size_t i = 0; i < n; ++i) {
        best[0][i] = cost(i, n - 1);
        end[0][i] = n - 1;
    }
    for (std::size_t k = 2; k <= k_count; ++k) {
        const auto& prev = best[k - 2];
        auto& cur = best[k - 1];
        for (std::size_t i = 0; i + k <= n; ++i) {
            const double* row = cost.row(i);
            double value = inf;
            std::size_t arg = i;
            for (std::size_t j = i; j + k <= n; ++j) {
                const double candidate = row[j] + prev[j + 1];
                if (candidate < value) {
                    value = candidate;
                    arg = j;
                }
            }
            cur[i] = value;
            end[k - 1][i] = arg;
        }
    }

    std::vector<std::size_t> boundaries{0};
    std::size_t start = 0;
    for (std::size_t k = k_count; k >= 2; --k) {
        const std::size_t last = end[k - 1][start];
        boundaries.push_back(last + 1);
        start = last + 1;
    }
    boundaries.push_back(n);

    SegmentationResult result;
    result.partition = OrderedPartition(std::move(boundaries));
    result.total_cost = best[k_count - 1][0];

    const PolynomialBasis basis(kind.fit_degree());
    const Eigen::MatrixXd x = design_matrix(series, basis);
    const Eigen::VectorXd y = series.y_vec();
    const double floor = variance_floor(series);
    for (int k = 0; k < num_segments; ++k) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        w.segment(static_cast<Eigen::Index>(result.partition.segment_begin(k)),
                  static_cast<Eigen::Index>(result.partition.segment_size(k)))
            .setOnes();
        result.per_segment_fits.push_back(weighted_class_fit(x, y, w, floor));
    }
    return result;
}

inline SegmentationResult fisher_segment(const TimeSeries& series, int num_segments, const DiameterKind& kind) {
    if (num_segments < 1 || static_cast<std::size_t>(num_segments) > series.size()) {
        throw std::invalid_argument("fisher_segment: K must satisfy 1 <= K <= n (K=" + std::to_string(num_segments) +
                                    ", n=" + std::to_string(series.size()) + ")");
    }
    return fisher_segment(series, num_segments, kind, compute_cost_matrix(series, kind));
}

}  // namespace ordseg

#endif  // ORDSEG_FISHER_HPP
