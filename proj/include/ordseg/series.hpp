// Time series data model, polynomial design expansion and ordered partitions.
#ifndef ORDSEG_SERIES_HPP
#define ORDSEG_SERIES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ordseg {

/// Paired sampling instants and scalar observations. t is strictly increasing.
class TimeSeries {
public:
    TimeSeries(std::vector<double> t, std::vector<double> y) : t_(std::move(t)), y_(std::move(y)) {
        if (t_.empty() || t_.size() != y_.size()) {
            throw std::invalid_argument("TimeSeries: t and y must have the same non-zero length");
        }
        for (std::size_t i = 0; i < t_.size(); ++i) {
            if (!std::isfinite(t_[i]) || !std::isfinite(y_[i])) {
                throw std::domain_error("TimeSeries: non-finite value at index " + std::to_string(i));
            }
            if (i > 0 && !(t_[i] > t_[i - 1])) {
                throw std::invalid_argument("TimeSeries: t is not strictly increasing at index " +
                                            std::to_string(i));
            }
        }
    }

    std::size_t size() const noexcept { return t_.size(); }
    const std::vector<double>& t() const noexcept { return t_; }
    const std::vector<double>& y() const noexcept { return y_; }

    Eigen::Map<const Eigen::VectorXd> t_vec() const {
        return {t_.data(), static_cast<Eigen::Index>(t_.size())};
    }
    Eigen::Map<const Eigen::VectorXd> y_vec() const {
        return {y_.data(), static_cast<Eigen::Index>(y_.size())};
    }

private:
    std::vector<double> t_;
    std::vector<double> y_;
};

/// Monomial basis (1, t, ..., t^p).
class PolynomialBasis {
public:
    explicit PolynomialBasis(int degree) : degree_(degree) {
        if (degree < 0) throw std::invalid_argument("PolynomialBasis: degree must be >= 0");
    }

    int degree() const noexcept { return degree_; }
    Eigen::Index dim() const noexcept { return degree_ + 1; }

    Eigen::RowVectorXd design(double t) const {
        Eigen::RowVectorXd row(dim());
        double power = 1.0;
        for (Eigen::Index j = 0; j < dim(); ++j) {
            row(j) = power;
            power *= t;
        }
        return row;
    }

private:
    int degree_;
};

/// n x (p+1) matrix whose row i is basis.design(t_i).
inline Eigen::MatrixXd design_matrix(const TimeSeries& series, const PolynomialBasis& basis) {
    const auto n = static_cast<Eigen::Index>(series.size());
    Eigen::MatrixXd x(n, basis.dim());
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = basis.design(series.t()[static_cast<std::size_t>(i)]);
    return x;
}

/// Lower bound on class variances: 1e-6 times the sample variance of y, or 1e-12
/// when y is constant.
inline double variance_floor(const TimeSeries& series) {
    const auto y = series.y_vec();
    const double mean = y.mean();
    const double var = (y.array() - mean).square().mean();
    return var > 0.0 ? 1e-6 * var : 1e-12;
}

/// K contiguous segments over n points. Stored 0-based half-open: segment k covers
/// [boundaries[k], boundaries[k+1]). Segments may be empty when a partition is
/// extracted from a labeling in which some class wins nowhere.
class OrderedPartition {
public:
    OrderedPartition() = default;

    explicit OrderedPartition(std::vector<std::size_t> boundaries) : boundaries_(std::move(boundaries)) {
        if (boundaries_.size() < 2 || boundaries_.front() != 0) {
            throw std::invalid_argument("OrderedPartition: boundaries must start at 0 and hold K+1 entries");
        }
        for (std::size_t k = 1; k < boundaries_.size(); ++k) {
            if (boundaries_[k] < boundaries_[k - 1]) {
                throw std::invalid_argument("OrderedPartition: boundaries must be non-decreasing");
            }
        }
        if (boundaries_.back() == 0) throw std::invalid_argument("OrderedPartition: n must be >= 1");
    }

    /// Builds a partition from 0-based labels that must be non-decreasing and < K.
    static OrderedPartition from_labels(const std::vector<int>& labels, int num_classes) {
        if (labels.empty() || num_classes < 1) throw std::invalid_argument("from_labels: empty input");
        std::vector<std::size_t> b(static_cast<std::size_t>(num_classes) + 1, 0);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || labels[i] >= num_classes) {
                throw std::domain_error("from_labels: label out of range at index " + std::to_string(i));
            }
            if (i > 0 && labels[i] < labels[i - 1]) {
                throw std::invalid_argument("from_labels: labels must be non-decreasing");
            }
        }
        // boundaries[k] = number of points with label < k
        std::size_t i = 0;
        for (int k = 0; k <= num_classes; ++k) {
            while (i < labels.size() && labels[i] < k) ++i;
            b[static_cast<std::size_t>(k)] = i;
        }
        b.back() = labels.size();
        return OrderedPartition(std::move(b));
    }

    int num_classes() const noexcept { return static_cast<int>(boundaries_.size()) - 1; }
    std::size_t size() const noexcept { return boundaries_.empty() ? 0 : boundaries_.back(); }
    const std::vector<std::size_t>& boundaries() const noexcept { return boundaries_; }

    std::size_t segment_begin(int k) const { return boundaries_.at(static_cast<std::size_t>(k)); }
    std::size_t segment_end(int k) const { return boundaries_.at(static_cast<std::size_t>(k) + 1); }
    std::size_t segment_size(int k) const { return segment_end(k) - segment_begin(k); }

    /// 0-based class of 0-based point i.
    int label(std::size_t i) const {
        if (i >= size()) throw std::out_of_range("OrderedPartition::label");
        const auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), i);
        return static_cast<int>(it - boundaries_.begin()) - 1;
    }

    std::vector<int> labels() const {
        std::vector<int> out(size());
        for (int k = 0; k < num_classes(); ++k) {
            std::fill(out.begin() + static_cast<std::ptrdiff_t>(segment_begin(k)),
                      out.begin() + static_cast<std::ptrdiff_t>(segment_end(k)), k);
        }
        return out;
    }

    std::vector<int> empty_classes() const {
        std::vector<int> out;
        for (int k = 0; k < num_classes(); ++k)
            if (segment_size(k) == 0) out.push_back(k);
        return out;
    }

    bool all_nonempty() const { return empty_classes().empty(); }

    /// n x K indicator matrix z_ik.
    Eigen::MatrixXd indicators() const {
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size()), num_classes());
        for (int k = 0; k < num_classes(); ++k)
            for (std::size_t i = segment_begin(k); i < segment_end(k); ++i) z(static_cast<Eigen::Index>(i), k) = 1.0;
        return z;
    }

    friend bool operator==(const OrderedPartition&, const OrderedPartition&) = default;

private:
    std::vector<std::size_t> boundaries_;
};

}  // namespace ordseg

#endif  // ORDSEG_SERIES_HPP
