// Small dense solvers shared by the estimators.
#ifndef ORDSEG_LINALG_HPP
#define ORDSEG_LINALG_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace ordseg::detail {

/// Solves A x = b for symmetric positive semi-definite A. When the LDLT
/// factorization is not positive definite, a diagonal jitter of
/// jitter_scale * trace(A) is added (growing tenfold until it succeeds).
template <typename Matrix, typename Vector>
Eigen::VectorXd solve_spd_jittered(const Matrix& a, const Vector& b, double jitter_scale = 1e-10) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    auto ok = [&](const Eigen::LDLT<Eigen::MatrixXd>& f) {
        if (f.info() != Eigen::Success || !f.isPositive()) return false;
        const auto d = f.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        return d.minCoeff() > dmax * 1e3 * std::numeric_limits<double>::epsilon();
    };
    if (ok(ldlt)) return ldlt.solve(Eigen::VectorXd(b));

    double trace = a.trace();
    if (!(trace > 0.0)) trace = 1.0;
    double jitter = jitter_scale * trace;
    Eigen::MatrixXd shifted = a;
    for (int attempt = 0; attempt < 20; ++attempt) {
        shifted.diagonal() = a.diagonal().array() + jitter;
        ldlt.compute(shifted);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) break;
        jitter *= 10.0;
    }
    return ldlt.solve(Eigen::VectorXd(b));
}

/// log(sum(exp(v))) without overflow.
template <typename Vector>
double log_sum_exp(const Vector& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

/// log_sum_exp of every row of an n x K matrix, computed column-wise.
inline Eigen::ArrayXd row_log_sum_exp(const Eigen::MatrixXd& m) {
    const Eigen::ArrayXd mx = m.rowwise().maxCoeff().array();
    const Eigen::ArrayXd safe = mx.isFinite().select(mx, 0.0);
    Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(m.rows());
    for (Eigen::Index k = 0; k < m.cols(); ++k) sum += (m.col(k).array() - safe).exp();
    return mx.isFinite().select(safe + sum.log(), mx);
}

}  // namespace ordseg::detail

#endif  // ORDSEG_LINALG_HPP
