#include "evergreen/symmetric_eigen.hpp"

#include "evergreen/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace evergreen {

namespace {

void check_input(const Eigen::MatrixXd& c, double delta) {
    if (c.rows() != c.cols()) throw ConfigError("eigendecompose_symmetric: matrix is not square");
    if (!(delta > 0.0)) throw ConfigError("eigendecompose_symmetric: delta must be positive");
    if (!c.allFinite()) throw ConfigError("eigendecompose_symmetric: matrix has non-finite entries");
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = i + 1; j < c.cols(); ++j)
            if (std::abs(c(i, j) - c(j, i)) > 1e-10 * scale)
                throw ConfigError("eigendecompose_symmetric: matrix is not symmetric");
}

double off_diagonal_norm2(const Eigen::MatrixXd& a) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < a.rows(); ++p)
        for (Eigen::Index q = p + 1; q < a.cols(); ++q) off += a(p, q) * a(p, q);
    return off;
}

void rotate(Eigen::MatrixXd& a, Eigen::MatrixXd& v, Eigen::Index p, Eigen::Index q) {
    const double apq = a(p, q);
    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
    const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;
    const Eigen::Index n = a.rows();

    for (Eigen::Index r = 0; r < n; ++r) {
        if (r == p || r == q) continue;
        const double arp = a(r, p);
        const double arq = a(r, q);
        a(r, p) = a(p, r) = c * arp - s * arq;
        a(r, q) = a(q, r) = s * arp + c * arq;
    }
    a(p, p) -= t * apq;
    a(q, q) += t * apq;
    a(p, q) = a(q, p) = 0.0;

    for (Eigen::Index r = 0; r < n; ++r) {
        const double vrp = v(r, p);
        const double vrq = v(r, q);
        v(r, p) = c * vrp - s * vrq;
        v(r, q) = s * vrp + c * vrq;
    }
}

}  // namespace

SymmetricEigen eigendecompose_symmetric(const Eigen::MatrixXd& covariance, double delta, int max_sweeps) {
    check_input(covariance, delta);
    const Eigen::Index n = covariance.rows();

    Eigen::MatrixXd a = 0.5 * (covariance + covariance.transpose()) * delta;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    const double total = a.squaredNorm();
    const double tol2 = 1e-28 * total;

    int sweeps = 0;
    while (off_diagonal_norm2(a) > tol2) {
        if (sweeps == max_sweeps)
            throw NumericalError("Jacobi eigensolver did not converge in " + std::to_string(max_sweeps) + " sweeps");
        ++sweeps;
        for (Eigen::Index p = 0; p < n - 1; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q)
                if (a(p, q) != 0.0) rotate(a, v, p, q);
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    SymmetricEigen out;
    out.sweeps = sweeps;
    out.eigenvalues.resize(static_cast<std::size_t>(n));
    out.eigenfunctions.resize(n, n);
    const double rescale = 1.0 / std::sqrt(delta);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        out.eigenvalues[static_cast<std::size_t>(k)] = a(src, src);
        Eigen::RowVectorXd phi = v.col(src).transpose() * rescale;

        const double sum = phi.sum();
        double sign = 1.0;
        if (std::abs(sum) > 1e-12 * phi.cwiseAbs().sum()) {
            sign = sum > 0.0 ? 1.0 : -1.0;
        } else {
            for (Eigen::Index j = 0; j < n; ++j)
                if (std::abs(phi(j)) > 1e-12) {
                    sign = phi(j) > 0.0 ? 1.0 : -1.0;
                    break;
                }
        }
        out.eigenfunctions.row(k) = sign * phi;
    }
    return out;
}

}  // namespace evergreen
