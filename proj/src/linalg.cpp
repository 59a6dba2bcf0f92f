#include "linalg.hpp"

#include <Eigen/SparseLU>

#include <cmath>

namespace episteady::detail {

Eigen::VectorXd solve_linear(const SparseMatrix& a, const Eigen::VectorXd& b, ErrorCode on_singular,
                             const std::string& what) {
    const Eigen::Index n = a.rows();
    if (n == 0) return Eigen::VectorXd(0);
    Eigen::VectorXd x;
    if (n <= kDenseSolveLimit) {
        const Eigen::MatrixXd dense(a);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(dense);
        if (!lu.isInvertible()) throw Error(on_singular, what + " is singular");
        x = lu.solve(b);
    } else {
        Eigen::SparseMatrix<double, Eigen::ColMajor> col(a);
        col.makeCompressed();
        Eigen::SparseLU<Eigen::SparseMatrix<double, Eigen::ColMajor>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(col);
        if (lu.info() != Eigen::Success) throw Error(on_singular, what + " is singular (sparse LU failed)");
        x = lu.solve(b);
        if (lu.info() != Eigen::Success) throw Error(on_singular, what + " could not be solved");
    }
    if (!x.allFinite()) throw Error(on_singular, what + " produced non-finite values");
    const double residual = (a * x - b).lpNorm<Eigen::Infinity>();
    const double scale = 1.0 + b.lpNorm<Eigen::Infinity>() + x.lpNorm<Eigen::Infinity>();
    if (residual > 1e-8 * scale) throw Error(on_singular, what + " is numerically singular");
    return x;
}

SparseMatrix restrict_to(const SparseMatrix& m, const std::vector<StateIndex>& keep) {
    std::vector<Eigen::Index> position(static_cast<std::size_t>(m.rows()), -1);
    for (std::size_t i = 0; i < keep.size(); ++i) position[keep[i]] = static_cast<Eigen::Index>(i);
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t i = 0; i < keep.size(); ++i)
        for (SparseMatrix::InnerIterator it(m, static_cast<Eigen::Index>(keep[i])); it; ++it) {
            const auto j = position[static_cast<std::size_t>(it.col())];
            if (j >= 0) triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), it.value());
        }
    SparseMatrix out(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(keep.size()));
    out.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

} // namespace episteady::detail
