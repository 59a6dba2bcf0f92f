#pragma once

#include "episteady/error.hpp"
#include "episteady/mdp.hpp"

#include <string>
#include <vector>

namespace episteady::detail {

/// Systems up to this size are solved densely; larger ones go through sparse LU.
inline constexpr Eigen::Index kDenseSolveLimit = 500;

/// Solves A x = b. Throws Error(on_singular) when A is numerically singular.
Eigen::VectorXd solve_linear(const SparseMatrix& a, const Eigen::VectorXd& b, ErrorCode on_singular,
                             const std::string& what);

/// Submatrix of `m` on the index set `keep` (rows and columns).
SparseMatrix restrict_to(const SparseMatrix& m, const std::vector<StateIndex>& keep);

} // namespace episteady::detail
