// SPDX-License-Identifier: Apache-2.0
//
// Independent oracles used only by tests. These deliberately share no code
// with the implementation paths they check.
#pragma once

#include <cstdint>
#include <vector>

namespace tstcd::test {

// Singular values of an m x n row-major matrix by one-sided Jacobi rotations,
// sorted descending.
std::vector<double> jacobi_singular_values(const std::vector<double>& a, std::int64_t m,
                                           std::int64_t n);

// Rank by counting singular values above tol * sigma_max.
std::int64_t svd_rank(const std::vector<double>& a, std::int64_t m, std::int64_t n, double tol);

// Exact optimum of the transportation LP
//   min <P, W>  s.t.  P >= 0, row sums = a, col sums = b
// by enumerating basic feasible solutions (vertices). Intended for n, m <= 4.
double transport_lp_optimum(const std::vector<double>& w, std::int64_t n, std::int64_t m,
                            const std::vector<double>& a, const std::vector<double>& b);

}  // namespace tstcd::test
