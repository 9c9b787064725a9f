#pragma once

#include <vector>

#include "adtool/graph.hpp"

namespace adtool {

class CalcTree;

// Taylor coefficients of a primitive's perturbation series: c_k = f^(k)/k!
// for k = 1..order. There is no constant term; a perturbation series starts
// at first order.
struct UnivariateCoeffs {
    std::vector<double> coeffs; // coeffs[k-1] = c_k

    int order() const noexcept { return static_cast<int>(coeffs.size()); }
    double at(int k) const { return coeffs.at(static_cast<std::size_t>(k) - 1); }
};

// `stored` is the value the op's storage class retains: the input for
// erfc/log/sin/cos/recip/pow, the output for exp/sqrt/tan.
UnivariateCoeffs univariate_coeffs(const UnaryOp& op, double stored, int order);

// One term of a node's local expansion: coefficient times a monomial over the
// operand perturbations.
struct LocalTerm {
    std::vector<std::pair<NodeRef, int>> factors;
    double coeff = 0.0;
};

// A node's output perturbation as a polynomial in its operands'
// perturbations: {eps_child^k: c_k} for univariates, the exact trinomial
// eps_P = V2*eps_V1 + V1*eps_V2 + eps_V1*eps_V2 for mul, and +/-1 terms for
// add/sub/neg.
struct LocalExpansion {
    std::vector<LocalTerm> terms;
};

LocalExpansion local_expansion(const Graph& g, NodeRef node, const CalcTree& ct, int order);

} // namespace adtool
