#include "adtool/taylor_kernels.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "adtool/calc_tree.hpp"
#include "adtool/config.hpp"
#include "adtool/error.hpp"

namespace adtool {

namespace {

[[noreturn]] void domain_fail(const UnaryOp& op, double point, const char* what) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s kernel: %s (point %.17g)", op_name(op).c_str(), what,
                  point);
    throw DomainError(buf);
}

double ipow(double x, int e) {
    if (e < 0)
        return 1.0 / ipow(x, -e);
    double r = 1.0;
    while (e > 0) {
        if (e & 1)
            r *= x;
        x *= x;
        e >>= 1;
    }
    return r;
}

// f^(k)(x) = -2/sqrt(pi) * p_{k-1}(x) * exp(-x^2) with p_0 = 1 and
// p_{j+1} = p_j' - 2x p_j. The polynomial recurrence is run in exact integer
// arithmetic; coefficients stay far below 2^63 for any reachable order.
std::vector<double> erfc_coeffs(double x, int order) {
    std::vector<std::vector<long long>> p(static_cast<std::size_t>(order));
    p[0] = {1};
    for (int j = 0; j + 1 < order; ++j) {
        const auto& prev = p[j];
        std::vector<long long> next(prev.size() + 1, 0);
        for (std::size_t i = 0; i + 1 < prev.size(); ++i)
            next[i] += static_cast<long long>(i + 1) * prev[i + 1];
        for (std::size_t i = 0; i < prev.size(); ++i)
            next[i + 1] -= 2 * prev[i];
        p[j + 1] = std::move(next);
    }
    const double scale = -2.0 * std::numbers::inv_sqrtpi * std::exp(-x * x);
    std::vector<double> c(static_cast<std::size_t>(order));
    double kfact = 1.0;
    for (int k = 1; k <= order; ++k) {
        kfact *= k;
        const auto& poly = p[static_cast<std::size_t>(k - 1)];
        double v = 0.0;
        for (std::size_t i = poly.size(); i-- > 0;)
            v = v * x + static_cast<double>(poly[i]);
        c[static_cast<std::size_t>(k - 1)] = scale * v / kfact;
    }
    return c;
}

// tan' = 1 + tan^2 propagated through the series of tan around the point:
// tau_0 = y, (m+1) tau_{m+1} = [m == 0] + sum_{j<=m} tau_j tau_{m-j}.
std::vector<double> tan_coeffs(double y, int order) {
    std::vector<double> tau(static_cast<std::size_t>(order) + 1);
    tau[0] = y;
    for (int m = 0; m < order; ++m) {
        double s = (m == 0) ? 1.0 : 0.0;
        for (int j = 0; j <= m; ++j)
            s += tau[static_cast<std::size_t>(j)] * tau[static_cast<std::size_t>(m - j)];
        tau[static_cast<std::size_t>(m + 1)] = s / (m + 1);
    }
    return {tau.begin() + 1, tau.end()};
}

} // namespace

UnivariateCoeffs univariate_coeffs(const UnaryOp& op, double stored, int order) {
    if (order < 1)
        throw UsageError("kernel order must be at least 1");
    if (order > order_cap())
        throw UsageError("kernel order " + std::to_string(order) + " exceeds order cap " +
                         std::to_string(order_cap()));
    std::vector<double> c(static_cast<std::size_t>(order), 0.0);
    switch (op.kind) {
    case UnaryKind::Neg:
        c[0] = -1.0;
        break;
    case UnaryKind::Exp: { // stored = output y; c_k = y/k!
        double kfact = 1.0;
        for (int k = 1; k <= order; ++k) {
            kfact *= k;
            c[static_cast<std::size_t>(k - 1)] = stored / kfact;
        }
        break;
    }
    case UnaryKind::Log: { // stored = input x; c_k = (-1)^(k-1)/(k x^k)
        if (stored <= 0.0)
            domain_fail(op, stored, "input must be positive");
        double xp = 1.0;
        for (int k = 1; k <= order; ++k) {
            xp *= stored;
            c[static_cast<std::size_t>(k - 1)] = ((k % 2) ? 1.0 : -1.0) / (k * xp);
        }
        break;
    }
    case UnaryKind::Recip: { // stored = input x; c_k = (-1)^k / x^(k+1)
        if (stored == 0.0)
            domain_fail(op, stored, "input must be nonzero");
        double xp = stored;
        for (int k = 1; k <= order; ++k) {
            xp *= stored;
            c[static_cast<std::size_t>(k - 1)] = ((k % 2) ? -1.0 : 1.0) / xp;
        }
        break;
    }
    case UnaryKind::Sqrt: { // stored = output y; c_k = binom(1/2,k) y / (y^2)^k
        if (stored <= 0.0)
            domain_fail(op, stored, "output must be positive");
        const double x = stored * stored;
        double bin = 1.0, xp = 1.0;
        for (int k = 1; k <= order; ++k) {
            bin *= (0.5 - (k - 1)) / k;
            xp *= x;
            c[static_cast<std::size_t>(k - 1)] = bin * stored / xp;
        }
        break;
    }
    case UnaryKind::Sin:
    case UnaryKind::Cos: { // stored = input x; derivatives cycle with period 4
        const double s = std::sin(stored), co = std::cos(stored);
        const double sin_cycle[4] = {s, co, -s, -co};
        const double cos_cycle[4] = {co, -s, -co, s};
        const double* cycle = (op.kind == UnaryKind::Sin) ? sin_cycle : cos_cycle;
        double kfact = 1.0;
        for (int k = 1; k <= order; ++k) {
            kfact *= k;
            c[static_cast<std::size_t>(k - 1)] = cycle[k % 4] / kfact;
        }
        break;
    }
    case UnaryKind::Tan: // stored = output y
        c = tan_coeffs(stored, order);
        break;
    case UnaryKind::Erfc: // stored = input x
        c = erfc_coeffs(stored, order);
        break;
    case UnaryKind::PowConst: { // stored = input x; c_k = binom(m,k) x^(m-k)
        const int m = op.exponent;
        if (m < 0 && stored == 0.0)
            domain_fail(op, stored, "input must be nonzero for negative exponents");
        double bin = 1.0;
        for (int k = 1; k <= order; ++k) {
            bin *= static_cast<double>(m - k + 1) / k;
            double& ck = c[static_cast<std::size_t>(k - 1)];
            if (bin == 0.0)
                ck = 0.0; // k > m for positive m
            else if (stored == 0.0)
                ck = (m == k) ? bin : 0.0;
            else
                ck = bin * ipow(stored, m - k);
        }
        break;
    }
    }
    for (double v : c)
        if (!std::isfinite(v))
            domain_fail(op, stored, "non-finite coefficient");
    return UnivariateCoeffs{std::move(c)};
}

LocalExpansion local_expansion(const Graph& g, NodeRef node, const CalcTree& ct, int order) {
    if (order < 1)
        throw UsageError("expansion order must be at least 1");
    const Node& n = g.node(node);
    LocalExpansion e;
    switch (n.kind) {
    case Node::Kind::Var:
    case Node::Kind::Const:
        throw UsageError("leaf nodes have no local expansion: " + g.describe(node));
    case Node::Kind::Unary: {
        NodeRef child = g.ref(n.a);
        if (g.node_at(n.a).kind == Node::Kind::Const)
            return e; // constant operand carries no perturbation
        const auto sc = storage_class(n.uop);
        const double stored = sc.needs_output ? ct.get(node) : ct.get(child);
        auto coeffs = univariate_coeffs(n.uop, stored, order);
        for (int k = 1; k <= order; ++k)
            e.terms.push_back(LocalTerm{{{child, k}}, coeffs.at(k)});
        break;
    }
    case Node::Kind::Binary: {
        NodeRef left = g.ref(n.a), right = g.ref(n.b);
        const bool lconst = g.node_at(n.a).kind == Node::Kind::Const;
        const bool rconst = g.node_at(n.b).kind == Node::Kind::Const;
        auto add_term = [&e](std::vector<std::pair<NodeRef, int>> f, double coeff) {
            for (auto& t : e.terms)
                if (t.factors == f) {
                    t.coeff += coeff;
                    return;
                }
            e.terms.push_back(LocalTerm{std::move(f), coeff});
        };
        switch (n.bop) {
        case BinaryOp::Add:
        case BinaryOp::Sub: {
            const double rsign = (n.bop == BinaryOp::Sub) ? -1.0 : 1.0;
            if (!lconst)
                add_term({{left, 1}}, 1.0);
            if (!rconst)
                add_term({{right, 1}}, rsign);
            break;
        }
        case BinaryOp::Mul:
            if (!lconst)
                add_term({{left, 1}}, ct.get(right));
            if (!rconst)
                add_term({{right, 1}}, ct.get(left));
            if (!lconst && !rconst) {
                if (n.a == n.b)
                    add_term({{left, 2}}, 1.0);
                else
                    add_term({{left, 1}, {right, 1}}, 1.0);
            }
            break;
        }
        break;
    }
    }
    return e;
}

} // namespace adtool
