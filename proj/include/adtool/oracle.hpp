#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "adtool/deriv_request.hpp"
#include "adtool/graph.hpp"

namespace adtool {

// Shared shape of a family of jets: the active variables, the truncation
// order, and the graded-lex monomial numbering (rank 0 is the primal).
class JetSpace {
  public:
    static std::shared_ptr<const JetSpace> create(std::vector<VarId> vars, int max_order);

    const std::vector<VarId>& vars() const noexcept { return vars_; }
    int max_order() const noexcept { return max_order_; }
    int term_count() const noexcept { return static_cast<int>(ranks_.size()); }
    std::optional<int> var_position(const VarId& v) const;
    const std::vector<int>& exponents(int rank) const { return ranks_[static_cast<std::size_t>(rank)]; }
    int index_of(const std::vector<int>& exps) const; // -1 if degree > max_order
    int product_index(int i, int j) const {
        return prod_[static_cast<std::size_t>(i) * ranks_.size() + static_cast<std::size_t>(j)];
    }

  private:
    JetSpace() = default;
    std::vector<VarId> vars_;
    int max_order_ = 0;
    std::vector<std::vector<int>> ranks_;
    std::map<std::vector<int>, int> index_;
    std::vector<int> prod_; // rank x rank -> rank of the product, -1 if truncated
};

// Truncated multivariate Taylor polynomial: the forward-mode referee. Jets
// carry every monomial up to the truncation order, with no pruning, so they
// stay independent of the engine's selectivity logic.
class Jet {
  public:
    explicit Jet(std::shared_ptr<const JetSpace> space);

    const JetSpace& space() const noexcept { return *space_; }
    const std::shared_ptr<const JetSpace>& space_ptr() const noexcept { return space_; }
    double primal() const noexcept { return c_[0]; }
    double coeff(int rank) const { return c_[static_cast<std::size_t>(rank)]; }
    double& coeff(int rank) { return c_[static_cast<std::size_t>(rank)]; }
    double coeff_of(const MultiIndex& m) const;
    // Mixed derivative: coefficient times the product of factorials.
    double derivative(const MultiIndex& m) const;

  private:
    std::shared_ptr<const JetSpace> space_;
    std::vector<double> c_;
};

Jet jet_lift(const std::shared_ptr<const JetSpace>& space, const VarId& v, double value);
Jet jet_const(const std::shared_ptr<const JetSpace>& space, double value);
Jet jet_add(const Jet& a, const Jet& b);
Jet jet_sub(const Jet& a, const Jet& b);
Jet jet_mul(const Jet& a, const Jet& b);
Jet jet_compose_univariate(const UnaryOp& op, const Jet& a);

// Forward sweep of the graph in jet arithmetic. Variables outside the space
// are treated as constants (the passive case).
Jet jet_eval(const Graph& g, NodeRef root, const std::map<VarId, double>& inputs,
             const std::shared_ptr<const JetSpace>& space);

// Nested central differences, |M| <= 3. The step follows the total order
// (1e-4, 1e-3, 5e-3, scaled by max(1,|x|)) unless one is given.
double fd(const Graph& g, NodeRef root, const std::map<VarId, double>& inputs,
          const MultiIndex& m, std::optional<double> step = std::nullopt);

// Plain recursive evaluation, independent of CalcTree.
double eval_scalar(const Graph& g, NodeRef root, const std::map<VarId, double>& inputs);

} // namespace adtool
