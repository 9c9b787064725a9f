#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adtool/calc_tree.hpp"
#include "adtool/deriv_request.hpp"
#include "adtool/graph.hpp"

namespace adtool {

// Product of node perturbations with positive exponents, sorted by node id.
// Monomials index the live slices of the backward sweep; once only variable
// factors remain, a monomial names a mixed derivative directly.
struct Monomial {
    std::vector<std::pair<std::uint32_t, int>> factors;

    static Monomial unit(std::uint32_t node, int exponent = 1);
    int degree() const noexcept;
    bool contains(std::uint32_t node) const noexcept;
    int exponent_of(std::uint32_t node) const noexcept;
    Monomial times(const Monomial& other) const;
    Monomial without(std::uint32_t node) const;
    std::string to_string(const Graph& g) const;

    friend bool operator==(const Monomial&, const Monomial&) = default;
    friend auto operator<=>(const Monomial&, const Monomial&) = default;
};

// True iff the monomial can still expand into some requested multi-index:
// each non-terminal factor eps_W^a may turn into any sub-multi-index over
// support(W) of order >= a, while variable factors are inert and contribute
// exactly their exponent. Decided by exhaustive allocation; never returns
// false for a monomial that can contribute.
bool contribution_filter(const Graph& g, const Monomial& m, const RequestSet& requests);

// One multiplicative contribution to an instruction coefficient:
// literal * prod c_k^pow * prod value(node)^pow.
struct CoeffProduct {
    double literal = 1.0;
    std::vector<std::pair<int, int>> kernel_pows;          // (k, pow)
    std::vector<std::pair<std::uint32_t, int>> value_pows; // (node id, pow)

    friend bool operator==(const CoeffProduct&, const CoeffProduct&) = default;
    friend auto operator<=>(const CoeffProduct&, const CoeffProduct&) = default;
};
using CoeffSum = std::vector<CoeffProduct>;

struct PlanStep {
    std::uint32_t node = 0;

    // Runtime kernel for univariate eliminations; kernel_order == 0 means the
    // step reads no kernel at all.
    bool univariate = false;
    UnaryOp kernel_op{};
    int kernel_order = 0;
    std::uint32_t kernel_value_node = 0;

    struct Source {
        Monomial monomial;
        std::uint32_t slot = 0;
    };
    std::vector<Source> sources; // live monomials consumed by this step

    struct Instruction {
        std::uint32_t src = 0; // index into sources
        Monomial dst;
        std::uint32_t dst_slot = 0;
        CoeffSum coeff;
    };
    std::vector<Instruction> instructions;

    std::vector<std::pair<Monomial, std::uint32_t>> active_after;
    std::vector<Monomial> dropped; // substitution results pruned by the filter
};

// Precomputed backward sweep: elimination order, per-step active monomial
// sets, substitution instructions, and the buffer layout. Immutable and
// shareable once built.
class BackpropPlan {
  public:
    static constexpr std::uint32_t kZeroSlot = UINT32_MAX;

    const Graph& graph() const noexcept { return *graph_; }
    const std::vector<NodeRef>& outputs() const noexcept { return outputs_; }
    const RequestSet& requests() const noexcept { return requests_; }
    int max_order() const noexcept { return max_order_; }

    const std::vector<std::pair<Monomial, std::uint32_t>>& initial_active() const noexcept {
        return initial_active_;
    }
    const std::vector<PlanStep>& steps() const noexcept { return steps_; }
    const std::vector<std::pair<Monomial, std::uint32_t>>& final_active() const noexcept {
        return final_active_;
    }

    // Peak number of simultaneously live monomials == allocated buffer size.
    std::uint32_t buffer_size() const noexcept { return buffer_size_; }
    std::uint32_t scratch_size() const noexcept { return scratch_size_; }

    // kZeroSlot marks requests that are statically zero; nullopt means the
    // multi-index was never requested.
    std::optional<std::uint32_t> slot_of(const MultiIndex& m) const;

    // CalcTree values the execution reads (kernel points and mul operands).
    const std::vector<std::uint32_t>& value_nodes() const noexcept { return value_nodes_; }

  private:
    friend BackpropPlan make_plan(const Graph& g, std::vector<NodeRef> outputs,
                                  RequestSet requests);

    const Graph* graph_ = nullptr;
    std::vector<NodeRef> outputs_;
    RequestSet requests_;
    int max_order_ = 0;
    std::vector<std::pair<Monomial, std::uint32_t>> initial_active_;
    std::vector<PlanStep> steps_;
    std::vector<std::pair<Monomial, std::uint32_t>> final_active_;
    std::map<MultiIndex, std::uint32_t> request_slots_;
    std::vector<std::uint32_t> value_nodes_;
    std::uint32_t buffer_size_ = 0;
    std::uint32_t scratch_size_ = 0;
};

BackpropPlan make_plan(const Graph& g, std::vector<NodeRef> outputs, RequestSet requests);

// Executes a plan numerically against an evaluated CalcTree. Owns its buffer,
// so many Backpropagators may share one plan and run in parallel. Seeds
// persist across runs until changed.
class Backpropagator {
  public:
    explicit Backpropagator(const BackpropPlan& plan);

    void set_seed(NodeRef output, double seed);
    void backpropagate(const CalcTree& ct);

    // Derivative value: final Taylor coefficient times the product of
    // factorials of the requested orders.
    double get(const MultiIndex& m) const;

    bool ran() const noexcept { return ran_; }
    // Elimination steps executed per node id during the last run.
    const std::vector<std::uint32_t>& elimination_counts() const noexcept {
        return elim_counts_;
    }
    std::uint32_t peak_live() const noexcept { return peak_live_; }
    std::uint32_t peak_slot_use() const noexcept { return peak_slot_; }

  private:
    const BackpropPlan* plan_;
    std::vector<double> buffer_;
    std::vector<double> scratch_;
    std::map<std::uint32_t, double> seeds_; // output node id -> seed
    std::vector<std::uint32_t> elim_counts_;
    std::uint32_t peak_live_ = 0;
    std::uint32_t peak_slot_ = 0;
    bool ran_ = false;
};

} // namespace adtool
