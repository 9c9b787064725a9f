#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "adtool/ops.hpp"

namespace adtool {

// Variables are identified by name; names follow [A-Za-z_][A-Za-z0-9_]*.
using VarId = std::string;

bool is_identifier(std::string_view name);

// Dense handle into its owning Graph. The graph tag catches refs that leak
// across graphs.
struct NodeRef {
    std::uint32_t id = UINT32_MAX;
    std::uint32_t graph = UINT32_MAX;

    friend bool operator==(const NodeRef&, const NodeRef&) = default;
    friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

struct Node {
    enum class Kind : std::uint8_t { Var, Const, Unary, Binary };

    Kind kind = Kind::Const;
    UnaryOp uop{};
    BinaryOp bop = BinaryOp::Add;
    std::uint32_t a = 0;   // unary child / binary left
    std::uint32_t b = 0;   // binary right
    std::uint32_t var = 0; // Var: index into the variable registry
    double value = 0.0;    // Const
};

// Hash-consed computation DAG. Construction is append-only and canonicalizing:
// structurally equal subexpressions share one node, division is rewritten as
// mul(a, recip(b)), and pow_const exponents 0 and 1 collapse. Children always
// have smaller ids than their parents, so ascending id order is a topological
// order. A fully built Graph is immutable from the reader's point of view and
// may be shared across any number of calc trees and plans.
class Graph {
  public:
    Graph();
    Graph(Graph&&) noexcept = default;
    Graph& operator=(Graph&&) noexcept = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    NodeRef new_variable(std::string_view name);
    NodeRef new_constant(double value);
    NodeRef apply(const UnaryOp& op, NodeRef child);
    NodeRef apply(BinaryOp op, NodeRef left, NodeRef right);
    // a / b == mul(a, recip(b)); division never appears as a node.
    NodeRef div(NodeRef a, NodeRef b);

    std::uint32_t uid() const noexcept { return uid_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    NodeRef ref(std::uint32_t id) const;
    const Node& node(NodeRef r) const;
    const Node& node_at(std::uint32_t id) const { return nodes_[id]; }

    std::optional<NodeRef> find_variable(std::string_view name) const;
    const std::vector<VarId>& variables() const noexcept { return var_names_; }
    const VarId& var_name(std::uint32_t var_index) const { return var_names_[var_index]; }
    NodeRef var_node(std::uint32_t var_index) const;

    // Exact set of input variables reachable from n, as sorted registry
    // indices. Memoized at construction; constants map to the empty set.
    const std::vector<std::uint32_t>& support_indices(NodeRef n) const;
    const std::vector<std::uint32_t>& support_indices_at(std::uint32_t id) const {
        return supports_[id];
    }
    std::vector<VarId> input_support(NodeRef n) const;

    // Every node reachable from roots, children before parents, ties broken
    // by node id (which makes the order unique).
    std::vector<NodeRef> topo_order(std::span<const NodeRef> roots) const;
    std::vector<std::uint32_t> reachable_ids(std::span<const NodeRef> roots) const;

    std::string describe(NodeRef n) const;

  private:
    struct OpKey {
        std::uint64_t hi = 0;
        std::uint64_t lo = 0;
        friend bool operator==(const OpKey&, const OpKey&) = default;
    };
    struct OpKeyHash {
        std::size_t operator()(const OpKey& k) const noexcept;
    };

    void check_owned(NodeRef r, const char* what) const;
    NodeRef intern(const Node& n, const OpKey& key);

    std::uint32_t uid_;
    std::vector<Node> nodes_;
    std::vector<std::vector<std::uint32_t>> supports_;
    std::vector<VarId> var_names_;
    std::vector<std::uint32_t> var_nodes_; // var index -> node id
    std::unordered_map<std::string, std::uint32_t> var_lookup_;
    std::unordered_map<std::uint64_t, std::uint32_t> const_lookup_; // bit pattern
    std::unordered_map<OpKey, std::uint32_t, OpKeyHash> op_lookup_;
};

// Thin builder handle so fixtures read like the formulas they implement.
struct Expr {
    Graph* g = nullptr;
    NodeRef ref{};
};

Expr make_var(Graph& g, std::string_view name);
Expr make_const(Graph& g, double value);

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr a);
Expr operator+(Expr a, double b);
Expr operator+(double a, Expr b);
Expr operator-(Expr a, double b);
Expr operator-(double a, Expr b);
Expr operator*(Expr a, double b);
Expr operator*(double a, Expr b);
Expr operator/(Expr a, double b);
Expr operator/(double a, Expr b);

Expr exp(Expr x);
Expr log(Expr x);
Expr sqrt(Expr x);
Expr sin(Expr x);
Expr cos(Expr x);
Expr tan(Expr x);
Expr erfc(Expr x);
Expr recip(Expr x);
Expr pow_const(Expr x, int exponent);

// Normal CDF and PDF expand into primitives; they are builders, not node ops.
Expr cdf_n(Expr x);
Expr pdf_n(Expr x);

} // namespace adtool
