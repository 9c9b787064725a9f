#include "adtool/graph.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "adtool/error.hpp"

namespace adtool {

namespace {

std::atomic<std::uint32_t> g_next_graph_uid{1};

std::vector<std::uint32_t> merge_sorted(const std::vector<std::uint32_t>& a,
                                        const std::vector<std::uint32_t>& b) {
    std::vector<std::uint32_t> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

} // namespace

bool is_identifier(std::string_view name) {
    if (name.empty())
        return false;
    auto head = static_cast<unsigned char>(name.front());
    if (!std::isalpha(head) && head != '_')
        return false;
    for (char c : name.substr(1)) {
        auto u = static_cast<unsigned char>(c);
        if (!std::isalnum(u) && u != '_')
            return false;
    }
    return true;
}

std::string op_name(const UnaryOp& op) {
    switch (op.kind) {
    case UnaryKind::Neg: return "neg";
    case UnaryKind::Exp: return "exp";
    case UnaryKind::Log: return "log";
    case UnaryKind::Sqrt: return "sqrt";
    case UnaryKind::Sin: return "sin";
    case UnaryKind::Cos: return "cos";
    case UnaryKind::Tan: return "tan";
    case UnaryKind::Erfc: return "erfc";
    case UnaryKind::Recip: return "recip";
    case UnaryKind::PowConst: {
        char buf[32];
        std::snprintf(buf, sizeof buf, "pow<%d>", op.exponent);
        return buf;
    }
    }
    return "?";
}

const char* op_name(BinaryOp op) {
    switch (op) {
    case BinaryOp::Add: return "add";
    case BinaryOp::Sub: return "sub";
    case BinaryOp::Mul: return "mul";
    }
    return "?";
}

std::size_t Graph::OpKeyHash::operator()(const OpKey& k) const noexcept {
    std::uint64_t h = k.hi * 0x9e3779b97f4a7c15ULL;
    h ^= k.lo + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
}

Graph::Graph() : uid_(g_next_graph_uid.fetch_add(1)) {}

void Graph::check_owned(NodeRef r, const char* what) const {
    if (r.graph != uid_ || r.id >= nodes_.size())
        throw UsageError(std::string(what) + ": NodeRef does not belong to this graph");
}

NodeRef Graph::ref(std::uint32_t id) const {
    if (id >= nodes_.size())
        throw UsageError("node id out of range");
    return NodeRef{id, uid_};
}

const Node& Graph::node(NodeRef r) const {
    check_owned(r, "node");
    return nodes_[r.id];
}

NodeRef Graph::var_node(std::uint32_t var_index) const {
    if (var_index >= var_nodes_.size())
        throw UsageError("variable index out of range");
    return NodeRef{var_nodes_[var_index], uid_};
}

std::optional<NodeRef> Graph::find_variable(std::string_view name) const {
    auto it = var_lookup_.find(std::string(name));
    if (it == var_lookup_.end())
        return std::nullopt;
    return NodeRef{it->second, uid_};
}

NodeRef Graph::new_variable(std::string_view name) {
    if (!is_identifier(name))
        throw UsageError("invalid variable name: \"" + std::string(name) + "\"");
    auto it = var_lookup_.find(std::string(name));
    if (it != var_lookup_.end())
        return NodeRef{it->second, uid_};
    Node n;
    n.kind = Node::Kind::Var;
    n.var = static_cast<std::uint32_t>(var_names_.size());
    auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(n);
    supports_.push_back({n.var});
    var_names_.emplace_back(name);
    var_nodes_.push_back(id);
    var_lookup_.emplace(std::string(name), id);
    return NodeRef{id, uid_};
}

NodeRef Graph::new_constant(double value) {
    if (!std::isfinite(value))
        throw UsageError("constant must be a finite value");
    // Interning is by bit pattern, so -0.0 and +0.0 are distinct nodes.
    std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    auto it = const_lookup_.find(bits);
    if (it != const_lookup_.end())
        return NodeRef{it->second, uid_};
    Node n;
    n.kind = Node::Kind::Const;
    n.value = value;
    auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(n);
    supports_.emplace_back();
    const_lookup_.emplace(bits, id);
    return NodeRef{id, uid_};
}

NodeRef Graph::intern(const Node& n, const OpKey& key) {
    auto it = op_lookup_.find(key);
    if (it != op_lookup_.end())
        return NodeRef{it->second, uid_};
    auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(n);
    if (n.kind == Node::Kind::Unary)
        supports_.push_back(supports_[n.a]);
    else
        supports_.push_back(merge_sorted(supports_[n.a], supports_[n.b]));
    op_lookup_.emplace(key, id);
    return NodeRef{id, uid_};
}

NodeRef Graph::apply(const UnaryOp& op, NodeRef child) {
    check_owned(child, "apply");
    if (op.kind == UnaryKind::PowConst) {
        if (op.exponent == 0)
            return new_constant(1.0);
        if (op.exponent == 1)
            return child;
    }
    Node n;
    n.kind = Node::Kind::Unary;
    n.uop = op;
    n.a = child.id;
    OpKey key;
    key.hi = (1ULL << 56) | (static_cast<std::uint64_t>(op.kind) << 48) |
             (static_cast<std::uint64_t>(static_cast<std::uint32_t>(op.exponent)) << 8);
    key.lo = child.id;
    return intern(n, key);
}

NodeRef Graph::apply(BinaryOp op, NodeRef left, NodeRef right) {
    check_owned(left, "apply");
    check_owned(right, "apply");
    Node n;
    n.kind = Node::Kind::Binary;
    n.bop = op;
    n.a = left.id;
    n.b = right.id;
    OpKey key;
    key.hi = (2ULL << 56) | (static_cast<std::uint64_t>(op) << 48);
    key.lo = (static_cast<std::uint64_t>(left.id) << 32) | right.id;
    return intern(n, key);
}

NodeRef Graph::div(NodeRef a, NodeRef b) {
    return apply(BinaryOp::Mul, a, apply(unary(UnaryKind::Recip), b));
}

const std::vector<std::uint32_t>& Graph::support_indices(NodeRef n) const {
    check_owned(n, "support");
    return supports_[n.id];
}

std::vector<VarId> Graph::input_support(NodeRef n) const {
    const auto& idx = support_indices(n);
    std::vector<VarId> names;
    names.reserve(idx.size());
    for (auto i : idx)
        names.push_back(var_names_[i]);
    return names;
}

std::vector<std::uint32_t> Graph::reachable_ids(std::span<const NodeRef> roots) const {
    std::vector<bool> seen(nodes_.size(), false);
    std::vector<std::uint32_t> stack;
    for (NodeRef r : roots) {
        check_owned(r, "topo_order");
        if (!seen[r.id]) {
            seen[r.id] = true;
            stack.push_back(r.id);
        }
    }
    while (!stack.empty()) {
        std::uint32_t id = stack.back();
        stack.pop_back();
        const Node& n = nodes_[id];
        if (n.kind == Node::Kind::Unary || n.kind == Node::Kind::Binary) {
            if (!seen[n.a]) {
                seen[n.a] = true;
                stack.push_back(n.a);
            }
            if (n.kind == Node::Kind::Binary && !seen[n.b]) {
                seen[n.b] = true;
                stack.push_back(n.b);
            }
        }
    }
    std::vector<std::uint32_t> out;
    for (std::uint32_t id = 0; id < nodes_.size(); ++id)
        if (seen[id])
            out.push_back(id);
    return out; // ascending id == children before parents
}

std::vector<NodeRef> Graph::topo_order(std::span<const NodeRef> roots) const {
    std::vector<NodeRef> out;
    for (auto id : reachable_ids(roots))
        out.push_back(NodeRef{id, uid_});
    return out;
}

std::string Graph::describe(NodeRef r) const {
    check_owned(r, "describe");
    const Node& n = nodes_[r.id];
    char buf[96];
    switch (n.kind) {
    case Node::Kind::Var:
        std::snprintf(buf, sizeof buf, "#%u var %s", r.id, var_names_[n.var].c_str());
        break;
    case Node::Kind::Const:
        std::snprintf(buf, sizeof buf, "#%u const %.17g", r.id, n.value);
        break;
    case Node::Kind::Unary:
        std::snprintf(buf, sizeof buf, "#%u %s(#%u)", r.id, op_name(n.uop).c_str(), n.a);
        break;
    case Node::Kind::Binary:
        std::snprintf(buf, sizeof buf, "#%u %s(#%u, #%u)", r.id, op_name(n.bop), n.a, n.b);
        break;
    }
    return buf;
}

// ---- builder sugar ----------------------------------------------------------

namespace {

Graph& same_graph(Expr a, Expr b) {
    if (a.g == nullptr || a.g != b.g)
        throw UsageError("expressions belong to different graphs");
    return *a.g;
}

} // namespace

Expr make_var(Graph& g, std::string_view name) { return Expr{&g, g.new_variable(name)}; }
Expr make_const(Graph& g, double value) { return Expr{&g, g.new_constant(value)}; }

Expr operator+(Expr a, Expr b) {
    Graph& g = same_graph(a, b);
    return Expr{&g, g.apply(BinaryOp::Add, a.ref, b.ref)};
}
Expr operator-(Expr a, Expr b) {
    Graph& g = same_graph(a, b);
    return Expr{&g, g.apply(BinaryOp::Sub, a.ref, b.ref)};
}
Expr operator*(Expr a, Expr b) {
    Graph& g = same_graph(a, b);
    return Expr{&g, g.apply(BinaryOp::Mul, a.ref, b.ref)};
}
Expr operator/(Expr a, Expr b) {
    Graph& g = same_graph(a, b);
    return Expr{&g, g.div(a.ref, b.ref)};
}
Expr operator-(Expr a) { return Expr{a.g, a.g->apply(unary(UnaryKind::Neg), a.ref)}; }

Expr operator+(Expr a, double b) { return a + make_const(*a.g, b); }
Expr operator+(double a, Expr b) { return make_const(*b.g, a) + b; }
Expr operator-(Expr a, double b) { return a - make_const(*a.g, b); }
Expr operator-(double a, Expr b) { return make_const(*b.g, a) - b; }
Expr operator*(Expr a, double b) { return a * make_const(*a.g, b); }
Expr operator*(double a, Expr b) { return make_const(*b.g, a) * b; }
Expr operator/(Expr a, double b) { return a / make_const(*a.g, b); }
Expr operator/(double a, Expr b) { return make_const(*b.g, a) / b; }

namespace {
Expr apply1(Expr x, UnaryKind k) { return Expr{x.g, x.g->apply(unary(k), x.ref)}; }
} // namespace

Expr exp(Expr x) { return apply1(x, UnaryKind::Exp); }
Expr log(Expr x) { return apply1(x, UnaryKind::Log); }
Expr sqrt(Expr x) { return apply1(x, UnaryKind::Sqrt); }
Expr sin(Expr x) { return apply1(x, UnaryKind::Sin); }
Expr cos(Expr x) { return apply1(x, UnaryKind::Cos); }
Expr tan(Expr x) { return apply1(x, UnaryKind::Tan); }
Expr erfc(Expr x) { return apply1(x, UnaryKind::Erfc); }
Expr recip(Expr x) { return apply1(x, UnaryKind::Recip); }
Expr pow_const(Expr x, int exponent) {
    return Expr{x.g, x.g->apply(pow_op(exponent), x.ref)};
}

Expr cdf_n(Expr x) {
    constexpr double m_one_over_sqrt2 = -0.70710678118654757;
    return make_const(*x.g, 0.5) * erfc(x * make_const(*x.g, m_one_over_sqrt2));
}

Expr pdf_n(Expr x) {
    constexpr double one_over_root_two_pi = 0.39894228040143265;
    return make_const(*x.g, one_over_root_two_pi) * exp(make_const(*x.g, -0.5) * x * x);
}

} // namespace adtool
