#include "adtool/calc_tree.hpp"

#include <cmath>

#include "adtool/error.hpp"

namespace adtool {

UnaryStorageClass storage_class(const UnaryOp& op) {
    switch (op.kind) {
    case UnaryKind::Neg:
        return {false, false};
    case UnaryKind::Exp:
    case UnaryKind::Sqrt:
    case UnaryKind::Tan:
        return {false, true};
    case UnaryKind::Log:
    case UnaryKind::Sin:
    case UnaryKind::Cos:
    case UnaryKind::Erfc:
    case UnaryKind::Recip:
    case UnaryKind::PowConst:
        return {true, false};
    }
    return {};
}

BinaryStorageClass storage_class(BinaryOp op) {
    return op == BinaryOp::Mul ? BinaryStorageClass{true, true} : BinaryStorageClass{false, false};
}

StoragePlan plan_storage(const Graph& g, std::span<const NodeRef> outputs, int max_order,
                         StoragePolicy policy) {
    if (outputs.empty())
        throw UsageError("plan_storage: outputs must be nonempty");
    if (max_order < 1)
        throw UsageError("plan_storage: max_order must be at least 1");
    auto reachable = g.reachable_ids(outputs);

    std::vector<bool> keep(g.size(), false);
    if (policy == StoragePolicy::All) {
        for (auto id : reachable)
            keep[id] = true;
    } else {
        for (NodeRef out : outputs)
            keep[out.id] = true;
        for (auto id : reachable) {
            const Node& n = g.node_at(id);
            switch (n.kind) {
            case Node::Kind::Var:
                keep[id] = true;
                break;
            case Node::Kind::Const:
                break;
            case Node::Kind::Unary: {
                auto sc = storage_class(n.uop);
                if (sc.needs_input)
                    keep[n.a] = true;
                // A needs-output node earns a slot only if a derivative path
                // actually runs through it.
                if (sc.needs_output && !g.support_indices_at(id).empty())
                    keep[id] = true;
                break;
            }
            case Node::Kind::Binary: {
                auto sc = storage_class(n.bop);
                if (sc.needs_left)
                    keep[n.a] = true;
                if (sc.needs_right)
                    keep[n.b] = true;
                break;
            }
            }
        }
    }

    StoragePlan plan;
    plan.slot.assign(g.size(), -1);
    for (auto id : reachable) {
        if (keep[id]) {
            plan.slot[id] = static_cast<std::int32_t>(plan.slot_count++);
            plan.stored.push_back(id);
        }
    }
    return plan;
}

CalcTree::CalcTree(const Graph& g, std::vector<NodeRef> outputs, int max_order,
                   StoragePolicy policy)
    : graph_(&g), outputs_(std::move(outputs)),
      plan_(plan_storage(g, outputs_, max_order, policy)),
      schedule_(g.reachable_ids(outputs_)), values_(plan_.slot_count, 0.0),
      inputs_(g.variables().size()) {}

void CalcTree::set_input(const VarId& name, double value) {
    auto var = graph_->find_variable(name);
    if (!var)
        throw UsageError("unknown variable \"" + name + "\"");
    set_input(*var, value);
}

void CalcTree::set_input(NodeRef var, double value) {
    const Node& n = graph_->node(var);
    if (n.kind != Node::Kind::Var)
        throw UsageError("set_input target is not a variable: " + graph_->describe(var));
    inputs_[n.var] = value; // last write wins
    evaluated_ = false;
}

namespace {

double eval_unary(const Graph& g, std::uint32_t id, const UnaryOp& op, double x) {
    switch (op.kind) {
    case UnaryKind::Neg:
        return -x;
    case UnaryKind::Exp:
        return std::exp(x);
    case UnaryKind::Log:
        if (x <= 0.0)
            throw DomainError("log of non-positive value at node " + g.describe(g.ref(id)));
        return std::log(x);
    case UnaryKind::Sqrt:
        if (x < 0.0)
            throw DomainError("sqrt of negative value at node " + g.describe(g.ref(id)));
        return std::sqrt(x);
    case UnaryKind::Sin:
        return std::sin(x);
    case UnaryKind::Cos:
        return std::cos(x);
    case UnaryKind::Tan:
        return std::tan(x);
    case UnaryKind::Erfc:
        return std::erfc(x);
    case UnaryKind::Recip:
        if (x == 0.0)
            throw DomainError("reciprocal of zero at node " + g.describe(g.ref(id)));
        return 1.0 / x;
    case UnaryKind::PowConst: {
        if (x == 0.0 && op.exponent < 0)
            throw DomainError("zero raised to negative power at node " + g.describe(g.ref(id)));
        double r = 1.0, b = x;
        int e = op.exponent < 0 ? -op.exponent : op.exponent;
        while (e > 0) {
            if (e & 1)
                r *= b;
            b *= b;
            e >>= 1;
        }
        return op.exponent < 0 ? 1.0 / r : r;
    }
    }
    return 0.0;
}

} // namespace

void CalcTree::evaluate() {
    std::string missing;
    for (auto id : schedule_) {
        const Node& n = graph_->node_at(id);
        if (n.kind == Node::Kind::Var && !inputs_[n.var]) {
            if (!missing.empty())
                missing += ", ";
            missing += graph_->var_name(n.var);
        }
    }
    if (!missing.empty())
        throw MissingInputError("unset input variable(s): " + missing);

    std::vector<double> scratch(graph_->size(), 0.0);
    for (auto id : schedule_) {
        const Node& n = graph_->node_at(id);
        double v = 0.0;
        switch (n.kind) {
        case Node::Kind::Var:
            v = *inputs_[n.var];
            break;
        case Node::Kind::Const:
            v = n.value;
            break;
        case Node::Kind::Unary:
            v = eval_unary(*graph_, id, n.uop, scratch[n.a]);
            break;
        case Node::Kind::Binary:
            switch (n.bop) {
            case BinaryOp::Add: v = scratch[n.a] + scratch[n.b]; break;
            case BinaryOp::Sub: v = scratch[n.a] - scratch[n.b]; break;
            case BinaryOp::Mul: v = scratch[n.a] * scratch[n.b]; break;
            }
            break;
        }
        if (!std::isfinite(v))
            throw DomainError("non-finite value at node " + graph_->describe(graph_->ref(id)));
        scratch[id] = v;
        if (plan_.slot[id] >= 0)
            values_[static_cast<std::size_t>(plan_.slot[id])] = v;
    }
    evaluated_ = true;
}

double CalcTree::get(NodeRef n) const {
    graph_->node(n); // ownership check
    if (!evaluated_)
        throw UsageError("CalcTree::get before evaluate()");
    if (!plan_.is_stored(n.id))
        throw UsageError("value elided by storage analysis: " + graph_->describe(n));
    return values_[static_cast<std::size_t>(plan_.slot[n.id])];
}

} // namespace adtool
