#include "adtool/backprop.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <set>

#include "adtool/config.hpp"
#include "adtool/error.hpp"
#include "adtool/taylor_kernels.hpp"

namespace adtool {

// ---- Monomial ---------------------------------------------------------------

Monomial Monomial::unit(std::uint32_t node, int exponent) {
    Monomial m;
    if (exponent > 0)
        m.factors.emplace_back(node, exponent);
    return m;
}

int Monomial::degree() const noexcept {
    int d = 0;
    for (const auto& [_, e] : factors)
        d += e;
    return d;
}

bool Monomial::contains(std::uint32_t node) const noexcept { return exponent_of(node) > 0; }

int Monomial::exponent_of(std::uint32_t node) const noexcept {
    for (const auto& [id, e] : factors)
        if (id == node)
            return e;
    return 0;
}

Monomial Monomial::times(const Monomial& other) const {
    Monomial out;
    auto a = factors.begin();
    auto b = other.factors.begin();
    while (a != factors.end() || b != other.factors.end()) {
        if (b == other.factors.end() || (a != factors.end() && a->first < b->first))
            out.factors.push_back(*a++);
        else if (a == factors.end() || b->first < a->first)
            out.factors.push_back(*b++);
        else {
            out.factors.emplace_back(a->first, a->second + b->second);
            ++a;
            ++b;
        }
    }
    return out;
}

Monomial Monomial::without(std::uint32_t node) const {
    Monomial out;
    for (const auto& f : factors)
        if (f.first != node)
            out.factors.push_back(f);
    return out;
}

std::string Monomial::to_string(const Graph& g) const {
    if (factors.empty())
        return "1";
    std::string s;
    for (const auto& [id, e] : factors) {
        if (!s.empty())
            s += "*";
        const Node& n = g.node_at(id);
        std::string base = (n.kind == Node::Kind::Var) ? g.var_name(n.var)
                                                       : ("#" + std::to_string(id));
        s += "e[" + base + "]";
        if (e > 1)
            s += "^" + std::to_string(e);
    }
    return s;
}

// ---- contribution filter ------------------------------------------------------

namespace {

struct NodeFactor {
    const std::vector<std::uint32_t>* support;
    int min_order;
};

// Backtracking allocation: assign each node factor a sub-multi-index of the
// remainder with support inside the factor's support and order >= min_order.
bool allocate(const std::vector<NodeFactor>& fs, const std::vector<int>& suffix_min,
              std::size_t i, std::vector<std::pair<std::uint32_t, int>>& rem, int rem_total) {
    if (i == fs.size())
        return rem_total == 0;
    const auto& f = fs[i];
    const int max_take = rem_total - suffix_min[i + 1];
    if (max_take < f.min_order)
        return false;

    // Positions in rem this factor may draw from.
    std::vector<std::size_t> ps;
    for (std::size_t j = 0; j < rem.size(); ++j)
        if (rem[j].second > 0 &&
            std::binary_search(f.support->begin(), f.support->end(), rem[j].first))
            ps.push_back(j);

    std::vector<int> take(ps.size(), 0);
    // Depth-first over per-variable draws.
    auto rec = [&](auto&& self, std::size_t p, int taken) -> bool {
        if (p == ps.size()) {
            if (taken < f.min_order)
                return false;
            return allocate(fs, suffix_min, i + 1, rem, rem_total - taken);
        }
        const std::size_t j = ps[p];
        const int avail = rem[j].second;
        for (int t = 0; t <= avail && taken + t <= max_take; ++t) {
            rem[j].second = avail - t;
            if (self(self, p + 1, taken + t)) {
                rem[j].second = avail;
                return true;
            }
        }
        rem[j].second = avail;
        return false;
    };
    return rec(rec, 0, 0);
}

bool feasible(const Graph& g, const Monomial& m, const MultiIndex& target) {
    std::vector<std::pair<std::uint32_t, int>> rem; // (var index, remaining order)
    int rem_total = 0;
    for (const auto& [name, k] : target.entries()) {
        auto var = g.find_variable(name);
        if (!var)
            return false;
        rem.emplace_back(g.node(*var).var, k);
        rem_total += k;
    }
    if (m.degree() > rem_total)
        return false;

    std::vector<NodeFactor> fs;
    for (const auto& [id, e] : m.factors) {
        const Node& n = g.node_at(id);
        if (n.kind == Node::Kind::Var) {
            // Variable perturbations are inert: they contribute exactly e.
            bool found = false;
            for (auto& [v, k] : rem)
                if (v == n.var) {
                    if (k < e)
                        return false;
                    k -= e;
                    rem_total -= e;
                    found = true;
                    break;
                }
            if (!found)
                return false;
        } else {
            const auto& supp = g.support_indices_at(id);
            if (supp.empty())
                return false;
            fs.push_back(NodeFactor{&supp, e});
        }
    }
    std::vector<int> suffix_min(fs.size() + 1, 0);
    for (std::size_t i = fs.size(); i-- > 0;)
        suffix_min[i] = suffix_min[i + 1] + fs[i].min_order;
    if (suffix_min[0] > rem_total)
        return false;
    return allocate(fs, suffix_min, 0, rem, rem_total);
}

} // namespace

bool contribution_filter(const Graph& g, const Monomial& m, const RequestSet& requests) {
    if (m.factors.empty())
        return false;
    for (const auto& target : requests.items())
        if (feasible(g, m, target))
            return true;
    return false;
}

// ---- symbolic polynomial machinery -------------------------------------------

namespace {

using Poly = std::map<Monomial, CoeffSum>;

template <typename K>
std::vector<std::pair<K, int>> merge_pows(const std::vector<std::pair<K, int>>& a,
                                          const std::vector<std::pair<K, int>>& b) {
    std::vector<std::pair<K, int>> out;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() || j != b.end()) {
        if (j == b.end() || (i != a.end() && i->first < j->first))
            out.push_back(*i++);
        else if (i == a.end() || j->first < i->first)
            out.push_back(*j++);
        else {
            out.emplace_back(i->first, i->second + j->second);
            ++i;
            ++j;
        }
    }
    return out;
}

CoeffProduct mul_products(const CoeffProduct& a, const CoeffProduct& b) {
    CoeffProduct r;
    r.literal = a.literal * b.literal;
    r.kernel_pows = merge_pows(a.kernel_pows, b.kernel_pows);
    r.value_pows = merge_pows(a.value_pows, b.value_pows);
    return r;
}

// Canonical form: products sorted by base, equal bases merged, zeros dropped.
void simplify(CoeffSum& s) {
    std::sort(s.begin(), s.end(), [](const CoeffProduct& a, const CoeffProduct& b) {
        return std::tie(a.kernel_pows, a.value_pows) < std::tie(b.kernel_pows, b.value_pows);
    });
    CoeffSum out;
    for (auto& p : s) {
        if (!out.empty() && out.back().kernel_pows == p.kernel_pows &&
            out.back().value_pows == p.value_pows)
            out.back().literal += p.literal;
        else
            out.push_back(std::move(p));
    }
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const CoeffProduct& p) { return p.literal == 0.0; }),
              out.end());
    s = std::move(out);
}

Poly poly_mul(const Poly& a, const Poly& b, int degree_cap) {
    Poly out;
    for (const auto& [ma, sa] : a) {
        for (const auto& [mb, sb] : b) {
            Monomial m = ma.times(mb);
            if (m.degree() > degree_cap)
                continue;
            CoeffSum prod;
            prod.reserve(sa.size() * sb.size());
            for (const auto& pa : sa)
                for (const auto& pb : sb)
                    prod.push_back(mul_products(pa, pb));
            auto& dst = out[m];
            dst.insert(dst.end(), prod.begin(), prod.end());
        }
    }
    for (auto& [_, s] : out)
        simplify(s);
    return out;
}

CoeffProduct literal_product(double v) { return CoeffProduct{v, {}, {}}; }

CoeffProduct value_or_literal(const Graph& g, std::uint32_t id) {
    const Node& n = g.node_at(id);
    if (n.kind == Node::Kind::Const)
        return literal_product(n.value);
    return CoeffProduct{1.0, {}, {{id, 1}}};
}

// The node's local expansion with coefficients left symbolic: kernel slots
// for univariates, operand value references (Eq.-4 shape) for mul, plain
// literals for add/sub/neg. Constant operands carry no perturbation.
Poly symbolic_expansion(const Graph& g, std::uint32_t id, int budget) {
    const Node& n = g.node_at(id);
    Poly e;
    auto add = [&e](const Monomial& m, CoeffProduct p) { e[m].push_back(std::move(p)); };
    if (n.kind == Node::Kind::Unary) {
        if (g.node_at(n.a).kind == Node::Kind::Const)
            return e;
        if (n.uop.kind == UnaryKind::Neg) {
            add(Monomial::unit(n.a), literal_product(-1.0));
        } else {
            for (int k = 1; k <= budget; ++k)
                add(Monomial::unit(n.a, k), CoeffProduct{1.0, {{k, 1}}, {}});
        }
    } else {
        const bool lconst = g.node_at(n.a).kind == Node::Kind::Const;
        const bool rconst = g.node_at(n.b).kind == Node::Kind::Const;
        switch (n.bop) {
        case BinaryOp::Add:
        case BinaryOp::Sub: {
            if (!lconst)
                add(Monomial::unit(n.a), literal_product(1.0));
            if (!rconst)
                add(Monomial::unit(n.b), literal_product(n.bop == BinaryOp::Sub ? -1.0 : 1.0));
            break;
        }
        case BinaryOp::Mul:
            if (!lconst)
                add(Monomial::unit(n.a), value_or_literal(g, n.b));
            if (!rconst)
                add(Monomial::unit(n.b), value_or_literal(g, n.a));
            if (!lconst && !rconst)
                add(Monomial::unit(n.a).times(Monomial::unit(n.b)), literal_product(1.0));
            break;
        }
    }
    for (auto it = e.begin(); it != e.end();) {
        simplify(it->second);
        it = it->second.empty() ? e.erase(it) : std::next(it);
    }
    return e;
}

std::vector<std::pair<Monomial, std::uint32_t>>
snapshot(const std::map<Monomial, std::uint32_t>& live) {
    return {live.begin(), live.end()};
}

} // namespace

// ---- plan construction --------------------------------------------------------

std::optional<std::uint32_t> BackpropPlan::slot_of(const MultiIndex& m) const {
    auto it = request_slots_.find(m);
    if (it == request_slots_.end())
        return std::nullopt;
    return it->second;
}

BackpropPlan make_plan(const Graph& g, std::vector<NodeRef> outputs, RequestSet requests) {
    if (outputs.empty())
        throw UsageError("make_plan: outputs must be nonempty");
    for (NodeRef out : outputs)
        g.node(out); // ownership check
    if (requests.empty())
        throw UsageError("make_plan: requests must be nonempty");
    for (const auto& m : requests.items()) {
        if (m.total() > order_cap())
            throw RequestError("requested order " + std::to_string(m.total()) +
                               " exceeds order cap " + std::to_string(order_cap()));
        for (const auto& [v, _] : m.entries())
            if (!g.find_variable(v))
                throw RequestError("request variable \"" + v +
                                   "\" is not a variable of the graph");
    }

    BackpropPlan plan;
    plan.graph_ = &g;
    plan.outputs_ = outputs;
    plan.requests_ = std::move(requests);
    const int maxreq = plan.requests_.max_order();
    plan.max_order_ = maxreq;

    std::map<Monomial, bool> filter_memo;
    auto keep = [&](const Monomial& m) {
        auto it = filter_memo.find(m);
        if (it != filter_memo.end())
            return it->second;
        bool v = contribution_filter(g, m, plan.requests_);
        filter_memo.emplace(m, v);
        return v;
    };

    std::map<Monomial, std::uint32_t> live;
    std::set<std::uint32_t> free_slots;
    std::uint32_t high_water = 0;
    auto alloc_slot = [&]() {
        if (!free_slots.empty()) {
            std::uint32_t s = *free_slots.begin();
            free_slots.erase(free_slots.begin());
            return s;
        }
        return high_water++;
    };

    // Identity seeding: one first-order perturbation per output, valid for a
    // Taylor expansion of any order.
    std::vector<std::uint32_t> out_ids;
    for (NodeRef out : outputs)
        out_ids.push_back(out.id);
    std::sort(out_ids.begin(), out_ids.end());
    out_ids.erase(std::unique(out_ids.begin(), out_ids.end()), out_ids.end());
    for (auto id : out_ids) {
        Monomial m = Monomial::unit(id);
        if (keep(m) && !live.count(m))
            live.emplace(m, alloc_slot());
    }
    plan.initial_active_ = snapshot(live);

    const auto reachable = g.reachable_ids(outputs);
    for (auto it = reachable.rbegin(); it != reachable.rend(); ++it) {
        const std::uint32_t id = *it;
        const Node& nd = g.node_at(id);
        if (nd.kind == Node::Kind::Var || nd.kind == Node::Kind::Const)
            continue;

        PlanStep step;
        step.node = id;
        for (const auto& [m, slot] : live)
            if (m.contains(id))
                step.sources.push_back(PlanStep::Source{m, slot});

        if (!step.sources.empty()) {
            int minr = INT_MAX, max_a = 0;
            for (const auto& src : step.sources) {
                const int a = src.monomial.exponent_of(id);
                minr = std::min(minr, src.monomial.degree() - a);
                max_a = std::max(max_a, a);
            }
            const int budget = maxreq - minr;

            Poly e = symbolic_expansion(g, id, budget);
            std::map<int, Poly> powers;
            if (!e.empty()) {
                powers.emplace(1, e);
                for (int a = 2; a <= max_a; ++a)
                    powers.emplace(a, poly_mul(powers.at(a - 1), e, budget));
            }

            struct Pending {
                std::uint32_t src;
                Monomial dst;
                CoeffSum coeff;
            };
            std::vector<Pending> pending;
            std::set<Monomial> dropped;
            for (std::uint32_t si = 0; si < step.sources.size(); ++si) {
                const auto& src = step.sources[si];
                if (e.empty())
                    continue; // operand is constant; the perturbation vanishes
                const int a = src.monomial.exponent_of(id);
                const Monomial r = src.monomial.without(id);
                for (const auto& [tm, cs] : powers.at(a)) {
                    Monomial dst = r.times(tm);
                    if (dst.degree() > maxreq || !keep(dst)) {
                        dropped.insert(std::move(dst));
                        continue;
                    }
                    pending.push_back(Pending{si, std::move(dst), cs});
                }
            }

            for (const auto& src : step.sources) {
                live.erase(src.monomial);
                free_slots.insert(src.slot);
            }
            std::set<Monomial> dsts;
            for (const auto& p : pending)
                dsts.insert(p.dst);
            for (const auto& m : dsts)
                if (!live.count(m))
                    live.emplace(m, alloc_slot());

            std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
                return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
            });
            int kmax = 0;
            for (auto& p : pending) {
                for (const auto& prod : p.coeff)
                    for (const auto& [k, _] : prod.kernel_pows)
                        kmax = std::max(kmax, k);
                step.instructions.push_back(
                    PlanStep::Instruction{p.src, p.dst, live.at(p.dst), std::move(p.coeff)});
            }
            step.dropped.assign(dropped.begin(), dropped.end());
            if (kmax > 0) {
                step.univariate = true;
                step.kernel_op = nd.uop;
                step.kernel_order = kmax;
                step.kernel_value_node = storage_class(nd.uop).needs_output ? id : nd.a;
            }
        }

        step.active_after = snapshot(live);
        plan.scratch_size_ =
            std::max(plan.scratch_size_, static_cast<std::uint32_t>(step.sources.size()));
        plan.steps_.push_back(std::move(step));
    }

    plan.final_active_ = snapshot(live);
    for (const auto& [m, _] : plan.final_active_)
        for (const auto& [nid, __] : m.factors)
            if (g.node_at(nid).kind != Node::Kind::Var)
                throw Error("internal: non-variable monomial survived elimination");

    for (const auto& m : plan.requests_.items()) {
        Monomial mono;
        for (const auto& [v, k] : m.entries())
            mono = mono.times(Monomial::unit(g.find_variable(v)->id, k));
        auto lit = live.find(mono);
        plan.request_slots_.emplace(m, lit != live.end() ? lit->second
                                                         : BackpropPlan::kZeroSlot);
    }

    plan.buffer_size_ = high_water;

    std::set<std::uint32_t> vnodes;
    for (const auto& step : plan.steps_) {
        if (step.kernel_order > 0)
            vnodes.insert(step.kernel_value_node);
        for (const auto& instr : step.instructions)
            for (const auto& prod : instr.coeff)
                for (const auto& [nid, _] : prod.value_pows)
                    vnodes.insert(nid);
    }
    plan.value_nodes_.assign(vnodes.begin(), vnodes.end());
    return plan;
}

// ---- execution ----------------------------------------------------------------

namespace {

double dpow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i)
        r *= x;
    return r;
}

} // namespace

Backpropagator::Backpropagator(const BackpropPlan& plan) : plan_(&plan) {}

void Backpropagator::set_seed(NodeRef output, double seed) {
    plan_->graph().node(output);
    bool known = false;
    for (NodeRef out : plan_->outputs())
        known |= (out.id == output.id);
    if (!known)
        throw UsageError("set_seed target is not an output of this plan: " +
                         plan_->graph().describe(output));
    seeds_[output.id] = seed; // last write wins
}

void Backpropagator::backpropagate(const CalcTree& ct) {
    const BackpropPlan& plan = *plan_;
    const Graph& g = plan.graph();
    if (&ct.graph() != &g)
        throw UsageError("CalcTree was built over a different graph");
    if (!ct.evaluated())
        throw UsageError("CalcTree must be evaluated before backpropagation");
    for (NodeRef out : plan.outputs())
        if (!seeds_.count(out.id))
            throw UsageError("unseeded output: " + g.describe(out));
    for (auto id : plan.value_nodes())
        if (!ct.storage().is_stored(id))
            throw UsageError("CalcTree does not retain a value required by this plan: " +
                             g.describe(g.ref(id)));

    buffer_.assign(plan.buffer_size(), 0.0);
    scratch_.assign(plan.scratch_size(), 0.0);
    elim_counts_.assign(g.size(), 0);
    peak_live_ = static_cast<std::uint32_t>(plan.initial_active().size());
    peak_slot_ = 0;

    for (const auto& [m, slot] : plan.initial_active()) {
        buffer_[slot] = seeds_.at(m.factors.front().first);
        peak_slot_ = std::max(peak_slot_, slot + 1);
    }

    std::vector<double> kernel;
    for (const PlanStep& step : plan.steps()) {
        ++elim_counts_[step.node];
        if (step.kernel_order > 0) {
            const double stored = ct.get(g.ref(step.kernel_value_node));
            kernel = univariate_coeffs(step.kernel_op, stored, step.kernel_order).coeffs;
        }
        for (std::uint32_t i = 0; i < step.sources.size(); ++i) {
            scratch_[i] = buffer_[step.sources[i].slot];
            buffer_[step.sources[i].slot] = 0.0;
        }
        for (const auto& instr : step.instructions) {
            const double s = scratch_[instr.src];
            if (s == 0.0)
                continue;
            double acc = 0.0;
            for (const auto& prod : instr.coeff) {
                double t = prod.literal;
                for (const auto& [k, pw] : prod.kernel_pows)
                    t *= dpow(kernel[static_cast<std::size_t>(k) - 1], pw);
                for (const auto& [nid, pw] : prod.value_pows)
                    t *= dpow(ct.get(g.ref(nid)), pw);
                acc += t;
            }
            buffer_[instr.dst_slot] += s * acc;
            peak_slot_ = std::max(peak_slot_, instr.dst_slot + 1);
        }
        peak_live_ = std::max(peak_live_, static_cast<std::uint32_t>(step.active_after.size()));
    }
    ran_ = true;
}

double Backpropagator::get(const MultiIndex& m) const {
    if (!ran_)
        throw UsageError("backpropagate() has not been run");
    auto slot = plan_->slot_of(m);
    if (!slot)
        throw UsageError("multi-index was not requested: " + m.to_string());
    if (*slot == BackpropPlan::kZeroSlot)
        return 0.0;
    double factorials = 1.0;
    for (const auto& [_, k] : m.entries())
        for (int i = 2; i <= k; ++i)
            factorials *= i;
    return buffer_[*slot] * factorials;
}

} // namespace adtool
