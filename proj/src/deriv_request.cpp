#include "adtool/deriv_request.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "adtool/config.hpp"
#include "adtool/error.hpp"

namespace adtool {

MultiIndex MultiIndex::of(const VarId& var, int order) {
    if (order < 1)
        throw UsageError("derivative order must be at least 1 (got " +
                         std::to_string(order) + ")");
    MultiIndex m;
    m.entries_.emplace_back(var, order);
    return m;
}

int MultiIndex::total() const noexcept {
    int t = 0;
    for (const auto& [_, k] : entries_)
        t += k;
    return t;
}

int MultiIndex::order_of(std::string_view var) const noexcept {
    for (const auto& [v, k] : entries_)
        if (v == var)
            return k;
    return 0;
}

MultiIndex MultiIndex::times(const MultiIndex& other) const {
    MultiIndex out;
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    while (a != entries_.end() || b != other.entries_.end()) {
        if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first))
            out.entries_.push_back(*a++);
        else if (a == entries_.end() || b->first < a->first)
            out.entries_.push_back(*b++);
        else {
            out.entries_.emplace_back(a->first, a->second + b->second);
            ++a;
            ++b;
        }
    }
    return out;
}

std::string MultiIndex::to_string() const {
    std::string out;
    for (const auto& [v, k] : entries_) {
        if (!out.empty())
            out += '*';
        if (k == 1) {
            out += "d(" + v + ")";
        } else {
            char buf[32];
            std::snprintf(buf, sizeof buf, "d<%d>(", k);
            out += buf;
            out += v + ")";
        }
    }
    return out;
}

MultiIndex d(const VarId& var, int order) { return MultiIndex::of(var, order); }
MultiIndex product(const MultiIndex& a, const MultiIndex& b) { return a.times(b); }

// ---- request grammar --------------------------------------------------------

namespace {

struct RequestLexer {
    std::string_view text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
            ++pos;
    }
    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) {
        throw ParseError("request \"" + std::string(text) + "\": " + what + " at offset " +
                         std::to_string(pos));
    }
};

MultiIndex parse_term(RequestLexer& lx) {
    if (!lx.eat('d'))
        lx.fail("expected 'd'");
    int order = 1;
    if (lx.eat('<')) {
        lx.skip_ws();
        std::size_t start = lx.pos;
        while (lx.pos < lx.text.size() &&
               std::isdigit(static_cast<unsigned char>(lx.text[lx.pos])))
            ++lx.pos;
        if (lx.pos == start)
            lx.fail("expected integer order");
        order = std::atoi(std::string(lx.text.substr(start, lx.pos - start)).c_str());
        if (order < 1)
            lx.fail("derivative order must be at least 1");
        if (!lx.eat('>'))
            lx.fail("expected '>'");
    }
    if (!lx.eat('('))
        lx.fail("expected '('");
    lx.skip_ws();
    std::size_t start = lx.pos;
    while (lx.pos < lx.text.size()) {
        auto c = static_cast<unsigned char>(lx.text[lx.pos]);
        if (std::isalnum(c) || c == '_')
            ++lx.pos;
        else
            break;
    }
    std::string name(lx.text.substr(start, lx.pos - start));
    if (!is_identifier(name))
        lx.fail("expected variable name");
    if (!lx.eat(')'))
        lx.fail("expected ')'");
    return MultiIndex::of(name, order);
}

} // namespace

MultiIndex parse_request(std::string_view text) {
    RequestLexer lx{text};
    MultiIndex m = parse_term(lx);
    while (lx.eat('*'))
        m = m.times(parse_term(lx));
    lx.skip_ws();
    if (lx.pos != lx.text.size())
        lx.fail("unexpected trailing input");
    if (m.total() > order_cap())
        throw ParseError("request \"" + std::string(text) + "\": total order " +
                         std::to_string(m.total()) + " exceeds order cap " +
                         std::to_string(order_cap()));
    return m;
}

// ---- request sets -----------------------------------------------------------

RequestSet::RequestSet(const std::vector<MultiIndex>& requests) {
    for (const auto& m : requests)
        add(m);
}

void RequestSet::add(const MultiIndex& m) {
    if (m.empty())
        throw UsageError("empty multi-index cannot be requested");
    if (!contains(m))
        items_.push_back(m);
}

bool RequestSet::contains(const MultiIndex& m) const noexcept {
    return std::find(items_.begin(), items_.end(), m) != items_.end();
}

int RequestSet::max_order() const noexcept {
    int mx = 0;
    for (const auto& m : items_)
        mx = std::max(mx, m.total());
    return mx;
}

std::vector<VarId> RequestSet::active_variables() const {
    std::vector<VarId> vars;
    for (const auto& m : items_)
        for (const auto& [v, _] : m.entries())
            vars.push_back(v);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    return vars;
}

// ---- counting ---------------------------------------------------------------

namespace {

std::uint64_t binomial_checked(int n, int k) {
    if (k < 0 || n < 0 || k > n)
        return 0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<unsigned>(n - k + i);
        r /= static_cast<unsigned>(i); // exact: product of i consecutive ints
        if (r > static_cast<unsigned __int128>(UINT64_MAX))
            throw OverflowError("binomial coefficient exceeds 64 bits");
    }
    return static_cast<std::uint64_t>(r);
}

} // namespace

std::uint64_t multiset_count(int n, int k) {
    if (n < 1)
        throw UsageError("multiset_count requires n >= 1");
    if (k < 0)
        throw UsageError("multiset_count requires k >= 0");
    return binomial_checked(n + k - 1, k);
}

std::uint64_t full_tensor_size(int n, int d) {
    if (n < 1)
        throw UsageError("full_tensor_size requires n >= 1");
    if (d < 0)
        throw UsageError("full_tensor_size requires d >= 0");
    return binomial_checked(n + d, d);
}

namespace {

// Exponent vectors of the given total, lexicographically descending: the
// first variable takes as much as possible first.
void emit_compositions(const std::vector<VarId>& vars, std::size_t i, int remaining,
                       std::vector<int>& exps, std::vector<MultiIndex>& out) {
    if (i + 1 == vars.size()) {
        exps[i] = remaining;
        MultiIndex m;
        for (std::size_t j = 0; j < vars.size(); ++j)
            if (exps[j] > 0)
                m = m.times(MultiIndex::of(vars[j], exps[j]));
        out.push_back(m);
        return;
    }
    for (int take = remaining; take >= 0; --take) {
        exps[i] = take;
        emit_compositions(vars, i + 1, remaining - take, exps, out);
    }
}

} // namespace

std::vector<MultiIndex> enumerate_full_tensor(const std::vector<VarId>& vars, int d) {
    if (vars.empty())
        throw UsageError("enumerate_full_tensor requires at least one variable");
    std::vector<VarId> unique_sorted(vars);
    std::sort(unique_sorted.begin(), unique_sorted.end());
    if (std::adjacent_find(unique_sorted.begin(), unique_sorted.end()) != unique_sorted.end())
        throw UsageError("enumerate_full_tensor requires distinct variables");
    if (d < 1)
        return {};
    std::vector<MultiIndex> out;
    std::vector<int> exps(vars.size(), 0);
    for (int total = 1; total <= d; ++total)
        emit_compositions(vars, 0, total, exps, out);
    return out;
}

} // namespace adtool
