#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adtool/graph.hpp"

namespace adtool {

// Map from input variable to derivative order: the meaning of d<2>(S)*d(V).
// Entries are kept sorted by variable name with strictly positive orders.
class MultiIndex {
  public:
    MultiIndex() = default;

    static MultiIndex of(const VarId& var, int order);

    const std::vector<std::pair<VarId, int>>& entries() const noexcept { return entries_; }
    int total() const noexcept;
    int order_of(std::string_view var) const noexcept; // 0 when absent
    bool empty() const noexcept { return entries_.empty(); }

    MultiIndex times(const MultiIndex& other) const;

    std::string to_string() const; // "d<2>(V)*d(S)" style, canonical order

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
    friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

  private:
    std::vector<std::pair<VarId, int>> entries_;
};

// d(V), d(V, 2); product merges by adding per-variable orders.
MultiIndex d(const VarId& var, int order = 1);
MultiIndex product(const MultiIndex& a, const MultiIndex& b);
inline MultiIndex operator*(const MultiIndex& a, const MultiIndex& b) { return product(a, b); }

// `request := term ('*' term)* ; term := 'd' ['<' INT '>'] '(' IDENT ')'`
MultiIndex parse_request(std::string_view text);

// Deduplicated set of requested multi-indices; variables absent from every
// request are passive and no derivative work may touch them.
class RequestSet {
  public:
    RequestSet() = default;
    explicit RequestSet(const std::vector<MultiIndex>& requests);

    void add(const MultiIndex& m);
    const std::vector<MultiIndex>& items() const noexcept { return items_; }
    bool contains(const MultiIndex& m) const noexcept;
    bool empty() const noexcept { return items_.empty(); }
    std::size_t size() const noexcept { return items_.size(); }
    int max_order() const noexcept;
    std::vector<VarId> active_variables() const; // sorted union of supports

  private:
    std::vector<MultiIndex> items_; // insertion order, deduplicated
};

// multiset(n, k) = C(n+k-1, k): distinct order-k derivatives of n inputs.
std::uint64_t multiset_count(int n, int k);
// C(n+d, d): size of the full tensor up to order d, primal included.
std::uint64_t full_tensor_size(int n, int d);

// All multi-indices with 1 <= |M| <= d over the given variables, in graded
// lexicographic order (earlier variables carry higher exponents first).
std::vector<MultiIndex> enumerate_full_tensor(const std::vector<VarId>& vars, int d);

} // namespace adtool
