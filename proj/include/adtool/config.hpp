#pragma once

namespace adtool {

inline constexpr int kDefaultOrderCap = 16;

// Highest total derivative order the engine accepts. Factorial growth makes
// large orders impractical, so the cap is deliberately small by default; the
// CLI raises it through the ADTOOL_ORDER_CAP environment variable.
int order_cap() noexcept;
void set_order_cap(int cap); // throws UsageError if cap < 1

} // namespace adtool
