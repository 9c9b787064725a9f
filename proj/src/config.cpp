#include "adtool/config.hpp"

#include <atomic>

#include "adtool/error.hpp"

namespace adtool {

namespace {
std::atomic<int> g_order_cap{kDefaultOrderCap};
}

int order_cap() noexcept { return g_order_cap.load(std::memory_order_relaxed); }

void set_order_cap(int cap) {
    if (cap < 1)
        throw UsageError("order cap must be at least 1");
    g_order_cap.store(cap, std::memory_order_relaxed);
}

} // namespace adtool
