#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adtool/graph.hpp"

namespace adtool {

// What an operator's derivative kernels read. add/sub/neg read nothing,
// mul reads both operand values, exp/sqrt/tan read their own output, and the
// remaining univariates read their input.
struct UnaryStorageClass {
    bool needs_input = false;
    bool needs_output = false;
};
struct BinaryStorageClass {
    bool needs_left = false;
    bool needs_right = false;
};

UnaryStorageClass storage_class(const UnaryOp& op);
BinaryStorageClass storage_class(BinaryOp op);

enum class StoragePolicy { Minimal, All };

// Which node values the tape retains, and where. A node is stored iff it is a
// declared output, an input variable, some consumer's storage class demands
// its value, or its own class demands its output while a derivative path runs
// through it.
struct StoragePlan {
    std::vector<std::uint32_t> stored; // sorted node ids
    std::vector<std::int32_t> slot;    // node id -> slot index, -1 if elided
    std::uint32_t slot_count = 0;

    bool is_stored(std::uint32_t id) const {
        return id < slot.size() && slot[id] >= 0;
    }
};

StoragePlan plan_storage(const Graph& g, std::span<const NodeRef> outputs, int max_order,
                         StoragePolicy policy = StoragePolicy::Minimal);

// The forward pass: set inputs, evaluate once in topological order, read
// retained values. One instance is single-writer; many instances over the
// same Graph may run in parallel.
class CalcTree {
  public:
    CalcTree(const Graph& g, std::vector<NodeRef> outputs, int max_order = 1,
             StoragePolicy policy = StoragePolicy::Minimal);

    void set_input(const VarId& name, double value);
    void set_input(NodeRef var, double value);
    void evaluate();
    double get(NodeRef n) const;

    bool evaluated() const noexcept { return evaluated_; }
    const Graph& graph() const noexcept { return *graph_; }
    const StoragePlan& storage() const noexcept { return plan_; }
    const std::vector<NodeRef>& outputs() const noexcept { return outputs_; }

  private:
    const Graph* graph_;
    std::vector<NodeRef> outputs_;
    StoragePlan plan_;
    std::vector<std::uint32_t> schedule_; // reachable ids, ascending
    std::vector<double> values_;          // one slot per stored node
    std::vector<std::optional<double>> inputs_; // var index -> value
    bool evaluated_ = false;
};

} // namespace adtool
