#pragma once

#include <cstdint>

#include "threatlang/attack_graph.hpp"

namespace threatlang {

// Layered benchmark DAG: `layers` x `width` steps, two parents per
// non-entry step, every third step an AND, exponential local TTCs.
// Layer 0 steps are entries. Node count is layers * width.
AttackGraph make_layered_graph(uint32_t layers, uint32_t width);

} // namespace threatlang
