#pragma once

#include <cstdint>
#include <vector>

#include "vecplan/strips.hpp"

namespace vecplan {

enum class SearchStrategy {
    Auto,            // breadth-first on small universes, greedy otherwise
    BreadthFirst,    // shortest plan, first-found among equals
    GreedyBestFirst  // additive delete-relaxation heuristic, not optimal
};

enum class SearchStatus { Found, Unsolvable, BudgetExceeded };

struct SearchResult {
    SearchStatus status = SearchStatus::Unsolvable;
    std::vector<ActionId> plan;  // valid only when Found
    uint64_t expanded = 0;
};

// Reference planner. Fully deterministic: queue order is FIFO (breadth-first)
// or (heuristic, insertion order) ascending (greedy), and successors are
// generated in ascending action-id order, so ties always resolve the same way.
// budget caps the number of expanded states.
SearchResult oracle_plan(const GroundDomain& dom, const Instance& inst,
                         uint64_t budget = 1000000,
                         SearchStrategy strategy = SearchStrategy::Auto);

// Additive delete-relaxation estimate of goal distance from s; returns -1 when
// the goal is unreachable even ignoring delete effects.
int64_t additive_heuristic(const GroundDomain& dom, const State& s, const PropSet& goal);

}  // namespace vecplan
