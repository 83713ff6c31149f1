#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "vecplan/extraction.hpp"
#include "vecplan/selector.hpp"
#include "vecplan/strips.hpp"

namespace vecplan {

// How the goal condition is completed into the full state handed to the
// selector as the query target. Goal satisfaction is always tested against
// the condition itself, never against the completed target.
enum class GoalMode {
    RecordedFullState,    // use the recorded final state when given, else complete
    GoalTrueOthersFalse,  // goal propositions true, everything else false
    OverlayOnInitial,     // goal propositions forced true on top of the initial state
};

enum class PlanOutcome { Plan, Fail, BudgetExceeded };

struct PlanStats {
    size_t expansions = 0;     // learned transitions taken
    size_t backtracks = 0;     // history pops
    size_t goal_attempts = 0;  // targets tried

    bool operator==(const PlanStats&) const = default;
};

struct PlanResult {
    PlanOutcome outcome = PlanOutcome::Fail;
    std::vector<ActionId> plan;  // meaningful only when outcome == Plan
    PlanStats stats;
};

struct PlannerConfig {
    size_t budget = 10000;  // expansion cap, shared across goal targets
    size_t k_top = 3;       // recommendation slate width
    GoalMode goal_mode = GoalMode::RecordedFullState;
};

// Selector query targets for an instance, in trial order. Every mode yields
// one target today; the planner loop is written against a list.
std::vector<StateMask> goal_targets(size_t num_props, const Instance& inst, GoalMode mode,
                                    const std::optional<StateMask>& recorded_goal = {});

// Greedy forward search over the learned transition function. Each step takes
// the highest-confidence recommended action that the learned model considers
// applicable and that was not already tried from this state; dead ends pop the
// history stack, dropping the last plan action. Targets are attempted in order
// with fresh Visited/History each.
PlanResult plan_over_targets(const LearnedDomainModel& lm, const SelectorNet& sel,
                             const StateMask& initial, const PropSet& goal,
                             const std::vector<StateMask>& targets, const PlannerConfig& pc = {});

PlanResult plan(const LearnedDomainModel& lm, const SelectorNet& sel, const Instance& inst,
                const PlannerConfig& pc = {}, const std::optional<StateMask>& recorded_goal = {});

// Replay a plan under the learned transition function; m actions yield m+1
// states. Diagnostic plumbing for tests and reports.
std::vector<StateMask> simulate(const LearnedDomainModel& lm, const StateMask& start,
                                const std::vector<ActionId>& plan);

}  // namespace vecplan
