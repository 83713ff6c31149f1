#include "vecplan/planner.hpp"

#include <algorithm>
#include <set>
#include <utility>

namespace vecplan {

namespace {

bool goal_holds(const PropSet& goal, const StateMask& s) {
    for (PropId p : goal)
        if (!s[p]) return false;
    return true;
}

}  // namespace

std::vector<StateMask> goal_targets(size_t num_props, const Instance& inst, GoalMode mode,
                                    const std::optional<StateMask>& recorded_goal) {
    if (mode == GoalMode::RecordedFullState && recorded_goal) return {*recorded_goal};
    StateMask target(num_props, 0);
    if (mode == GoalMode::OverlayOnInitial) target = to_mask(inst.initial, num_props);
    for (PropId p : inst.goal) target[p] = 1;
    return {target};
}

PlanResult plan_over_targets(const LearnedDomainModel& lm, const SelectorNet& sel,
                             const StateMask& initial, const PropSet& goal,
                             const std::vector<StateMask>& targets, const PlannerConfig& pc) {
    PlanResult res;
    if (goal_holds(goal, initial)) {
        res.outcome = PlanOutcome::Plan;
        return res;
    }

    for (const StateMask& target : targets) {
        ++res.stats.goal_attempts;
        const Vec goal_vec = bridge_state(lm.model, target);

        StateMask s = initial;
        Vec s_vec = bridge_state(lm.model, s);
        std::vector<ActionId> sigma;
        std::set<std::pair<StateMask, ActionId>> visited;
        std::vector<std::pair<StateMask, std::vector<ActionId>>> history;

        for (;;) {
            std::optional<ActionId> pick;
            {
                std::vector<ActionId> usable = learned_applicable(lm, s);
                for (const Recommendation& rec : recommend(sel, s_vec, goal_vec, pc.k_top)) {
                    if (!std::binary_search(usable.begin(), usable.end(), rec.action)) continue;
                    if (visited.count({s, rec.action})) continue;
                    pick = rec.action;
                    break;
                }
            }
            if (!pick) {
                if (history.empty()) break;
                ++res.stats.backtracks;
                s = std::move(history.back().first);
                sigma = std::move(history.back().second);
                history.pop_back();
                s_vec = bridge_state(lm.model, s);
                continue;
            }
            if (res.stats.expansions == pc.budget) {
                res.outcome = PlanOutcome::BudgetExceeded;
                return res;
            }
            visited.insert({s, *pick});
            history.emplace_back(s, sigma);
            sigma.push_back(*pick);
            ++res.stats.expansions;
            auto [next, next_vec] = lm.model.transition(s, *pick);
            s = std::move(next);
            s_vec = std::move(next_vec);
            if (goal_holds(goal, s)) {
                res.outcome = PlanOutcome::Plan;
                res.plan = std::move(sigma);
                return res;
            }
        }
    }
    res.outcome = PlanOutcome::Fail;
    return res;
}

PlanResult plan(const LearnedDomainModel& lm, const SelectorNet& sel, const Instance& inst,
                const PlannerConfig& pc, const std::optional<StateMask>& recorded_goal) {
    const size_t n = lm.model.num_props();
    return plan_over_targets(lm, sel, to_mask(inst.initial, n), inst.goal,
                             goal_targets(n, inst, pc.goal_mode, recorded_goal), pc);
}

std::vector<StateMask> simulate(const LearnedDomainModel& lm, const StateMask& start,
                                const std::vector<ActionId>& plan) {
    std::vector<StateMask> out;
    out.reserve(plan.size() + 1);
    out.push_back(start);
    for (ActionId a : plan) out.push_back(lm.model.transition(out.back(), a).first);
    return out;
}

}  // namespace vecplan
