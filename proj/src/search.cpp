#include "vecplan/search.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <queue>
#include <string>
#include <unordered_map>

namespace vecplan {

namespace {

// Packed byte key for visited/parent maps.
std::string state_key(const State& s, size_t universe) {
    std::string key((universe + 7) / 8, '\0');
    for (PropId p : s) key[static_cast<size_t>(p) >> 3] |= static_cast<char>(1 << (p & 7));
    return key;
}

struct Edge {
    std::string parent;
    ActionId action;
};

std::vector<ActionId> reconstruct(const std::unordered_map<std::string, Edge>& parents,
                                  std::string key) {
    std::vector<ActionId> plan;
    for (auto it = parents.find(key); it != parents.end(); it = parents.find(key)) {
        plan.push_back(it->second.action);
        key = it->second.parent;
    }
    std::reverse(plan.begin(), plan.end());
    return plan;
}

SearchResult breadth_first(const GroundDomain& dom, const Instance& inst, uint64_t budget) {
    SearchResult res;
    if (inst.goal.subset_of(inst.initial)) {
        res.status = SearchStatus::Found;
        return res;
    }
    const size_t universe = dom.num_props();
    std::deque<State> frontier{inst.initial};
    std::unordered_map<std::string, Edge> parents;
    parents.reserve(1024);
    std::unordered_map<std::string, bool> seen;
    seen[state_key(inst.initial, universe)] = true;

    while (!frontier.empty()) {
        if (res.expanded >= budget) {
            res.status = SearchStatus::BudgetExceeded;
            return res;
        }
        State s = std::move(frontier.front());
        frontier.pop_front();
        ++res.expanded;
        std::string skey = state_key(s, universe);
        for (const GroundAction& a : dom.actions()) {
            if (!a.precondition.subset_of(s)) continue;
            State next = set_union(set_difference(s, a.del_effects), a.add_effects);
            std::string nkey = state_key(next, universe);
            if (seen.count(nkey)) continue;
            seen[nkey] = true;
            parents[nkey] = {skey, a.id};
            if (inst.goal.subset_of(next)) {
                res.status = SearchStatus::Found;
                res.plan = reconstruct(parents, nkey);
                return res;
            }
            frontier.push_back(std::move(next));
        }
    }
    res.status = SearchStatus::Unsolvable;
    return res;
}

SearchResult greedy_best_first(const GroundDomain& dom, const Instance& inst, uint64_t budget) {
    SearchResult res;
    const size_t universe = dom.num_props();
    struct Entry {
        int64_t h;
        uint64_t order;
        State state;
    };
    struct Worse {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.h != b.h) return a.h > b.h;
            return a.order > b.order;
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, Worse> frontier;
    std::unordered_map<std::string, Edge> parents;
    std::unordered_map<std::string, bool> seen;
    uint64_t order = 0;

    int64_t h0 = additive_heuristic(dom, inst.initial, inst.goal);
    if (h0 < 0) {
        res.status = SearchStatus::Unsolvable;
        return res;
    }
    frontier.push({h0, order++, inst.initial});
    seen[state_key(inst.initial, universe)] = true;

    while (!frontier.empty()) {
        if (res.expanded >= budget) {
            res.status = SearchStatus::BudgetExceeded;
            return res;
        }
        State s = frontier.top().state;
        frontier.pop();
        ++res.expanded;
        std::string skey = state_key(s, universe);
        if (inst.goal.subset_of(s)) {
            res.status = SearchStatus::Found;
            res.plan = reconstruct(parents, skey);
            return res;
        }
        for (const GroundAction& a : dom.actions()) {
            if (!a.precondition.subset_of(s)) continue;
            State next = set_union(set_difference(s, a.del_effects), a.add_effects);
            std::string nkey = state_key(next, universe);
            if (seen.count(nkey)) continue;
            seen[nkey] = true;
            int64_t h = additive_heuristic(dom, next, inst.goal);
            if (h < 0) continue;  // unreachable even under relaxation
            parents[nkey] = {skey, a.id};
            frontier.push({h, order++, std::move(next)});
        }
    }
    res.status = SearchStatus::Unsolvable;
    return res;
}

}  // namespace

int64_t additive_heuristic(const GroundDomain& dom, const State& s, const PropSet& goal) {
    constexpr int64_t kInf = std::numeric_limits<int64_t>::max() / 4;
    std::vector<int64_t> cost(dom.num_props(), kInf);
    for (PropId p : s) cost[static_cast<size_t>(p)] = 0;
    // Bellman-Ford style fixpoint; universes here are tiny.
    bool changed = true;
    while (changed) {
        changed = false;
        for (const GroundAction& a : dom.actions()) {
            int64_t c = 1;
            for (PropId p : a.precondition) {
                if (cost[static_cast<size_t>(p)] >= kInf) {
                    c = kInf;
                    break;
                }
                c += cost[static_cast<size_t>(p)];
            }
            if (c >= kInf) continue;
            for (PropId p : a.add_effects) {
                if (c < cost[static_cast<size_t>(p)]) {
                    cost[static_cast<size_t>(p)] = c;
                    changed = true;
                }
            }
        }
    }
    int64_t total = 0;
    for (PropId p : goal) {
        if (cost[static_cast<size_t>(p)] >= kInf) return -1;
        total += cost[static_cast<size_t>(p)];
    }
    return total;
}

SearchResult oracle_plan(const GroundDomain& dom, const Instance& inst, uint64_t budget,
                         SearchStrategy strategy) {
    if (strategy == SearchStrategy::Auto)
        strategy = dom.num_props() <= 28 ? SearchStrategy::BreadthFirst
                                         : SearchStrategy::GreedyBestFirst;
    if (strategy == SearchStrategy::BreadthFirst) return breadth_first(dom, inst, budget);
    return greedy_best_first(dom, inst, budget);
}

}  // namespace vecplan
