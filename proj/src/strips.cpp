#include "vecplan/strips.hpp"

#include <algorithm>
#include <cstring>

#include "vecplan/rng.hpp"

namespace vecplan {

PropSet::PropSet(std::vector<PropId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

bool PropSet::contains(PropId p) const {
    return std::binary_search(ids_.begin(), ids_.end(), p);
}

bool PropSet::subset_of(const PropSet& other) const {
    return std::includes(other.ids_.begin(), other.ids_.end(), ids_.begin(), ids_.end());
}

void PropSet::insert(PropId p) {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), p);
    if (it == ids_.end() || *it != p) ids_.insert(it, p);
}

StateMask to_mask(const PropSet& s, size_t universe) {
    StateMask m(universe, 0);
    for (PropId p : s) m.at(static_cast<size_t>(p)) = 1;
    return m;
}

PropSet from_mask(const StateMask& m) {
    std::vector<PropId> ids;
    for (size_t i = 0; i < m.size(); ++i)
        if (m[i]) ids.push_back(static_cast<PropId>(i));
    return PropSet(std::move(ids));
}

bool mask_subset(const StateMask& sub, const StateMask& super) {
    if (sub.size() != super.size()) return false;
    for (size_t i = 0; i < sub.size(); ++i)
        if (sub[i] && !super[i]) return false;
    return true;
}

PropSet set_union(const PropSet& a, const PropSet& b) {
    std::vector<PropId> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return PropSet(std::move(out));
}

PropSet set_difference(const PropSet& a, const PropSet& b) {
    std::vector<PropId> out;
    out.reserve(a.size());
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return PropSet(std::move(out));
}

PropSet set_intersection(const PropSet& a, const PropSet& b) {
    std::vector<PropId> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return PropSet(std::move(out));
}

namespace {

void check_ids_in_range(const PropSet& s, size_t universe, const std::string& what) {
    for (PropId p : s) {
        if (p < 0 || static_cast<size_t>(p) >= universe)
            throw DomainError(what + ": proposition id " + std::to_string(p) + " out of range");
    }
}

}  // namespace

GroundDomain::GroundDomain(std::string name, std::vector<Proposition> props,
                           std::vector<GroundAction> actions)
    : name_(std::move(name)), props_(std::move(props)), actions_(std::move(actions)) {
    for (size_t i = 0; i < props_.size(); ++i) {
        if (props_[i].id != static_cast<PropId>(i))
            throw DomainError("proposition ids must be contiguous from 0");
        if (props_[i].name.empty()) throw DomainError("empty proposition name");
        if (!prop_index_.emplace(props_[i].name, props_[i].id).second)
            throw DomainError("duplicate proposition name: " + props_[i].name);
    }
    for (size_t i = 0; i < actions_.size(); ++i) {
        GroundAction& a = actions_[i];
        if (a.id != static_cast<ActionId>(i))
            throw DomainError("action ids must be contiguous from 0");
        if (a.name.empty()) throw DomainError("empty action name");
        if (!action_index_.emplace(a.name, a.id).second)
            throw DomainError("duplicate action name: " + a.name);
        check_ids_in_range(a.precondition, props_.size(), "action " + a.name + " precondition");
        check_ids_in_range(a.add_effects, props_.size(), "action " + a.name + " add effects");
        check_ids_in_range(a.del_effects, props_.size(), "action " + a.name + " delete effects");
        if (!set_intersection(a.add_effects, a.del_effects).empty())
            throw DomainError("action " + a.name + ": add and delete effects overlap");
    }
}

std::optional<PropId> GroundDomain::find_prop(const std::string& name) const {
    auto it = prop_index_.find(name);
    if (it == prop_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<ActionId> GroundDomain::find_action(const std::string& name) const {
    auto it = action_index_.find(name);
    if (it == action_index_.end()) return std::nullopt;
    return it->second;
}

uint64_t GroundDomain::fingerprint() const {
    uint64_t h = 0xcbf29ce484222325ull;
    auto feed_str = [&h](const std::string& s) {
        h = fnv1a64(s.data(), s.size(), h);
        h = fnv1a64("\x1f", 1, h);
    };
    auto feed_set = [&h](const PropSet& s) {
        for (PropId p : s) h = fnv1a64(&p, sizeof(p), h);
        h = fnv1a64("\x1e", 1, h);
    };
    feed_str(name_);
    for (const Proposition& p : props_) feed_str(p.name);
    for (const GroundAction& a : actions_) {
        feed_str(a.name);
        feed_set(a.precondition);
        feed_set(a.add_effects);
        feed_set(a.del_effects);
    }
    return h;
}

std::vector<ActionId> applicable(const GroundDomain& dom, const State& s) {
    std::vector<ActionId> out;
    for (const GroundAction& a : dom.actions())
        if (a.precondition.subset_of(s)) out.push_back(a.id);
    return out;
}

State apply(const GroundDomain& dom, const State& s, ActionId id) {
    const GroundAction& a = dom.action(id);
    if (!a.precondition.subset_of(s)) {
        std::string missing;
        for (PropId p : a.precondition)
            if (!s.contains(p)) missing += (missing.empty() ? "" : ", ") + dom.prop(p).name;
        throw InapplicableAction("action " + a.name + " not applicable; missing: " + missing, id);
    }
    return set_union(set_difference(s, a.del_effects), a.add_effects);
}

ValidationResult validate_plan(const GroundDomain& dom, const Instance& inst,
                               const std::vector<ActionId>& plan) {
    State s = inst.initial;
    for (size_t i = 0; i < plan.size(); ++i) {
        ActionId id = plan[i];
        if (id < 0 || static_cast<size_t>(id) >= dom.num_actions())
            return {false, i, "unknown action id " + std::to_string(id)};
        const GroundAction& a = dom.action(id);
        if (!a.precondition.subset_of(s))
            return {false, i, "precondition of " + a.name + " not satisfied at step " + std::to_string(i)};
        s = set_union(set_difference(s, a.del_effects), a.add_effects);
    }
    if (!inst.goal.subset_of(s)) {
        std::string missing;
        for (PropId p : inst.goal)
            if (!s.contains(p)) missing += (missing.empty() ? "" : ", ") + dom.prop(p).name;
        return {false, plan.size(), "goal not satisfied; missing: " + missing};
    }
    return {true, plan.size(), ""};
}

}  // namespace vecplan
