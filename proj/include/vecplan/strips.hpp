#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace vecplan {

using PropId = int32_t;
using ActionId = int32_t;

// Sorted, duplicate-free set of proposition ids. Serves both as a state (the
// set of propositions true in it) and as a condition (precondition, goal).
class PropSet {
public:
    PropSet() = default;
    explicit PropSet(std::vector<PropId> ids);

    bool contains(PropId p) const;
    bool subset_of(const PropSet& other) const;
    void insert(PropId p);

    size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }
    const std::vector<PropId>& ids() const { return ids_; }
    auto begin() const { return ids_.begin(); }
    auto end() const { return ids_.end(); }

    bool operator==(const PropSet&) const = default;

private:
    std::vector<PropId> ids_;
};

using State = PropSet;

// Dense 0/1 view of a proposition set over the whole universe.
using StateMask = std::vector<uint8_t>;

StateMask to_mask(const PropSet& s, size_t universe);
PropSet from_mask(const StateMask& m);
bool mask_subset(const StateMask& sub, const StateMask& super);

PropSet set_union(const PropSet& a, const PropSet& b);
PropSet set_difference(const PropSet& a, const PropSet& b);
PropSet set_intersection(const PropSet& a, const PropSet& b);

struct Proposition {
    PropId id = -1;
    std::string name;
};

// Ground action; add and delete effects must be disjoint (checked when a
// domain is assembled), so apply order (delete, then add) never matters for
// propositions mentioned in both.
struct GroundAction {
    ActionId id = -1;
    std::string name;
    PropSet precondition;
    PropSet add_effects;
    PropSet del_effects;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InapplicableAction : std::runtime_error {
    InapplicableAction(std::string msg, ActionId a) : std::runtime_error(std::move(msg)), action(a) {}
    ActionId action;
};

class GroundDomain {
public:
    GroundDomain() = default;
    // Validates: contiguous ids, unique names, effect disjointness, all
    // referenced propositions in range. Throws DomainError.
    GroundDomain(std::string name, std::vector<Proposition> props, std::vector<GroundAction> actions);

    const std::string& name() const { return name_; }
    size_t num_props() const { return props_.size(); }
    size_t num_actions() const { return actions_.size(); }
    const std::vector<Proposition>& propositions() const { return props_; }
    const std::vector<GroundAction>& actions() const { return actions_; }
    const Proposition& prop(PropId id) const { return props_.at(static_cast<size_t>(id)); }
    const GroundAction& action(ActionId id) const { return actions_.at(static_cast<size_t>(id)); }
    std::optional<PropId> find_prop(const std::string& name) const;
    std::optional<ActionId> find_action(const std::string& name) const;

    // Content hash over names and effect structure; checkpoints store it so a
    // model is never silently applied to a different domain.
    uint64_t fingerprint() const;

private:
    std::string name_;
    std::vector<Proposition> props_;
    std::vector<GroundAction> actions_;
    std::unordered_map<std::string, PropId> prop_index_;
    std::unordered_map<std::string, ActionId> action_index_;
};

struct Instance {
    State initial;
    PropSet goal;  // condition: satisfied by any state it is a subset of
};

// Action ids whose preconditions hold in s, ascending.
std::vector<ActionId> applicable(const GroundDomain& dom, const State& s);

// Successor state (s \ del) | add. Throws InapplicableAction if the
// precondition does not hold.
State apply(const GroundDomain& dom, const State& s, ActionId a);

struct ValidationResult {
    bool ok = false;
    // Step of first failure (== plan length when the plan executes but the
    // goal is unsatisfied); meaningless when ok.
    size_t fail_step = 0;
    std::string reason;
};

ValidationResult validate_plan(const GroundDomain& dom, const Instance& inst,
                               const std::vector<ActionId>& plan);

}  // namespace vecplan
