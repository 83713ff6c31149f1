#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vecplan/psg.hpp"
#include "vecplan/strips.hpp"
#include "vecplan/trace.hpp"

namespace vecplan {

// Usable domain model distilled from a trained sequence model: per-action
// precondition sets plus the applicability rule over them. Only actions that
// occurred in the training traces are considered applicable anywhere.
struct LearnedDomainModel {
    SequenceModel model;
    // Indexed by action id; nullopt for actions never seen in training.
    std::vector<std::optional<PropSet>> preconditions;
    std::vector<size_t> occurrences;  // diagnostic: trace steps per action

    bool seen(ActionId a) const {
        return a >= 0 && static_cast<size_t>(a) < preconditions.size() &&
               preconditions[static_cast<size_t>(a)].has_value();
    }
    bool operator==(const LearnedDomainModel&) const = default;
};

// One inference-mode unroll per trace; deterministic, order-preserving.
std::vector<EstimatedTrace> estimate_traces(const SequenceModel& model,
                                            const std::vector<PartialTrace>& data);

// pre(a) = intersection of the decoded states in which a executes, over the
// given estimated traces. Unseen actions stay nullopt.
std::vector<std::optional<PropSet>> extract_preconditions(
    const std::vector<EstimatedTrace>& estimates, size_t num_actions,
    std::vector<size_t>* occurrences = nullptr);

// Convenience: unroll the training set with the trained model and intersect.
LearnedDomainModel extract_model(const SequenceModel& model,
                                 const std::vector<PartialTrace>& training_data);

// alpha(s): every seen action whose precondition set holds in the state.
std::vector<ActionId> learned_applicable(const LearnedDomainModel& lm, const StateMask& state);

// Total state-to-vector bridge; defined for every boolean state, seen or not.
Vec bridge_state(const SequenceModel& model, const StateMask& state);

// Human-readable report: one line per seen action with its precondition set
// spelled out by proposition name, plus occurrence counts.
std::string precondition_report(const LearnedDomainModel& lm, const GroundDomain& dom);

void save_learned_model(const std::string& path, const LearnedDomainModel& lm);
LearnedDomainModel load_learned_model(const std::string& path, const GroundDomain& dom);

}  // namespace vecplan
