#include "vecplan/extraction.hpp"

#include <algorithm>

namespace vecplan {

std::vector<EstimatedTrace> estimate_traces(const SequenceModel& model,
                                            const std::vector<PartialTrace>& data) {
    std::vector<EstimatedTrace> out;
    out.reserve(data.size());
    for (const PartialTrace& t : data) out.push_back(model.unroll(t, UnrollMode::Inference));
    return out;
}

std::vector<std::optional<PropSet>> extract_preconditions(
    const std::vector<EstimatedTrace>& estimates, size_t num_actions,
    std::vector<size_t>* occurrences) {
    std::vector<std::optional<PropSet>> pre(num_actions);
    if (occurrences) occurrences->assign(num_actions, 0);
    for (const EstimatedTrace& est : estimates) {
        for (size_t i = 0; i < est.actions.size(); ++i) {
            const auto a = static_cast<size_t>(est.actions[i]);
            const PropSet state = from_mask(est.states[i]);
            if (pre[a])
                pre[a] = set_intersection(*pre[a], state);
            else
                pre[a] = state;
            if (occurrences) ++(*occurrences)[a];
        }
    }
    return pre;
}

LearnedDomainModel extract_model(const SequenceModel& model,
                                 const std::vector<PartialTrace>& training_data) {
    LearnedDomainModel lm{model, {}, {}};
    lm.preconditions = extract_preconditions(estimate_traces(model, training_data),
                                             model.num_actions(), &lm.occurrences);
    return lm;
}

std::vector<ActionId> learned_applicable(const LearnedDomainModel& lm, const StateMask& state) {
    std::vector<ActionId> out;
    for (size_t a = 0; a < lm.preconditions.size(); ++a) {
        if (!lm.preconditions[a]) continue;
        bool holds = true;
        for (PropId p : *lm.preconditions[a])
            if (!state[static_cast<size_t>(p)]) {
                holds = false;
                break;
            }
        if (holds) out.push_back(static_cast<ActionId>(a));
    }
    return out;
}

Vec bridge_state(const SequenceModel& model, const StateMask& state) {
    return model.state_vec(state);
}

std::string precondition_report(const LearnedDomainModel& lm, const GroundDomain& dom) {
    std::string out;
    std::vector<ActionId> unseen;
    for (size_t a = 0; a < lm.preconditions.size(); ++a) {
        if (!lm.preconditions[a]) {
            unseen.push_back(static_cast<ActionId>(a));
            continue;
        }
        out += "pre(" + dom.action(static_cast<ActionId>(a)).name + ") = {";
        bool first = true;
        for (PropId p : *lm.preconditions[a]) {
            if (!first) out += ", ";
            out += dom.prop(p).name;
            first = false;
        }
        out += "}  [" + std::to_string(lm.occurrences[a]) + " occurrences]\n";
    }
    if (!unseen.empty()) {
        out += "never seen:";
        for (ActionId a : unseen) out += " " + dom.action(a).name;
        out += "\n";
    }
    return out;
}

void save_learned_model(const std::string& path, const LearnedDomainModel& lm) {
    Checkpoint ck = model_checkpoint(lm.model);
    ck.meta.insert(ck.meta.begin(), {"kind", "learned-domain-model"});
    Vec occ(lm.occurrences.begin(), lm.occurrences.end());
    ck.add("occurrences", {occ.size()}, occ);
    for (size_t a = 0; a < lm.preconditions.size(); ++a) {
        if (!lm.preconditions[a]) continue;
        Vec ids;
        ids.reserve(lm.preconditions[a]->size());
        for (PropId p : *lm.preconditions[a]) ids.push_back(static_cast<double>(p));
        ck.add("pre." + std::to_string(a), {ids.size()}, ids);
    }
    write_checkpoint_file(path, ck);
}

LearnedDomainModel load_learned_model(const std::string& path, const GroundDomain& dom) {
    Checkpoint ck = read_checkpoint_file(path);
    const std::string* kind = ck.find_meta("kind");
    if (!kind || *kind != "learned-domain-model")
        throw CheckpointError("checkpoint at '" + path + "' is not a learned domain model");
    LearnedDomainModel lm{model_from_checkpoint(ck, dom), {}, {}};
    const size_t num_actions = lm.model.num_actions();
    lm.preconditions.resize(num_actions);
    const Checkpoint::Entry* occ = ck.find("occurrences");
    if (!occ || occ->data.size() != num_actions)
        throw CheckpointError("learned-model checkpoint has malformed occurrence counts");
    lm.occurrences.assign(occ->data.begin(), occ->data.end());
    for (size_t a = 0; a < num_actions; ++a) {
        const Checkpoint::Entry* e = ck.find("pre." + std::to_string(a));
        if (!e) continue;
        std::vector<PropId> ids;
        ids.reserve(e->data.size());
        for (double v : e->data) {
            auto p = static_cast<PropId>(v);
            if (p < 0 || static_cast<size_t>(p) >= dom.num_props())
                throw CheckpointError("precondition id out of range in learned model");
            ids.push_back(p);
        }
        lm.preconditions[a] = PropSet(std::move(ids));
    }
    return lm;
}

}  // namespace vecplan
