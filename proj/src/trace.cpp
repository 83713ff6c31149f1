#include "vecplan/trace.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "vecplan/domain_io.hpp"
#include "vecplan/rng.hpp"

namespace vecplan {

namespace {

std::string instance_key(const Instance& inst) {
    std::string key;
    for (PropId p : inst.initial) key += std::to_string(p) + ",";
    key += "|";
    for (PropId p : inst.goal) key += std::to_string(p) + ",";
    return key;
}

}  // namespace

std::vector<Instance> gen_instances(const MiniDomainConfig& cfg, const GroundDomain& dom,
                                    size_t count, uint64_t seed, uint64_t oracle_budget,
                                    SearchStrategy strategy) {
    std::vector<Instance> out;
    std::set<std::string> seen;
    const size_t max_attempts = count * 200 + 1000;
    for (size_t attempt = 0; out.size() < count; ++attempt) {
        if (attempt >= max_attempts)
            throw GenerationExhausted("could not generate " + std::to_string(count) +
                                      " distinct solvable instances in " +
                                      std::to_string(max_attempts) + " attempts");
        Rng rng(derive_seed(seed, attempt));
        Instance inst = sample_instance(cfg, dom, rng);
        if (!seen.insert(instance_key(inst)).second) continue;
        SearchResult sr = oracle_plan(dom, inst, oracle_budget, strategy);
        if (sr.status != SearchStatus::Found) continue;
        out.push_back(std::move(inst));
    }
    return out;
}

PlanTrace gen_trace(const GroundDomain& dom, const Instance& inst, uint64_t oracle_budget,
                    SearchStrategy strategy) {
    SearchResult sr = oracle_plan(dom, inst, oracle_budget, strategy);
    if (sr.status != SearchStatus::Found)
        throw TraceError(sr.status == SearchStatus::Unsolvable
                             ? "reference planner: instance unsolvable"
                             : "reference planner: search budget exceeded");
    PlanTrace t;
    t.states.push_back(inst.initial);
    for (ActionId a : sr.plan) {
        t.states.push_back(apply(dom, t.states.back(), a));
        t.actions.push_back(a);
    }
    return t;
}

std::vector<PlanTrace> gen_traces(const GroundDomain& dom, const std::vector<Instance>& instances,
                                  uint64_t oracle_budget, SearchStrategy strategy) {
    std::vector<PlanTrace> out;
    out.reserve(instances.size());
    for (size_t i = 0; i < instances.size(); ++i) {
        try {
            out.push_back(gen_trace(dom, instances[i], oracle_budget, strategy));
        } catch (const TraceError& e) {
            throw TraceError("instance " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

PartialTrace mask_trace(const PlanTrace& trace, int observe_pct, uint64_t seed) {
    switch (observe_pct) {
        case 0: case 20: case 40: case 60: case 80: case 100: break;
        default:
            throw std::invalid_argument("observe_pct must be one of 0,20,40,60,80,100; got " +
                                        std::to_string(observe_pct));
    }
    PartialTrace out;
    out.initial = trace.states.front();
    out.final_state = trace.states.back();
    out.actions = trace.actions;
    const size_t n = trace.actions.size();
    Rng rng(seed);
    for (size_t i = 1; n >= 2 && i <= n - 1; ++i) {
        const State& s = trace.states[i];
        // round half up, in exact integer arithmetic
        size_t keep = (static_cast<size_t>(observe_pct) * s.size() + 50) / 100;
        std::vector<size_t> picked = rng.sample_indices(s.size(), keep);
        std::vector<PropId> obs;
        obs.reserve(picked.size());
        for (size_t ix : picked) obs.push_back(s.ids()[ix]);
        out.observations.emplace_back(std::move(obs));
    }
    return out;
}

std::vector<PartialTrace> mask_traces(const std::vector<PlanTrace>& traces, int observe_pct,
                                      uint64_t seed) {
    std::vector<PartialTrace> out;
    out.reserve(traces.size());
    for (size_t i = 0; i < traces.size(); ++i)
        out.push_back(mask_trace(traces[i], observe_pct, derive_seed(seed, i)));
    return out;
}

PartialTrace to_partial(const PlanTrace& trace) {
    PartialTrace out;
    out.initial = trace.states.front();
    out.final_state = trace.states.back();
    out.actions = trace.actions;
    for (size_t i = 1; i + 1 < trace.states.size(); ++i) out.observations.push_back(trace.states[i]);
    return out;
}

PlanTrace to_plan_trace(const GroundDomain& dom, const PartialTrace& partial) {
    PlanTrace out;
    out.states.push_back(partial.initial);
    out.actions = partial.actions;
    const size_t n = partial.actions.size();
    if (n >= 2 && partial.observations.size() != n - 1)
        throw TraceError("partial trace has " + std::to_string(partial.observations.size()) +
                         " observations for " + std::to_string(n) + " actions");
    for (size_t i = 0; i < n; ++i) {
        State next;
        try {
            next = apply(dom, out.states.back(), partial.actions[i]);
        } catch (const InapplicableAction& e) {
            throw TraceError("step " + std::to_string(i) + ": " + e.what());
        }
        if (i + 1 < n && partial.observations[i] != next)
            throw TraceError("step " + std::to_string(i) +
                             ": observation is not the full intermediate state");
        out.states.push_back(std::move(next));
    }
    if (out.states.back() != partial.final_state)
        throw TraceError("final state does not match action outcome");
    return out;
}

// ---- trace files ------------------------------------------------------------

namespace {

void write_names(std::ostream& out, const GroundDomain& dom, const PropSet& s) {
    for (PropId p : s) out << ' ' << dom.prop(p).name;
}

}  // namespace

void write_traces(std::ostream& out, const GroundDomain& dom,
                  const std::vector<PartialTrace>& traces) {
    for (const PartialTrace& t : traces) {
        out << "trace\ninit";
        write_names(out, dom, t.initial);
        out << "\nfinal";
        write_names(out, dom, t.final_state);
        out << "\n";
        for (size_t i = 0; i < t.actions.size(); ++i) {
            if (i > 0) {
                out << "obs";
                write_names(out, dom, t.observations[i - 1]);
                out << "\n";
            }
            out << "action " << dom.action(t.actions[i]).name << "\n";
        }
        out << "end\n";
    }
}

void write_traces_file(const std::string& path, const GroundDomain& dom,
                       const std::vector<PartialTrace>& traces) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    write_traces(out, dom, traces);
}

std::vector<PartialTrace> read_traces(std::istream& in, const GroundDomain& dom) {
    std::vector<PartialTrace> out;
    std::string line;
    size_t ln = 0;

    bool open = false;
    PartialTrace cur;
    bool saw_init = false, saw_final = false;
    bool last_was_obs = false;

    auto parse_set = [&dom](const std::vector<std::string>& toks, size_t line_no) {
        std::vector<PropId> ids;
        for (size_t i = 1; i < toks.size(); ++i) {
            auto id = dom.find_prop(toks[i]);
            if (!id) throw ParseError("unknown proposition '" + toks[i] + "'", line_no);
            ids.push_back(*id);
        }
        return PropSet(std::move(ids));
    };

    while (std::getline(in, line)) {
        ++ln;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::vector<std::string> toks;
        std::string t;
        while (ss >> t) toks.push_back(t);
        if (toks.empty()) continue;
        const std::string& kw = toks[0];

        if (kw == "trace") {
            if (open) throw ParseError("nested 'trace' (missing 'end'?)", ln);
            open = true;
            cur = PartialTrace{};
            saw_init = saw_final = false;
            last_was_obs = false;
        } else if (kw == "init" || kw == "final") {
            if (!open) throw ParseError("'" + kw + "' outside trace block", ln);
            bool& seen = kw == "init" ? saw_init : saw_final;
            if (seen) throw ParseError("duplicate '" + kw + "' in trace", ln);
            seen = true;
            if (kw == "init")
                cur.initial = parse_set(toks, ln);
            else
                cur.final_state = parse_set(toks, ln);
        } else if (kw == "action") {
            if (!open) throw ParseError("'action' outside trace block", ln);
            if (!saw_init || !saw_final)
                throw ParseError("'action' before 'init'/'final'", ln);
            if (toks.size() != 2) throw ParseError("'action' takes exactly one name", ln);
            if (!cur.actions.empty() && !last_was_obs)
                throw ParseError("missing 'obs' between actions", ln);
            auto id = dom.find_action(toks[1]);
            if (!id) throw ParseError("unknown action '" + toks[1] + "'", ln);
            cur.actions.push_back(*id);
            last_was_obs = false;
        } else if (kw == "obs") {
            if (!open) throw ParseError("'obs' outside trace block", ln);
            if (cur.actions.empty()) throw ParseError("'obs' before first action", ln);
            if (last_was_obs) throw ParseError("consecutive 'obs' lines", ln);
            cur.observations.push_back(parse_set(toks, ln));
            last_was_obs = true;
        } else if (kw == "end") {
            if (!open) throw ParseError("'end' outside trace block", ln);
            if (!saw_init || !saw_final) throw ParseError("trace missing 'init'/'final'", ln);
            if (last_was_obs) throw ParseError("observation after the last action", ln);
            out.push_back(std::move(cur));
            open = false;
        } else {
            throw ParseError("unexpected keyword '" + kw + "'", ln);
        }
    }
    if (open) throw ParseError("unterminated trace block (missing 'end')", ln);
    return out;
}

std::vector<PartialTrace> read_traces_file(const std::string& path, const GroundDomain& dom) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    return read_traces(in, dom);
}

}  // namespace vecplan
