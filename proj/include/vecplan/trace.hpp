#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vecplan/domains.hpp"
#include "vecplan/search.hpp"
#include "vecplan/strips.hpp"

namespace vecplan {

// Fully observed execution of a plan: states[0] is the initial state,
// states[i+1] = apply(states[i], actions[i]).
struct PlanTrace {
    std::vector<State> states;      // n + 1
    std::vector<ActionId> actions;  // n

    bool operator==(const PlanTrace&) const = default;
};

// Execution with only partial views of the intermediate states. Endpoints are
// always fully observed; observations[i] is a subset of the true state after
// actions[i] (absence means unobserved, not false).
struct PartialTrace {
    State initial;
    State final_state;
    std::vector<ActionId> actions;          // n
    std::vector<PropSet> observations;      // n - 1 (empty vector when n <= 1)

    bool operator==(const PartialTrace&) const = default;
};

struct DatasetSplit {
    std::vector<Instance> train_instances;
    std::vector<PartialTrace> train;
    std::vector<Instance> test_instances;
    std::vector<PlanTrace> test;
};

struct GenerationExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TraceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// count pairwise-distinct instances, each solvable by the reference planner
// within budget. Deterministic in seed; throws GenerationExhausted when the
// family cannot produce enough distinct solvable instances.
std::vector<Instance> gen_instances(const MiniDomainConfig& cfg, const GroundDomain& dom,
                                    size_t count, uint64_t seed, uint64_t oracle_budget = 1000000,
                                    SearchStrategy strategy = SearchStrategy::Auto);

// Reference-planner trace for one instance; throws TraceError when the oracle
// fails (unsolvable or out of budget).
PlanTrace gen_trace(const GroundDomain& dom, const Instance& inst, uint64_t oracle_budget = 1000000,
                    SearchStrategy strategy = SearchStrategy::Auto);
std::vector<PlanTrace> gen_traces(const GroundDomain& dom, const std::vector<Instance>& instances,
                                  uint64_t oracle_budget = 1000000,
                                  SearchStrategy strategy = SearchStrategy::Auto);

// Keeps round(pct/100 * |s_i|) propositions of each intermediate state,
// sampled uniformly without replacement (round half up). Endpoints stay fully
// observed. pct must be one of {0, 20, 40, 60, 80, 100}.
PartialTrace mask_trace(const PlanTrace& trace, int observe_pct, uint64_t seed);
std::vector<PartialTrace> mask_traces(const std::vector<PlanTrace>& traces, int observe_pct,
                                      uint64_t seed);

// A fully observed trace expressed as a partial one (100% observations).
PartialTrace to_partial(const PlanTrace& trace);
// Rebuilds the full trace by executing the actions; requires the observations
// to equal the reconstructed intermediate states (i.e. a 100% trace).
PlanTrace to_plan_trace(const GroundDomain& dom, const PartialTrace& partial);

// Line-oriented trace files (grammar in docs/file-formats.md); the writer and
// reader round-trip exactly.
void write_traces(std::ostream& out, const GroundDomain& dom,
                  const std::vector<PartialTrace>& traces);
void write_traces_file(const std::string& path, const GroundDomain& dom,
                       const std::vector<PartialTrace>& traces);
std::vector<PartialTrace> read_traces(std::istream& in, const GroundDomain& dom);
std::vector<PartialTrace> read_traces_file(const std::string& path, const GroundDomain& dom);

}  // namespace vecplan
