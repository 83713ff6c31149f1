#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vecplan/domains.hpp"
#include "vecplan/planner.hpp"
#include "vecplan/psg.hpp"
#include "vecplan/selector.hpp"

namespace vecplan {

struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A pipeline failure wrapped with the stage it happened in.
struct StageError : std::runtime_error {
    StageError(std::string stage_name, const std::string& msg)
        : std::runtime_error("stage " + stage_name + ": " + msg), stage(std::move(stage_name)) {}
    std::string stage;
};

// Confusion counts of one estimated state against the real one; the four
// counts always partition the proposition universe.
struct StateScore {
    size_t tp = 0;
    size_t tn = 0;
    size_t fp = 0;
    size_t fn = 0;

    bool operator==(const StateScore&) const = default;
};

StateScore score_state(const StateMask& real, const StateMask& estimated);

// Undefined ratios (empty prediction, empty real state) report 1.0: an empty
// prediction makes no false claims, an empty real state leaves nothing to miss.
double precision(const StateScore& s);
double recall(const StateScore& s);

struct PrMean {
    double precision = 0.0;
    double recall = 0.0;

    bool operator==(const PrMean&) const = default;
};

// Unweighted per-state mean over all states of all sequences. Throws
// EmptyInput when there is nothing to average.
PrMean aggregate(const std::vector<StateScore>& scores);

// Fraction of instances whose result is a plan that validates under the
// original ground-truth domain. Results must align with instances.
double instances_solved(const GroundDomain& dom, const std::vector<Instance>& instances,
                        const std::vector<PlanResult>& results);

// Among the instances credited by instances_solved, the fraction whose plan
// equals the oracle plan exactly; 1.0 when nothing was credited.
double plan_identity_rate(const GroundDomain& dom, const std::vector<Instance>& instances,
                          const std::vector<PlanResult>& results,
                          const std::vector<std::vector<ActionId>>& oracle_plans);

// Full experiment bundle: everything a sweep needs, seeds included. The
// embedded TrainConfig/PairConfig seeds are part of the bundle.
struct ExperimentConfig {
    MiniDomainConfig domain;
    size_t train_traces = 200;
    size_t test_count = 30;
    std::vector<int> observation_pcts = {0, 20, 40, 60, 80, 100};

    PsgConfig psg;
    TrainConfig learner_train;
    std::vector<size_t> selector_hidden = {150, 150, 150};
    PairConfig pairs;
    TrainConfig selector_train;
    PlannerConfig planner;

    uint64_t data_seed = 42;
    uint64_t mask_seed = 7;
    uint64_t model_seed = 1;
    uint64_t selector_seed = 3;

    bool operator==(const ExperimentConfig&) const = default;
};

struct ExperimentCell {
    int observation_pct = 0;
    double precision = 0.0;
    double recall = 0.0;
    double instances_solved = 0.0;
    double plan_identity_rate = 0.0;
    double train_loss_final = 0.0;
    size_t states_scored = 0;
    size_t instances_planned = 0;

    bool operator==(const ExperimentCell&) const = default;
};

struct ExperimentReport {
    std::vector<ExperimentCell> cells;
    uint64_t config_fingerprint = 0;
    std::string seeds;  // canonical bundle, identical in every CSV row

    bool operator==(const ExperimentReport&) const = default;
};

// Canonical key=value serialization of a config; its hash is the report
// fingerprint, and equal text means an experiment is byte-reproducible.
std::string canonical_config_text(const ExperimentConfig& cfg);
uint64_t fnv1a64(std::string_view bytes);
std::string seed_bundle(const ExperimentConfig& cfg);

// The per-percentage pipeline: mask, train the sequence model, extract the
// domain model, train the selector, plan the held-out instances, score.
// Deterministic per config; failures carry the stage name.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// observation_pct,precision,recall,instances_solved,plan_identity_rate,
// train_loss_final,seeds; doubles carry full precision so the reader
// round-trips exactly.
std::string write_report_csv(const ExperimentReport& report);
ExperimentReport read_report_csv(const std::string& text);

std::string report_markdown(const ExperimentReport& report);

}  // namespace vecplan
