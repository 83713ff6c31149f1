#pragma once

#include <string>
#include <vector>

#include "vecplan/extraction.hpp"
#include "vecplan/psg.hpp"
#include "vecplan/strips.hpp"
#include "vecplan/tensor.hpp"

namespace vecplan {

// One multi-label example: in decoded state `from` (vector g(from)), some
// action led eventually to decoded state `to`. Labels mark every action
// observed leaving `from` in a trace that later reaches `to`.
struct PairExample {
    StateMask from;  // kept alongside the vectors for inspection and merging
    StateMask to;
    Vec from_vector;
    Vec to_vector;
    std::vector<uint8_t> labels;  // |A| booleans, at least one set

    bool operator==(const PairExample&) const = default;
};

struct PairConfig {
    // Per-trace cap on emitted pairs; adjacent (i, i+1) and goal-directed
    // (i, n) pairs are always kept, the remainder sampled uniformly.
    size_t budget_per_steps = 10;  // budget = budget_per_steps * n
    uint64_t seed = 0;

    bool operator==(const PairConfig&) const = default;
};

// Ordered pair dataset over estimated traces. Pairs with identical decoded
// (from, to) states are merged by label union; first-encounter order.
std::vector<PairExample> build_pairs(const SequenceModel& model,
                                     const std::vector<EstimatedTrace>& estimates,
                                     const PairConfig& pc = {});

// Action-selection network: scores every action's fitness for moving from one
// state vector toward another. Input [from ∥ to], sigmoid confidence per action.
struct SelectorNet {
    size_t k = 0;
    Mlp net;

    bool operator==(const SelectorNet&) const = default;
};

SelectorNet make_selector(size_t k, size_t num_actions, uint64_t seed,
                          const std::vector<size_t>& hidden = {150, 150, 150},
                          double init_bound = 0.6);

// Minibatch Adam over sigmoid cross-entropy against the label vectors.
// Reuses the sequence trainer's config; threads is ignored (batches are
// matrix-level already). Returns per-epoch mean loss.
TrainResult train_selector(SelectorNet& sel, const std::vector<PairExample>& pairs,
                           const TrainConfig& tc);

struct Recommendation {
    ActionId action = -1;
    double confidence = 0.0;

    bool operator==(const Recommendation&) const = default;
};

// Top-k actions for steering from `from_vec` toward `goal_vec`: descending
// confidence, ties by ascending action id.
std::vector<Recommendation> recommend(const SelectorNet& sel, const Vec& from_vec,
                                      const Vec& goal_vec, size_t k_top);

void save_selector(const std::string& path, const SelectorNet& sel);
// Shape-checks against the state-vector width and action count.
SelectorNet load_selector(const std::string& path, size_t k, size_t num_actions);

// Inspection dump: one line per pair, states and labels by id.
std::string pair_report(const std::vector<PairExample>& pairs, const GroundDomain& dom,
                        size_t max_pairs = 50);

}  // namespace vecplan
