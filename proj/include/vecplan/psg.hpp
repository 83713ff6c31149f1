#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "vecplan/strips.hpp"
#include "vecplan/tensor.hpp"
#include "vecplan/trace.hpp"

namespace vecplan {

struct PsgConfig {
    size_t k = 100;  // embedding width
    std::vector<size_t> state_hidden{100, 100};
    std::vector<size_t> edge_hidden{100, 100};
    double decode_threshold = 0.5;  // >= maps to true
    double init_bound = 0.6;
    // Intermediate steps: observed propositions are positive targets; when
    // set, unobserved ones also contribute as negatives (default: excluded,
    // absence means unknown). Endpoints always use full targets.
    bool absent_as_negative = false;
    // When set, observed propositions overwrite the propagated probabilities
    // with 1.0 at intermediate steps during training.
    bool teacher_forcing = false;

    bool operator==(const PsgConfig&) const = default;
};

// One completed trace: per-step truth probabilities for every proposition and
// the thresholded states. Endpoints are copied from the observations, so they
// are exact regardless of model quality; probs[0] is the exact initial
// attribute vector.
struct EstimatedTrace {
    std::vector<ActionId> actions;
    std::vector<StateMask> states;  // n + 1
    std::vector<Vec> probs;         // n + 1

    bool operator==(const EstimatedTrace&) const = default;
};

enum class UnrollMode { Training, Inference };

// Learned transition system over one ground domain: per-proposition and
// per-action embedding tables, a net mapping attribute-annotated embeddings to
// a compact state vector, and a per-proposition net predicting next-step truth
// probabilities. All mutation happens in train(); elsewhere treat as
// immutable.
struct SequenceModel {
    PsgConfig cfg;
    uint64_t domain_fp = 0;
    Mat prop_vecs;    // |P| x k
    Mat action_vecs;  // |A| x k
    Mlp state_net;    // interleaved [p_j, attr_j] over all j -> k
    Mlp edge_net;     // [attr_j, state vec, p_j, action vec] -> 1, sigmoid

    SequenceModel() = default;
    SequenceModel(const GroundDomain& dom, PsgConfig c, uint64_t seed);

    size_t num_props() const { return prop_vecs.rows; }
    size_t num_actions() const { return action_vecs.rows; }

    // Compact vector for a state given per-proposition truth attributes
    // (booleans at inference, probabilities during training unrolls).
    Vec state_vec(const Vec& attrs) const;
    Vec state_vec(const StateMask& s) const;

    // Truth probabilities after applying action a to (attrs, their vector).
    Vec step_probs(const Vec& attrs, const Vec& sv, ActionId a) const;

    StateMask decode(const Vec& probs) const;

    // Boolean-state transition: threshold the predicted probabilities and
    // recompute the next state's vector.
    std::pair<StateMask, Vec> transition(const StateMask& s, ActionId a) const;

    // Complete a partially observed trace. Training mode propagates the raw
    // probabilities between steps; inference mode propagates the thresholded
    // booleans.
    EstimatedTrace unroll(const PartialTrace& trace, UnrollMode mode) const;

    // Registry over every trainable tensor, in a fixed order shared with
    // SequenceGrads.
    std::vector<TensorRef> params(const std::string& prefix);

    bool operator==(const SequenceModel&) const = default;
};

// Zero-initialized gradient twin of a model.
struct SequenceGrads {
    Mat prop_vecs;
    Mat action_vecs;
    Mlp state_net;
    Mlp edge_net;

    explicit SequenceGrads(const SequenceModel& m);
    void zero();
    void add_scaled(const SequenceGrads& other, double scale);
    std::vector<TensorRef> params(const std::string& prefix);
};

struct SequenceLossResult {
    double loss = 0.0;  // mean over contributing entries
    size_t count = 0;
};

// Masked cross-entropy over one trace's soft unroll: every final-state entry
// contributes, intermediate steps contribute their observed propositions (and
// the rest as negatives under absent_as_negative). Gradients for all
// parameters and embeddings accumulate into grads when non-null.
SequenceLossResult sequence_loss(const SequenceModel& model, const PartialTrace& trace,
                                 SequenceGrads* grads);

// Per-entry unnormalized terms of the same loss, as (step, proposition, term).
// Dropping one observed proposition removes exactly its own term.
std::vector<std::tuple<size_t, PropId, double>> sequence_loss_terms(const SequenceModel& model,
                                                                    const PartialTrace& trace);

// Probability producer for one soft step; lets tests drive the unroll and the
// loss with a ground-truth transition instead of networks.
using StepFn = std::function<Vec(const Vec& attrs, ActionId a)>;

EstimatedTrace unroll_steps(const StepFn& step, const PartialTrace& trace, size_t universe,
                            double threshold, UnrollMode mode, bool teacher_forcing);

// Loss recomputed by plain forward evaluation (no gradients); the
// finite-difference oracle for sequence_loss and the stub hook for tests.
SequenceLossResult sequence_loss_value(const StepFn& step, const PartialTrace& trace,
                                       size_t universe, bool absent_as_negative,
                                       bool teacher_forcing);

struct NonFiniteLoss : std::runtime_error {
    NonFiniteLoss(const std::string& msg, size_t epoch_, size_t trace_index_)
        : std::runtime_error(msg), epoch(epoch_), trace_index(trace_index_) {}
    size_t epoch;
    size_t trace_index;
};

struct TrainConfig {
    size_t epochs = 300;
    size_t batch = 20;
    double lr = 1e-3;
    uint64_t seed = 0;
    // Stop once an epoch's mean per-entry loss drops below this (0 disables).
    double stop_tol = 0.0;
    size_t threads = 1;

    bool operator==(const TrainConfig&) const = default;
};

struct TrainResult {
    std::vector<double> epoch_loss;  // mean per-entry loss per epoch
    size_t epochs_run = 0;
    bool stopped_early = false;
};

// Shuffled minibatch Adam over the dataset; deterministic per seed, including
// under threads > 1 (worker gradients are reduced in index order).
TrainResult train(SequenceModel& model, const std::vector<PartialTrace>& data,
                  const TrainConfig& tc);

// Checkpoint I/O; loading verifies the stored domain fingerprint and shapes.
void save_model(const std::string& path, const SequenceModel& m,
                std::vector<std::pair<std::string, std::string>> extra_meta = {});
SequenceModel load_model(const std::string& path, const GroundDomain& dom);

// Payload helpers shared by every container that embeds a sequence model;
// the "kind" metadata key is the caller's to set.
Checkpoint model_checkpoint(const SequenceModel& m,
                            std::vector<std::pair<std::string, std::string>> extra_meta = {});
SequenceModel model_from_checkpoint(const Checkpoint& ck, const GroundDomain& dom);

}  // namespace vecplan
