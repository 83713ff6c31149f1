#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vecplan/domains.hpp"
#include "vecplan/planner.hpp"
#include "vecplan/trace.hpp"

using namespace vecplan;

namespace {

// One-cargo two-location ferry with a model trained to reproduce its
// dynamics exactly, so planner behavior is fully predictable.
struct Fixture {
    GroundDomain dom;
    std::vector<Instance> insts;
    LearnedDomainModel lm;
    ActionId board_l1, board_l2, debark_l1, debark_l2, sail_12, sail_21;
};

// Every reachable transition as a one-step trace; full coverage makes the
// intersected preconditions exact and trains every action's dynamics.
std::vector<PlanTrace> coverage_traces(const GroundDomain& dom, const std::vector<Instance>& insts) {
    std::vector<PlanTrace> out;
    std::vector<State> frontier, seen;
    for (const Instance& i : insts) frontier.push_back(i.initial);
    seen = frontier;
    while (!frontier.empty()) {
        State s = frontier.back();
        frontier.pop_back();
        for (ActionId a : applicable(dom, s)) {
            State nxt = apply(dom, s, a);
            out.push_back(PlanTrace{{s, nxt}, {a}});
            bool fresh = true;
            for (const State& q : seen)
                if (q == nxt) fresh = false;
            if (fresh) {
                seen.push_back(nxt);
                frontier.push_back(nxt);
            }
        }
    }
    return out;
}

const Fixture& fixture() {
    static Fixture f = [] {
        Fixture x;
        MiniDomainConfig cfg;
        cfg.family = "ferry";
        cfg.cargos = 1;
        cfg.locations = 2;
        x.dom = make_domain(cfg);
        x.insts = gen_instances(cfg, x.dom, 4, 2);

        std::vector<PlanTrace> traces = gen_traces(x.dom, x.insts);
        for (PlanTrace& t : coverage_traces(x.dom, x.insts)) traces.push_back(std::move(t));
        std::vector<PartialTrace> data = mask_traces(traces, 100, 5);

        PsgConfig pc;
        pc.k = 8;
        pc.state_hidden = {16, 16};
        pc.edge_hidden = {16, 16};
        pc.absent_as_negative = true;
        pc.teacher_forcing = true;
        SequenceModel m(x.dom, pc, 3);
        TrainConfig tc;
        tc.epochs = 1500;
        tc.batch = 20;
        tc.seed = 9;
        tc.stop_tol = 1e-4;
        train(m, data, tc);
        x.lm = extract_model(m, data);

        x.board_l1 = *x.dom.find_action("board(c1,l1)");
        x.board_l2 = *x.dom.find_action("board(c1,l2)");
        x.debark_l1 = *x.dom.find_action("debark(c1,l1)");
        x.debark_l2 = *x.dom.find_action("debark(c1,l2)");
        x.sail_12 = *x.dom.find_action("sail(l1,l2)");
        x.sail_21 = *x.dom.find_action("sail(l2,l1)");
        return x;
    }();
    return f;
}

// Constant ranking: zeroed network scores every action 0.5; per-action head
// biases then pin the order regardless of the query.
SelectorNet constant_selector(const Fixture& f, const std::vector<std::pair<ActionId, double>>& biases) {
    SelectorNet s = make_selector(f.lm.model.cfg.k, f.dom.num_actions(), 1);
    for (DenseParams& l : s.net.layers()) {
        l.weight.zero();
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    for (auto& [a, b] : biases) s.net.layers().back().bias[static_cast<size_t>(a)] = b;
    return s;
}

Instance crossing(const Fixture& f) {
    return Instance{State({*f.dom.find_prop("at(c1,l1)"), *f.dom.find_prop("at-ferry(l1)"),
                           *f.dom.find_prop("empty-ferry")}),
                    PropSet({*f.dom.find_prop("at(c1,l2)")})};
}

}  // namespace

TEST_CASE("goal targets complete the condition per mode") {
    const Fixture& f = fixture();
    Instance inst = crossing(f);
    const size_t u = f.dom.num_props();

    StateMask recorded(u, 0);
    recorded[static_cast<size_t>(*f.dom.find_prop("at(c1,l2)"))] = 1;
    recorded[static_cast<size_t>(*f.dom.find_prop("at-ferry(l2)"))] = 1;
    recorded[static_cast<size_t>(*f.dom.find_prop("empty-ferry"))] = 1;

    std::vector<StateMask> t = goal_targets(u, inst, GoalMode::RecordedFullState, recorded);
    REQUIRE(t.size() == 1);
    CHECK(t[0] == recorded);

    // no recording available: falls back to the bare completion
    t = goal_targets(u, inst, GoalMode::RecordedFullState);
    StateMask bare(u, 0);
    bare[static_cast<size_t>(*f.dom.find_prop("at(c1,l2)"))] = 1;
    REQUIRE(t.size() == 1);
    CHECK(t[0] == bare);
    CHECK(goal_targets(u, inst, GoalMode::GoalTrueOthersFalse, recorded)[0] == bare);

    StateMask overlay = to_mask(inst.initial, u);
    overlay[static_cast<size_t>(*f.dom.find_prop("at(c1,l2)"))] = 1;
    CHECK(goal_targets(u, inst, GoalMode::OverlayOnInitial)[0] == overlay);
}

TEST_CASE("an initially satisfied goal yields the empty plan") {
    const Fixture& f = fixture();
    Instance inst = crossing(f);
    inst.goal = PropSet({*f.dom.find_prop("at(c1,l1)")});
    SelectorNet sel = constant_selector(f, {});

    PlanResult res = plan(f.lm, sel, inst);
    CHECK(res.outcome == PlanOutcome::Plan);
    CHECK(res.plan.empty());
    CHECK(res.stats == PlanStats{});

    // even a zero budget admits the shortcut
    PlannerConfig pc;
    pc.budget = 0;
    CHECK(plan(f.lm, sel, inst, pc).outcome == PlanOutcome::Plan);
}

TEST_CASE("the tiny fixture reproduces the domain exactly") {
    const Fixture& f = fixture();

    size_t transitions = 0;
    std::vector<State> frontier, seen;
    for (const Instance& i : f.insts) frontier.push_back(i.initial);
    seen = frontier;
    while (!frontier.empty()) {
        State s = frontier.back();
        frontier.pop_back();
        for (ActionId a : applicable(f.dom, s)) {
            State nxt = apply(f.dom, s, a);
            ++transitions;
            CHECK(f.lm.model.transition(to_mask(s, f.dom.num_props()), a).first ==
                  to_mask(nxt, f.dom.num_props()));
            bool fresh = true;
            for (const State& q : seen)
                if (q == nxt) fresh = false;
            if (fresh) {
                seen.push_back(nxt);
                frontier.push_back(nxt);
            }
        }
    }
    CHECK(transitions == 10);
    CHECK(seen.size() == 6);

    // full coverage drives every intersected precondition to the true one
    for (ActionId a = 0; a < static_cast<ActionId>(f.dom.num_actions()); ++a) {
        REQUIRE(f.lm.seen(a));
        CHECK(*f.lm.preconditions[static_cast<size_t>(a)] == f.dom.action(a).precondition);
    }
}

TEST_CASE("a misleading ranking is recovered by backtracking") {
    const Fixture& f = fixture();
    Instance inst = crossing(f);

    // the useless crossing outranks the real first step; all three plan
    // actions still sit inside the slate of three
    SelectorNet sel = constant_selector(f, {{f.sail_12, 3.0},
                                            {f.board_l1, 2.0},
                                            {f.debark_l2, 1.0},
                                            {f.board_l2, -1.0},
                                            {f.debark_l1, -1.0},
                                            {f.sail_21, -1.0}});

    PlanResult res = plan(f.lm, sel, inst);
    REQUIRE(res.outcome == PlanOutcome::Plan);
    CHECK(res.plan == std::vector<ActionId>{f.board_l1, f.sail_12, f.debark_l2});
    CHECK(res.stats.expansions == 4);
    CHECK(res.stats.backtracks == 1);
    CHECK(res.stats.goal_attempts == 1);
    // every pop drops exactly one plan action
    CHECK(res.plan.size() == res.stats.expansions - res.stats.backtracks);

    CHECK(validate_plan(f.dom, inst, res.plan).ok);
}

TEST_CASE("an aligned ranking plans without backtracking") {
    const Fixture& f = fixture();
    Instance inst = crossing(f);
    SelectorNet sel = constant_selector(f, {{f.board_l1, 3.0},
                                            {f.sail_12, 2.0},
                                            {f.debark_l2, 1.0},
                                            {f.board_l2, -1.0},
                                            {f.debark_l1, -1.0},
                                            {f.sail_21, -1.0}});

    PlanResult res = plan(f.lm, sel, inst);
    REQUIRE(res.outcome == PlanOutcome::Plan);
    CHECK(res.plan == std::vector<ActionId>{f.board_l1, f.sail_12, f.debark_l2});
    CHECK(res.stats.expansions == 3);
    CHECK(res.stats.backtracks == 0);

    // identical call, identical result
    PlanResult again = plan(f.lm, sel, inst);
    CHECK(again.outcome == res.outcome);
    CHECK(again.plan == res.plan);
    CHECK(again.stats == res.stats);
}

TEST_CASE("visited pairs bound a search for an unreachable goal") {
    const Fixture& f = fixture();
    Instance inst = crossing(f);
    // aboard and empty never hold together anywhere reachable
    inst.goal = PropSet({*f.dom.find_prop("on(c1)"), *f.dom.find_prop("empty-ferry")});
    SelectorNet sel = constant_selector(f, {});
    PlannerConfig pc;
    pc.k_top = f.dom.num_actions();

    PlanResult res = plan(f.lm, sel, inst, pc);
    CHECK(res.outcome == PlanOutcome::Fail);
    CHECK(res.stats.goal_attempts == 1);
    // each reachable state/action pair expands at most once
    CHECK(res.stats.expansions <= 10);
    CHECK(res.stats.backtracks >= 1);
}

TEST_CASE("every futile goal target is attempted before failing") {
    const Fixture& f = fixture();
    Instance inst = crossing(f);
    inst.goal = PropSet({*f.dom.find_prop("on(c1)"), *f.dom.find_prop("empty-ferry")});
    SelectorNet sel = constant_selector(f, {});
    PlannerConfig pc;
    pc.k_top = f.dom.num_actions();

    const size_t u = f.dom.num_props();
    std::vector<StateMask> targets = {StateMask(u, 0), StateMask(u, 1)};
    PlanResult res =
        plan_over_targets(f.lm, sel, to_mask(inst.initial, u), inst.goal, targets, pc);
    CHECK(res.outcome == PlanOutcome::Fail);
    CHECK(res.stats.goal_attempts == 2);
}

TEST_CASE("the expansion budget cuts long searches") {
    const Fixture& f = fixture();
    Instance inst = crossing(f);
    SelectorNet sel = constant_selector(f, {{f.board_l1, 3.0},
                                            {f.sail_12, 2.0},
                                            {f.debark_l2, 1.0}});

    PlannerConfig pc;
    pc.budget = 2;  // the plan needs three steps
    PlanResult res = plan(f.lm, sel, inst, pc);
    CHECK(res.outcome == PlanOutcome::BudgetExceeded);
    CHECK(res.stats.expansions == 2);

    pc.budget = 0;
    res = plan(f.lm, sel, inst, pc);
    CHECK(res.outcome == PlanOutcome::BudgetExceeded);
    CHECK(res.stats.expansions == 0);
}

TEST_CASE("full exploration solves every instance with ground-truth-valid plans") {
    const Fixture& f = fixture();
    SelectorNet sel = constant_selector(f, {});
    PlannerConfig pc;
    pc.k_top = f.dom.num_actions();

    for (const Instance& inst : f.insts) {
        PlanResult res = plan(f.lm, sel, inst, pc);
        REQUIRE(res.outcome == PlanOutcome::Plan);
        CHECK(res.plan.size() <= 6);
        CHECK(res.plan.size() == res.stats.expansions - res.stats.backtracks);
        CHECK(validate_plan(f.dom, inst, res.plan).ok);
    }

    // passing the recorded full goal state drives the same machinery
    Instance inst = crossing(f);
    PlanTrace oracle = gen_trace(f.dom, inst);
    StateMask recorded = to_mask(oracle.states.back(), f.dom.num_props());
    PlanResult res = plan(f.lm, sel, inst, pc, recorded);
    REQUIRE(res.outcome == PlanOutcome::Plan);
    CHECK(validate_plan(f.dom, inst, res.plan).ok);
}

TEST_CASE("simulate chains the learned transition") {
    const Fixture& f = fixture();
    Instance inst = crossing(f);
    StateMask start = to_mask(inst.initial, f.dom.num_props());

    CHECK(simulate(f.lm, start, {}) == std::vector<StateMask>{start});

    std::vector<ActionId> plan_actions = {f.board_l1, f.sail_12, f.debark_l2};
    std::vector<StateMask> states = simulate(f.lm, start, plan_actions);
    REQUIRE(states.size() == 4);
    CHECK(states[0] == start);
    for (size_t i = 0; i < plan_actions.size(); ++i)
        CHECK(states[i + 1] == f.lm.model.transition(states[i], plan_actions[i]).first);

    // the replayed final state satisfies the instance goal
    for (PropId p : inst.goal) CHECK(states.back()[static_cast<size_t>(p)]);
}
