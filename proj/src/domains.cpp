#include "vecplan/domains.hpp"

#include <stdexcept>

namespace vecplan {

namespace {

std::string num(const std::string& prefix, int i) { return prefix + std::to_string(i + 1); }

struct DomainBuilder {
    std::vector<Proposition> props;
    std::vector<GroundAction> actions;

    PropId prop(const std::string& name) {
        props.push_back({static_cast<PropId>(props.size()), name});
        return props.back().id;
    }

    void action(const std::string& name, std::vector<PropId> pre, std::vector<PropId> add,
                std::vector<PropId> del) {
        GroundAction a;
        a.id = static_cast<ActionId>(actions.size());
        a.name = name;
        a.precondition = PropSet(std::move(pre));
        a.add_effects = PropSet(std::move(add));
        a.del_effects = PropSet(std::move(del));
        actions.push_back(std::move(a));
    }
};

// ---- ferry ----------------------------------------------------------------

struct FerryIndex {
    int C, L;
    std::vector<std::vector<PropId>> at;  // cargo x location
    std::vector<PropId> on;               // cargo aboard
    std::vector<PropId> ferry_at;         // ferry location
    PropId empty;
};

FerryIndex ferry_index(const MiniDomainConfig& cfg, DomainBuilder* b) {
    FerryIndex ix;
    ix.C = cfg.cargos;
    ix.L = cfg.locations;
    ix.at.assign(ix.C, std::vector<PropId>(ix.L));
    ix.on.resize(ix.C);
    ix.ferry_at.resize(ix.L);
    if (!b) return ix;
    for (int c = 0; c < ix.C; ++c)
        for (int l = 0; l < ix.L; ++l)
            ix.at[c][l] = b->prop("at(" + num("c", c) + "," + num("l", l) + ")");
    for (int c = 0; c < ix.C; ++c) ix.on[c] = b->prop("on(" + num("c", c) + ")");
    for (int l = 0; l < ix.L; ++l) ix.ferry_at[l] = b->prop("at-ferry(" + num("l", l) + ")");
    ix.empty = b->prop("empty-ferry");
    return ix;
}

FerryIndex ferry_lookup(const MiniDomainConfig& cfg, const GroundDomain& dom) {
    FerryIndex ix = ferry_index(cfg, nullptr);
    for (int c = 0; c < ix.C; ++c)
        for (int l = 0; l < ix.L; ++l)
            ix.at[c][l] = *dom.find_prop("at(" + num("c", c) + "," + num("l", l) + ")");
    for (int c = 0; c < ix.C; ++c) ix.on[c] = *dom.find_prop("on(" + num("c", c) + ")");
    for (int l = 0; l < ix.L; ++l) ix.ferry_at[l] = *dom.find_prop("at-ferry(" + num("l", l) + ")");
    ix.empty = *dom.find_prop("empty-ferry");
    return ix;
}

GroundDomain make_ferry(const MiniDomainConfig& cfg) {
    if (cfg.cargos < 1 || cfg.locations < 2)
        throw std::invalid_argument("ferry needs >= 1 cargo and >= 2 locations");
    DomainBuilder b;
    FerryIndex ix = ferry_index(cfg, &b);
    for (int c = 0; c < ix.C; ++c)
        for (int l = 0; l < ix.L; ++l)
            b.action("board(" + num("c", c) + "," + num("l", l) + ")",
                     {ix.at[c][l], ix.ferry_at[l], ix.empty}, {ix.on[c]}, {ix.at[c][l], ix.empty});
    for (int c = 0; c < ix.C; ++c)
        for (int l = 0; l < ix.L; ++l)
            b.action("debark(" + num("c", c) + "," + num("l", l) + ")",
                     {ix.on[c], ix.ferry_at[l]}, {ix.at[c][l], ix.empty}, {ix.on[c]});
    for (int l = 0; l < ix.L; ++l)
        for (int m = 0; m < ix.L; ++m)
            if (l != m)
                b.action("sail(" + num("l", l) + "," + num("l", m) + ")", {ix.ferry_at[l]},
                         {ix.ferry_at[m]}, {ix.ferry_at[l]});
    return GroundDomain("ferry-" + std::to_string(ix.C) + "-" + std::to_string(ix.L),
                        std::move(b.props), std::move(b.actions));
}

Instance sample_ferry(const MiniDomainConfig& cfg, const GroundDomain& dom, Rng& rng) {
    FerryIndex ix = ferry_lookup(cfg, dom);
    std::vector<int> loc(ix.C);
    std::vector<PropId> init;
    for (int c = 0; c < ix.C; ++c) {
        loc[c] = static_cast<int>(rng.index(ix.L));
        init.push_back(ix.at[c][loc[c]]);
    }
    init.push_back(ix.ferry_at[rng.index(ix.L)]);
    init.push_back(ix.empty);

    int movers = 1 + static_cast<int>(rng.index(ix.C));
    std::vector<size_t> which = rng.sample_indices(ix.C, movers);
    std::vector<PropId> goal;
    for (size_t c : which) {
        int target = static_cast<int>(rng.index(ix.L - 1));
        if (target >= loc[c]) ++target;  // any location other than the current one
        goal.push_back(ix.at[c][target]);
    }
    return {State(std::move(init)), PropSet(std::move(goal))};
}

// ---- logistics ------------------------------------------------------------

struct LogisticsIndex {
    int P, T, L;
    std::vector<std::vector<PropId>> at_pkg;  // package x location
    std::vector<std::vector<PropId>> in;      // package x truck
    std::vector<std::vector<PropId>> at_trk;  // truck x location
};

LogisticsIndex logistics_index(const MiniDomainConfig& cfg, DomainBuilder* b) {
    LogisticsIndex ix;
    ix.P = cfg.packages;
    ix.T = cfg.trucks;
    ix.L = cfg.locations;
    ix.at_pkg.assign(ix.P, std::vector<PropId>(ix.L));
    ix.in.assign(ix.P, std::vector<PropId>(ix.T));
    ix.at_trk.assign(ix.T, std::vector<PropId>(ix.L));
    if (!b) return ix;
    for (int p = 0; p < ix.P; ++p)
        for (int l = 0; l < ix.L; ++l)
            ix.at_pkg[p][l] = b->prop("at-pkg(" + num("p", p) + "," + num("l", l) + ")");
    for (int p = 0; p < ix.P; ++p)
        for (int t = 0; t < ix.T; ++t)
            ix.in[p][t] = b->prop("in(" + num("p", p) + "," + num("t", t) + ")");
    for (int t = 0; t < ix.T; ++t)
        for (int l = 0; l < ix.L; ++l)
            ix.at_trk[t][l] = b->prop("at-truck(" + num("t", t) + "," + num("l", l) + ")");
    return ix;
}

LogisticsIndex logistics_lookup(const MiniDomainConfig& cfg, const GroundDomain& dom) {
    LogisticsIndex ix = logistics_index(cfg, nullptr);
    for (int p = 0; p < ix.P; ++p)
        for (int l = 0; l < ix.L; ++l)
            ix.at_pkg[p][l] = *dom.find_prop("at-pkg(" + num("p", p) + "," + num("l", l) + ")");
    for (int p = 0; p < ix.P; ++p)
        for (int t = 0; t < ix.T; ++t)
            ix.in[p][t] = *dom.find_prop("in(" + num("p", p) + "," + num("t", t) + ")");
    for (int t = 0; t < ix.T; ++t)
        for (int l = 0; l < ix.L; ++l)
            ix.at_trk[t][l] = *dom.find_prop("at-truck(" + num("t", t) + "," + num("l", l) + ")");
    return ix;
}

GroundDomain make_logistics(const MiniDomainConfig& cfg) {
    if (cfg.packages < 1 || cfg.trucks < 1 || cfg.locations < 2)
        throw std::invalid_argument("logistics needs >= 1 package, >= 1 truck, >= 2 locations");
    DomainBuilder b;
    LogisticsIndex ix = logistics_index(cfg, &b);
    for (int p = 0; p < ix.P; ++p)
        for (int t = 0; t < ix.T; ++t)
            for (int l = 0; l < ix.L; ++l)
                b.action("load(" + num("p", p) + "," + num("t", t) + "," + num("l", l) + ")",
                         {ix.at_pkg[p][l], ix.at_trk[t][l]}, {ix.in[p][t]}, {ix.at_pkg[p][l]});
    for (int p = 0; p < ix.P; ++p)
        for (int t = 0; t < ix.T; ++t)
            for (int l = 0; l < ix.L; ++l)
                b.action("unload(" + num("p", p) + "," + num("t", t) + "," + num("l", l) + ")",
                         {ix.in[p][t], ix.at_trk[t][l]}, {ix.at_pkg[p][l]}, {ix.in[p][t]});
    for (int t = 0; t < ix.T; ++t)
        for (int l = 0; l < ix.L; ++l)
            for (int m = 0; m < ix.L; ++m)
                if (l != m)
                    b.action("drive(" + num("t", t) + "," + num("l", l) + "," + num("l", m) + ")",
                             {ix.at_trk[t][l]}, {ix.at_trk[t][m]}, {ix.at_trk[t][l]});
    return GroundDomain("logistics-" + std::to_string(ix.P) + "-" + std::to_string(ix.T) + "-" +
                            std::to_string(ix.L),
                        std::move(b.props), std::move(b.actions));
}

Instance sample_logistics(const MiniDomainConfig& cfg, const GroundDomain& dom, Rng& rng) {
    LogisticsIndex ix = logistics_lookup(cfg, dom);
    std::vector<int> loc(ix.P);
    std::vector<PropId> init;
    for (int p = 0; p < ix.P; ++p) {
        loc[p] = static_cast<int>(rng.index(ix.L));
        init.push_back(ix.at_pkg[p][loc[p]]);
    }
    for (int t = 0; t < ix.T; ++t) init.push_back(ix.at_trk[t][rng.index(ix.L)]);

    int movers = 1 + static_cast<int>(rng.index(ix.P));
    std::vector<size_t> which = rng.sample_indices(ix.P, movers);
    std::vector<PropId> goal;
    for (size_t p : which) {
        int target = static_cast<int>(rng.index(ix.L - 1));
        if (target >= loc[p]) ++target;
        goal.push_back(ix.at_pkg[p][target]);
    }
    return {State(std::move(init)), PropSet(std::move(goal))};
}

// ---- blocks ---------------------------------------------------------------

struct BlocksIndex {
    int B;
    std::vector<std::vector<PropId>> on;  // a on b, a != b (diagonal unused)
    std::vector<PropId> ontable, clear, holding;
    PropId handempty;
};

BlocksIndex blocks_index(const MiniDomainConfig& cfg, DomainBuilder* b) {
    BlocksIndex ix;
    ix.B = cfg.blocks;
    ix.on.assign(ix.B, std::vector<PropId>(ix.B, -1));
    ix.ontable.resize(ix.B);
    ix.clear.resize(ix.B);
    ix.holding.resize(ix.B);
    if (!b) return ix;
    for (int x = 0; x < ix.B; ++x)
        for (int y = 0; y < ix.B; ++y)
            if (x != y) ix.on[x][y] = b->prop("on(" + num("b", x) + "," + num("b", y) + ")");
    for (int x = 0; x < ix.B; ++x) ix.ontable[x] = b->prop("on-table(" + num("b", x) + ")");
    for (int x = 0; x < ix.B; ++x) ix.clear[x] = b->prop("clear(" + num("b", x) + ")");
    for (int x = 0; x < ix.B; ++x) ix.holding[x] = b->prop("holding(" + num("b", x) + ")");
    ix.handempty = b->prop("hand-empty");
    return ix;
}

BlocksIndex blocks_lookup(const MiniDomainConfig& cfg, const GroundDomain& dom) {
    BlocksIndex ix = blocks_index(cfg, nullptr);
    for (int x = 0; x < ix.B; ++x)
        for (int y = 0; y < ix.B; ++y)
            if (x != y) ix.on[x][y] = *dom.find_prop("on(" + num("b", x) + "," + num("b", y) + ")");
    for (int x = 0; x < ix.B; ++x) ix.ontable[x] = *dom.find_prop("on-table(" + num("b", x) + ")");
    for (int x = 0; x < ix.B; ++x) ix.clear[x] = *dom.find_prop("clear(" + num("b", x) + ")");
    for (int x = 0; x < ix.B; ++x) ix.holding[x] = *dom.find_prop("holding(" + num("b", x) + ")");
    ix.handempty = *dom.find_prop("hand-empty");
    return ix;
}

GroundDomain make_blocks(const MiniDomainConfig& cfg) {
    if (cfg.blocks < 2) throw std::invalid_argument("blocks needs >= 2 blocks");
    DomainBuilder b;
    BlocksIndex ix = blocks_index(cfg, &b);
    for (int x = 0; x < ix.B; ++x) {
        b.action("pick-up(" + num("b", x) + ")", {ix.clear[x], ix.ontable[x], ix.handempty},
                 {ix.holding[x]}, {ix.clear[x], ix.ontable[x], ix.handempty});
        b.action("put-down(" + num("b", x) + ")", {ix.holding[x]},
                 {ix.clear[x], ix.ontable[x], ix.handempty}, {ix.holding[x]});
    }
    for (int x = 0; x < ix.B; ++x)
        for (int y = 0; y < ix.B; ++y) {
            if (x == y) continue;
            b.action("stack(" + num("b", x) + "," + num("b", y) + ")", {ix.holding[x], ix.clear[y]},
                     {ix.on[x][y], ix.clear[x], ix.handempty}, {ix.holding[x], ix.clear[y]});
            b.action("unstack(" + num("b", x) + "," + num("b", y) + ")",
                     {ix.on[x][y], ix.clear[x], ix.handempty}, {ix.holding[x], ix.clear[y]},
                     {ix.on[x][y], ix.clear[x], ix.handempty});
        }
    return GroundDomain("blocks-" + std::to_string(ix.B), std::move(b.props), std::move(b.actions));
}

// Towers as lists bottom-to-top; every layout reachable from every other.
std::vector<std::vector<int>> random_towers(int b_count, Rng& rng) {
    std::vector<int> order(b_count);
    for (int i = 0; i < b_count; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::vector<int>> towers;
    for (int blk : order) {
        if (towers.empty() || rng.index(2) == 0)
            towers.push_back({blk});
        else
            towers[rng.index(towers.size())].push_back(blk);
    }
    return towers;
}

State towers_to_state(const BlocksIndex& ix, const std::vector<std::vector<int>>& towers) {
    std::vector<PropId> props{ix.handempty};
    for (const auto& t : towers) {
        props.push_back(ix.ontable[t.front()]);
        props.push_back(ix.clear[t.back()]);
        for (size_t i = 1; i < t.size(); ++i) props.push_back(ix.on[t[i]][t[i - 1]]);
    }
    return State(std::move(props));
}

Instance sample_blocks(const MiniDomainConfig& cfg, const GroundDomain& dom, Rng& rng) {
    BlocksIndex ix = blocks_lookup(cfg, dom);
    State initial = towers_to_state(ix, random_towers(ix.B, rng));
    // Goal: the on/on-table skeleton of another random layout, resampled a few
    // times if it already holds initially.
    for (int attempt = 0; attempt < 32; ++attempt) {
        std::vector<std::vector<int>> target = random_towers(ix.B, rng);
        std::vector<PropId> goal;
        for (const auto& t : target) {
            goal.push_back(ix.ontable[t.front()]);
            for (size_t i = 1; i < t.size(); ++i) goal.push_back(ix.on[t[i]][t[i - 1]]);
        }
        PropSet g(std::move(goal));
        if (!g.subset_of(initial)) return {initial, g};
    }
    // Degenerate layouts (single block) always satisfy any layout goal; fall
    // back to demanding the hand hold a block? No: keep goals positive facts
    // about placement only, so just return the last target even if satisfied.
    std::vector<std::vector<int>> target = random_towers(ix.B, rng);
    std::vector<PropId> goal;
    for (const auto& t : target) {
        goal.push_back(ix.ontable[t.front()]);
        for (size_t i = 1; i < t.size(); ++i) goal.push_back(ix.on[t[i]][t[i - 1]]);
    }
    return {initial, PropSet(std::move(goal))};
}

}  // namespace

GroundDomain make_domain(const MiniDomainConfig& cfg) {
    if (cfg.family == "ferry") return make_ferry(cfg);
    if (cfg.family == "logistics") return make_logistics(cfg);
    if (cfg.family == "blocks") return make_blocks(cfg);
    throw std::invalid_argument("unknown domain family: " + cfg.family);
}

Instance sample_instance(const MiniDomainConfig& cfg, const GroundDomain& dom, Rng& rng) {
    if (cfg.family == "ferry") return sample_ferry(cfg, dom, rng);
    if (cfg.family == "logistics") return sample_logistics(cfg, dom, rng);
    if (cfg.family == "blocks") return sample_blocks(cfg, dom, rng);
    throw std::invalid_argument("unknown domain family: " + cfg.family);
}

}  // namespace vecplan
