#pragma once

#include <string>

#include "vecplan/rng.hpp"
#include "vecplan/strips.hpp"

namespace vecplan {

// Parameterized ground mini-domains, small enough that the reference planner
// and the learners run in seconds but structured like their full-size
// counterparts.
//
// ferry:     one boat moves cargos between locations, capacity one.
// logistics: trucks carry packages between locations.
// blocks:    single-arm tower rearrangement.
struct MiniDomainConfig {
    std::string family = "ferry";
    // ferry
    int cargos = 2;
    int locations = 2;  // shared with logistics
    // logistics
    int packages = 2;
    int trucks = 1;
    // blocks
    int blocks = 3;
};

GroundDomain make_domain(const MiniDomainConfig& cfg);

// One random instance: structurally valid initial state plus a nonempty goal
// that does not already hold in it. Always solvable by construction in these
// families (the caller still verifies with the reference planner).
Instance sample_instance(const MiniDomainConfig& cfg, const GroundDomain& dom, Rng& rng);

}  // namespace vecplan
