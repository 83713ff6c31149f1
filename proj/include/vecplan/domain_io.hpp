#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vecplan/strips.hpp"

namespace vecplan {

// Parse failure with 1-based source line.
struct ParseError : std::runtime_error {
    ParseError(const std::string& what, size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_no(line) {}
    size_t line_no;
};

// Line-oriented ground domain text (grammar in docs/file-formats.md):
//   domain NAME
//   prop NAME ...
//   action NAME / pre ... / add ... / del ... / end
GroundDomain read_domain(std::istream& in);
GroundDomain read_domain_file(const std::string& path);
void write_domain(std::ostream& out, const GroundDomain& dom);
void write_domain_file(const std::string& path, const GroundDomain& dom);

// Instance record; goal-state is an optional fully observed state known to
// satisfy the goal (recorded at generation time, used as a planning target).
struct InstanceRecord {
    Instance instance;
    std::optional<State> goal_state;
};

std::vector<InstanceRecord> read_instances(std::istream& in, const GroundDomain& dom);
std::vector<InstanceRecord> read_instances_file(const std::string& path, const GroundDomain& dom);
void write_instances(std::ostream& out, const GroundDomain& dom,
                     const std::vector<InstanceRecord>& instances);
void write_instances_file(const std::string& path, const GroundDomain& dom,
                          const std::vector<InstanceRecord>& instances);

}  // namespace vecplan
