#pragma once

#include <filesystem>
#include <string>

#include "sigsched/network.hpp"

namespace sigsched {

/// Parses a scenario document (JSON text). Throws ValidationError on schema
/// problems; structural checks are left to validate_network().
NetworkSpec parse_scenario(const std::string& json_text);
NetworkSpec load_scenario(const std::filesystem::path& path);

/// Serializes a spec back to JSON. parse_scenario(dump_scenario(s)) == s.
std::string dump_scenario(const NetworkSpec& spec, int indent = 2);
void save_scenario(const NetworkSpec& spec, const std::filesystem::path& path);

}  // namespace sigsched
