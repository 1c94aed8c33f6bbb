#pragma once

#include <string>
#include <vector>

#include "uwb/sim.hpp"

namespace uwb {

// Parses a scenario from JSON text. Unknown keys are rejected so a typo in a
// sweep override fails loudly instead of silently running the default.
// `overrides` entries have the form "dotted.path=value" (array elements as
// "nodes[2].z=1.5"); the value is parsed as a JSON literal, falling back to a
// plain string. Throws ConfigError with line/column on malformed JSON.
Scenario parse_scenario_text(const std::string& text,
                             const std::vector<std::string>& overrides = {});

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides = {});

// Serializes every field, defaulted or not, so the output re-parses to the
// identical scenario. Parse -> serialize -> parse is the identity.
std::string scenario_to_json(const Scenario& sc);

}  // namespace uwb
