#pragma once

#include <string>

#include "cloudopf/network.hpp"

namespace cloudopf {

// Parses MATPOWER case text (mpc.baseMVA, mpc.bus, mpc.gen, mpc.branch,
// mpc.gencost). Quantities are converted to per-unit on baseMVA, out-of-service
// branches/generators are dropped, bus kinds are normalized so that PV/slack
// buses are exactly the ones with an in-service generator. Throws ParseError
// on malformed input and ValidationError on model-level defects (no slack,
// dangling references, piecewise-linear or higher-degree cost models).
NetworkCase parse_matpower_case(const std::string& text);

NetworkCase load_matpower_file(const std::string& path);

// Emits case text that parses back to a field-identical model (the MW/decimal
// representation is chosen so the per-unit conversion round-trips exactly).
std::string to_matpower_case(const NetworkCase& net, const std::string& name = "case");

// Field-by-field equality of the materialized models (demands compared at the
// effective loading, not the stored base/scale split).
bool model_equal(const NetworkCase& a, const NetworkCase& b);

}  // namespace cloudopf
