#pragma once

#include <json.hpp>

#include "cdi/large_deviations.hpp"
#include "cdi/limit_laws.hpp"
#include "cdi/rate_models.hpp"
#include "cdi/tail_analysis.hpp"

namespace cdi::cli {

using Json = nlohmann::ordered_json;

Json to_json(const GofReport& r);
Json to_json(const ConditionReport& r);
Json to_json(const LdReport& r);

/// Model from a preset file: {"kind": preset name, "beta"?, "a"?, "rho"?, "c"?, "range_hint"?}.
/// Unknown keys are rejected with DomainError.
RateModel model_from_json(const Json& j);

}  // namespace cdi::cli
