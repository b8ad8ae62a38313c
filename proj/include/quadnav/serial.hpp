#pragma once

#include "json.hpp"
#include "quadnav/policy.hpp"

namespace quadnav::serial {

nlohmann::json spec_to_json(const policy::PolicySpec& spec);
policy::PolicySpec spec_from_json(const nlohmann::json& j);

}  // namespace quadnav::serial
