#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace svassess::pipeline {

inline constexpr const char* kVersion = "0.1.0";

// Subcommands: ingest, featurize, train, evaluate, assess, drift, context,
// mine, gradcheck. Artifacts go to config["out"]; the returned JSON lists
// them. A manifest is written for every run that gets past config parsing,
// failed ones included.
nlohmann::json run(const std::string& subcommand, const nlohmann::json& config);

bool is_subcommand(std::string_view name);

std::uint64_t fnv1a(std::string_view data);

// Aligned per-task table plus an average row; tasks without test data show
// "n/a".
std::string metrics_table(const nlohmann::json& metrics);

}  // namespace svassess::pipeline
