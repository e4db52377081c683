#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svassess/features.hpp"

namespace svassess::drift {

struct DatedDoc {
  std::string id;
  int year = 0;
  features::TokenDoc tokens;
};

// Distinct terms first seen in year y, for every year after the earliest.
std::map<int, std::size_t> new_terms_by_year(const std::vector<DatedDoc>& docs);

// Ids of docs whose transform has no non-zero feature.
std::vector<std::string> find_all_zero_cases(const features::FeatureModel& model, const std::vector<DatedDoc>& docs);

// Fraction of docs with at least one non-zero feature.
double char_coverage(const features::FeatureModel& model, const std::vector<features::TokenDoc>& docs);

struct DriftReport {
  std::map<int, std::size_t> new_terms;
  std::vector<std::string> all_zero_ids;
  std::map<int, double> coverage;

  nlohmann::json to_json() const;
  std::string new_terms_csv() const;
};

}  // namespace svassess::drift
