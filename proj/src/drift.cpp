#include "svassess/drift.hpp"

#include <set>
#include <sstream>

#include "svassess/common.hpp"

namespace svassess::drift {

std::map<int, std::size_t> new_terms_by_year(const std::vector<DatedDoc>& docs) {
  std::map<std::string, int> first_seen;
  for (const auto& d : docs)
    for (const auto& t : d.tokens) {
      auto [it, inserted] = first_seen.emplace(t, d.year);
      if (!inserted && d.year < it->second) it->second = d.year;
    }
  std::set<int> years;
  for (const auto& d : docs) years.insert(d.year);
  std::map<int, std::size_t> out;
  if (years.empty()) return out;
  const int first = *years.begin();
  for (int y : years)
    if (y != first) out[y] = 0;
  for (const auto& [term, y] : first_seen)
    if (y != first) ++out[y];
  return out;
}

std::vector<std::string> find_all_zero_cases(const features::FeatureModel& model, const std::vector<DatedDoc>& docs) {
  std::vector<std::string> ids;
  for (const auto& d : docs)
    if (model.counts(d.tokens).empty()) ids.push_back(d.id);
  return ids;
}

double char_coverage(const features::FeatureModel& model, const std::vector<features::TokenDoc>& docs) {
  if (docs.empty()) fail(ErrorKind::InvalidArgument, "coverage of an empty document list is undefined");
  std::size_t covered = 0;
  for (const auto& d : docs)
    if (!model.counts(d).empty()) ++covered;
  return static_cast<double>(covered) / static_cast<double>(docs.size());
}

nlohmann::json DriftReport::to_json() const {
  nlohmann::json nt = nlohmann::json::object(), cov = nlohmann::json::object();
  for (const auto& [y, n] : new_terms) nt[std::to_string(y)] = n;
  for (const auto& [y, c] : coverage) cov[std::to_string(y)] = c;
  return {{"new_terms_by_year", nt}, {"all_zero_ids", all_zero_ids}, {"coverage_by_year", cov}};
}

std::string DriftReport::new_terms_csv() const {
  std::ostringstream os;
  os << "year,new_terms\n";
  for (const auto& [y, n] : new_terms) os << y << ',' << n << '\n';
  return os.str();
}

}  // namespace svassess::drift
