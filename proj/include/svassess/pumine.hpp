#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "svassess/corpus.hpp"
#include "svassess/models.hpp"

namespace svassess::pumine {

// Keywords are stored stemmed. Keywords of up to three characters match whole
// tokens only; longer ones match as substrings.
class KeywordSet {
 public:
  KeywordSet() = default;
  explicit KeywordSet(const std::vector<std::string>& raw);

  static KeywordSet load(const std::string& path);

  const std::set<std::string>& keywords() const { return keywords_; }
  bool matches(std::string_view token) const;

 private:
  std::set<std::string> keywords_;
  std::set<std::string> exact_;
  std::set<std::string> exact_stems_;
  std::set<std::string> substring_;
};

struct KeywordMetrics {
  std::size_t count = 0;
  std::size_t words = 0;
  double ratio = 0.0;
};

KeywordMetrics keyword_metrics(std::string_view text, const KeywordSet& keywords);

struct Thresholds {
  std::size_t min_count = 0;
  double min_ratio = 0.0;
  bool operator==(const Thresholds&) const = default;
};

struct ContentFilterConfig {
  // site -> step (1 or 2) -> thresholds
  std::map<corpus::Site, std::map<int, Thresholds>> thresholds;

  static ContentFilterConfig defaults();
  const Thresholds& at(corpus::Site site, int step) const;
  void validate() const;
  nlohmann::json to_json() const;
  static ContentFilterConfig from_json(const nlohmann::json& j);
};

struct FilteredPost {
  corpus::QaPost post;
  KeywordMetrics metrics;
};

// Keeps posts with kw_count >= a and kw_ratio >= b for (site, step).
std::vector<FilteredPost> content_filter(const std::vector<corpus::QaPost>& posts, corpus::Site site, int step,
                                         const ContentFilterConfig& config, const KeywordSet& keywords);

// PU learning ----------------------------------------------------------------

using Vec = std::vector<double>;

// 1 - cosine similarity; both vectors must be non-zero.
double cosine_distance(const Vec& a, const Vec& b);
Vec centroid(const std::vector<Vec>& xs);
// Incremental mean: (old * n + sum(new)) / (n + |new|).
Vec update_centroid(const Vec& old, std::size_t n, const std::vector<Vec>& fresh);

struct ReliableNegatives {
  Vec centroid_p;
  Vec centroid_u;
  // Indices into U.
  std::vector<std::size_t> indices;
};

// Unlabeled vectors x with d(x, c_U) < alpha * d(x, c_P).
ReliableNegatives reliable_negatives(const std::vector<Vec>& p, const std::vector<Vec>& u, double alpha);

struct PuConfig {
  double alpha = 1.0;
  std::string embedding = "lsa-tfidf";
  models::ClassifierSpec classifier{models::Kind::LogisticRegression, 1.0};
};

struct PuModel {
  models::Classifier classifier;
  double alpha = 1.0;
  std::string embedding;
  std::size_t reliable_negative_count = 0;

  bool is_positive(const Vec& x) const;
  nlohmann::json to_json() const;
};

extern const char* const kPositive;
extern const char* const kNegative;

PuModel pu_train(const std::vector<Vec>& p, const std::vector<Vec>& u, const PuConfig& config, std::uint64_t seed);

// Topic aggregation ------------------------------------------------------------

using Theta = std::vector<std::vector<double>>;

std::vector<double> topic_share(const Theta& theta);

struct ExpertiseResult {
  std::vector<double> scores;
  std::size_t skipped = 0;
};

// question_theta rows are posts, knowledge rows are answerers;
// accepted_answerer[p] names the knowledge row for post p (or -1).
ExpertiseResult specific_expertise(const Theta& question_theta, const Theta& knowledge_theta,
                                   const std::vector<long>& accepted_answerer);

std::set<std::size_t> assign_topics(const std::vector<double>& row, double threshold = 0.1);

}  // namespace svassess::pumine
