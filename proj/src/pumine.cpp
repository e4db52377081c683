#include "svassess/pumine.hpp"

#include <cctype>
#include <cmath>

#include "svassess/common.hpp"
#include "svassess/textprep.hpp"

namespace svassess::pumine {

using nlohmann::json;

const char* const kPositive = "positive";
const char* const kNegative = "negative";

namespace {

std::string_view trim_punct(std::string_view t) {
  auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (!t.empty() && punct(t.front())) t.remove_prefix(1);
  while (!t.empty() && punct(t.back())) t.remove_suffix(1);
  return t;
}

}  // namespace

KeywordSet::KeywordSet(const std::vector<std::string>& raw) {
  for (const auto& r : raw) {
    const std::string k = to_lower(trim(r));
    if (k.empty()) continue;
    const std::string stem = text::porter_stem(k);
    keywords_.insert(stem);
    if (k.size() <= 3) {
      exact_.insert(k);
      exact_stems_.insert(stem);
    } else {
      substring_.insert(stem);
    }
  }
  if (keywords_.empty()) fail(ErrorKind::InvalidArgument, "keyword set must not be empty");
}

KeywordSet KeywordSet::load(const std::string& path) { return KeywordSet(corpus::split_lines(read_file(path))); }

bool KeywordSet::matches(std::string_view token) const {
  const std::string lower = to_lower(token);
  const std::string core(trim_punct(lower));
  if (!core.empty() && (exact_.count(core) || exact_stems_.count(text::porter_stem(core)))) return true;
  for (const auto& stem : substring_)
    if (lower.find(stem) != std::string::npos) return true;
  return false;
}

KeywordMetrics keyword_metrics(std::string_view text, const KeywordSet& keywords) {
  const auto words = split_whitespace(text);
  if (words.empty()) fail(ErrorKind::InvalidArgument, "keyword metrics of an empty post are undefined");
  KeywordMetrics m;
  m.words = words.size();
  for (const auto& w : words)
    if (keywords.matches(w)) ++m.count;
  m.ratio = static_cast<double>(m.count) / static_cast<double>(m.words);
  return m;
}

ContentFilterConfig ContentFilterConfig::defaults() {
  ContentFilterConfig c;
  c.thresholds[corpus::Site::SO][1] = {1, 0.011};
  c.thresholds[corpus::Site::SO][2] = {3, 0.017};
  c.thresholds[corpus::Site::SSE][1] = {2, 0.017};
  c.thresholds[corpus::Site::SSE][2] = {3, 0.025};
  return c;
}

const Thresholds& ContentFilterConfig::at(corpus::Site site, int step) const {
  auto s = thresholds.find(site);
  if (s == thresholds.end()) fail(ErrorKind::InvalidArgument, "no thresholds for site " + corpus::site_name(site));
  auto t = s->second.find(step);
  if (t == s->second.end())
    fail(ErrorKind::InvalidArgument, "no thresholds for " + corpus::site_name(site) + " step " + std::to_string(step));
  return t->second;
}

void ContentFilterConfig::validate() const {
  for (const auto& [site, steps] : thresholds)
    for (const auto& [step, t] : steps) {
      if (step != 1 && step != 2) fail(ErrorKind::InvalidArgument, "filter step must be 1 or 2");
      if (!(t.min_ratio >= 0.0 && t.min_ratio <= 1.0))
        fail(ErrorKind::InvalidArgument, "keyword ratio threshold must lie in [0, 1]");
    }
}

json ContentFilterConfig::to_json() const {
  json j = json::object();
  for (const auto& [site, steps] : thresholds)
    for (const auto& [step, t] : steps)
      j[corpus::site_name(site)]["step" + std::to_string(step)] = {{"min_count", t.min_count},
                                                                   {"min_ratio", t.min_ratio}};
  return j;
}

ContentFilterConfig ContentFilterConfig::from_json(const json& j) {
  ContentFilterConfig c;
  for (const auto& [site, steps] : j.items())
    for (const auto& [step, t] : steps.items()) {
      if (step.rfind("step", 0) != 0) fail(ErrorKind::Schema, "filter config: expected 'step1'/'step2'");
      c.thresholds[corpus::parse_site(site)][std::stoi(step.substr(4))] = {t.at("min_count").get<std::size_t>(),
                                                                           t.at("min_ratio").get<double>()};
    }
  c.validate();
  return c;
}

std::vector<FilteredPost> content_filter(const std::vector<corpus::QaPost>& posts, corpus::Site site, int step,
                                         const ContentFilterConfig& config, const KeywordSet& keywords) {
  if (step != 1 && step != 2) fail(ErrorKind::InvalidArgument, "filter step must be 1 or 2");
  const Thresholds& t = config.at(site, step);
  std::vector<FilteredPost> kept;
  for (const auto& p : posts) {
    if (p.site != site) continue;
    const std::string text = p.full_text();
    if (split_whitespace(text).empty()) continue;
    const auto m = keyword_metrics(text, keywords);
    if (m.count >= t.min_count && m.ratio >= t.min_ratio) kept.push_back({p, m});
  }
  return kept;
}

// PU learning ----------------------------------------------------------------

namespace {

double norm(const Vec& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

}  // namespace

double cosine_distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) fail(ErrorKind::InvalidArgument, "cosine distance: length mismatch");
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) fail(ErrorKind::InvalidArgument, "cosine distance of a zero vector is undefined");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  const double sim = std::clamp(dot / (na * nb), -1.0, 1.0);
  return 1.0 - sim;
}

Vec centroid(const std::vector<Vec>& xs) {
  if (xs.empty()) fail(ErrorKind::InvalidArgument, "centroid of an empty set");
  Vec c(xs.front().size(), 0.0);
  for (const auto& x : xs) {
    if (x.size() != c.size()) fail(ErrorKind::InvalidArgument, "centroid: length mismatch");
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += x[i];
  }
  for (auto& v : c) v /= static_cast<double>(xs.size());
  return c;
}

Vec update_centroid(const Vec& old, std::size_t n, const std::vector<Vec>& fresh) {
  if (n < 1) fail(ErrorKind::InvalidArgument, "centroid update needs N >= 1");
  Vec c(old.size());
  for (std::size_t i = 0; i < old.size(); ++i) c[i] = old[i] * static_cast<double>(n);
  for (const auto& x : fresh) {
    if (x.size() != old.size()) fail(ErrorKind::InvalidArgument, "centroid update: length mismatch");
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += x[i];
  }
  const double total = static_cast<double>(n + fresh.size());
  for (auto& v : c) v /= total;
  return c;
}

ReliableNegatives reliable_negatives(const std::vector<Vec>& p, const std::vector<Vec>& u, double alpha) {
  if (p.empty() || u.empty()) fail(ErrorKind::InvalidArgument, "reliable negatives need non-empty P and U");
  if (!std::isfinite(alpha) || alpha < 0.0) fail(ErrorKind::InvalidArgument, "alpha must be finite and >= 0");
  auto check = [](const std::vector<Vec>& xs, const char* set) {
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (norm(xs[i]) == 0.0)
        fail(ErrorKind::InvalidArgument, std::string("zero-norm vector at ") + set + "[" + std::to_string(i) + "]");
  };
  check(p, "P");
  check(u, "U");
  ReliableNegatives rn;
  rn.centroid_p = centroid(p);
  rn.centroid_u = centroid(u);
  if (norm(rn.centroid_p) == 0.0 || norm(rn.centroid_u) == 0.0)
    fail(ErrorKind::InvalidArgument, "a class centroid is the zero vector; cosine distance is undefined");
  for (std::size_t i = 0; i < u.size(); ++i)
    if (cosine_distance(u[i], rn.centroid_u) < alpha * cosine_distance(u[i], rn.centroid_p)) rn.indices.push_back(i);
  return rn;
}

bool PuModel::is_positive(const Vec& x) const {
  return classifier.predict(features::SparseVector::from_dense(x)) == kPositive;
}

json PuModel::to_json() const {
  return {{"alpha", alpha},
          {"embedding", embedding},
          {"reliable_negatives", reliable_negative_count},
          {"classifier", classifier.to_json()}};
}

PuModel pu_train(const std::vector<Vec>& p, const std::vector<Vec>& u, const PuConfig& config, std::uint64_t seed) {
  const auto rn = reliable_negatives(p, u, config.alpha);
  if (rn.indices.empty())
    fail(ErrorKind::Runtime, "stage 1 found no reliable negatives at alpha = " + std::to_string(config.alpha) +
                                 "; try a larger alpha");
  features::SparseMatrix x;
  std::vector<std::string> y;
  for (const auto& v : p) {
    x.push_back(features::SparseVector::from_dense(v));
    y.emplace_back(kPositive);
  }
  for (std::size_t i : rn.indices) {
    x.push_back(features::SparseVector::from_dense(u[i]));
    y.emplace_back(kNegative);
  }
  PuModel m;
  m.classifier = models::train_classifier(config.classifier, x, y, seed);
  m.alpha = config.alpha;
  m.embedding = config.embedding;
  m.reliable_negative_count = rn.indices.size();
  return m;
}

// Topic aggregation ------------------------------------------------------------

std::vector<double> topic_share(const Theta& theta) {
  if (theta.empty()) fail(ErrorKind::InvalidArgument, "topic share of an empty matrix");
  const std::size_t k = theta.front().size();
  std::vector<double> share(k, 0.0);
  for (std::size_t r = 0; r < theta.size(); ++r) {
    if (theta[r].size() != k) fail(ErrorKind::InvalidArgument, "theta rows differ in length");
    double sum = 0.0;
    for (double v : theta[r]) {
      if (v < 0.0) fail(ErrorKind::InvalidArgument, "negative topic probability in row " + std::to_string(r));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      fail(ErrorKind::InvalidArgument, "theta row " + std::to_string(r) + " does not sum to 1");
    for (std::size_t i = 0; i < k; ++i) share[i] += theta[r][i];
  }
  for (auto& s : share) s /= static_cast<double>(theta.size());
  return share;
}

ExpertiseResult specific_expertise(const Theta& question_theta, const Theta& knowledge_theta,
                                   const std::vector<long>& accepted_answerer) {
  if (question_theta.size() != accepted_answerer.size())
    fail(ErrorKind::InvalidArgument, "one accepted answerer entry per question is required");
  ExpertiseResult r;
  if (question_theta.empty()) return r;
  const std::size_t k = question_theta.front().size();
  r.scores.assign(k, 0.0);
  for (std::size_t p = 0; p < question_theta.size(); ++p) {
    if (question_theta[p].size() != k) fail(ErrorKind::InvalidArgument, "question theta rows differ in length");
    const long a = accepted_answerer[p];
    if (a < 0 || static_cast<std::size_t>(a) >= knowledge_theta.size()) {
      ++r.skipped;
      continue;
    }
    const auto& kn = knowledge_theta[static_cast<std::size_t>(a)];
    if (kn.size() != k) fail(ErrorKind::InvalidArgument, "knowledge theta width differs from question theta");
    for (std::size_t i = 0; i < k; ++i) r.scores[i] += question_theta[p][i] * kn[i];
  }
  return r;
}

std::set<std::size_t> assign_topics(const std::vector<double>& row, double threshold) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < row.size(); ++i)
    if (row[i] >= threshold) out.insert(i);
  return out;
}

}  // namespace svassess::pumine
