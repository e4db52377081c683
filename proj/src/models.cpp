#include "svassess/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "svassess/common.hpp"

namespace svassess::models {

using nlohmann::json;

std::string kind_name(Kind kind) {
  switch (kind) {
    case Kind::NaiveBayes: return "naive_bayes";
    case Kind::LogisticRegression: return "logistic_regression";
    case Kind::LinearSvm: return "linear_svm";
    case Kind::Knn: return "knn";
  }
  return "?";
}

Kind parse_kind(const std::string& name) {
  for (Kind k : {Kind::NaiveBayes, Kind::LogisticRegression, Kind::LinearSvm, Kind::Knn})
    if (kind_name(k) == name) return k;
  if (name == "nb") return Kind::NaiveBayes;
  if (name == "lr") return Kind::LogisticRegression;
  if (name == "svm") return Kind::LinearSvm;
  fail(ErrorKind::InvalidArgument, "unknown classifier kind '" + name + "'");
}

void ClassifierSpec::validate() const {
  if ((kind == Kind::LogisticRegression || kind == Kind::LinearSvm) && !(c > 0.0 && std::isfinite(c)))
    fail(ErrorKind::InvalidArgument, "regularization C must be positive");
  if (kind == Kind::Knn) {
    if (k < 1) fail(ErrorKind::InvalidArgument, "KNN k must be >= 1");
    if (p != 1 && p != 2) fail(ErrorKind::InvalidArgument, "KNN norm must be 1 or 2");
  }
}

int ClassifierSpec::hyperparameter_count() const {
  switch (kind) {
    case Kind::NaiveBayes: return 0;
    case Kind::LogisticRegression:
    case Kind::LinearSvm: return 1;
    case Kind::Knn: return 3;
  }
  return 0;
}

std::string ClassifierSpec::describe() const {
  switch (kind) {
    case Kind::NaiveBayes: return "naive_bayes";
    case Kind::LogisticRegression:
    case Kind::LinearSvm: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s(C=%g)", kind_name(kind).c_str(), c);
      return buf;
    }
    case Kind::Knn:
      return "knn(k=" + std::to_string(k) + ",weight=" + (weight == KnnWeight::Uniform ? "uniform" : "distance") +
             ",p=" + std::to_string(p) + ")";
  }
  return "?";
}

json ClassifierSpec::to_json() const {
  json j{{"kind", kind_name(kind)}};
  if (kind == Kind::LogisticRegression || kind == Kind::LinearSvm) j["C"] = c;
  if (kind == Kind::Knn) {
    j["k"] = k;
    j["weight"] = weight == KnnWeight::Uniform ? "uniform" : "distance";
    j["p"] = p;
  }
  return j;
}

ClassifierSpec ClassifierSpec::from_json(const json& j) {
  ClassifierSpec s;
  s.kind = parse_kind(j.at("kind").get<std::string>());
  s.c = j.value("C", 1.0);
  s.k = j.value("k", 5);
  const auto w = j.value("weight", std::string("uniform"));
  if (w == "uniform") s.weight = KnnWeight::Uniform;
  else if (w == "distance") s.weight = KnnWeight::Distance;
  else fail(ErrorKind::InvalidArgument, "KNN weight must be 'uniform' or 'distance'");
  s.p = j.value("p", 2);
  s.validate();
  return s;
}

std::vector<ClassifierSpec> default_grid(Kind kind) {
  std::vector<ClassifierSpec> grid;
  switch (kind) {
    case Kind::NaiveBayes: grid.push_back({}); break;
    case Kind::LogisticRegression:
    case Kind::LinearSvm:
      for (double c : {0.01, 0.1, 1.0, 10.0, 100.0}) {
        ClassifierSpec s;
        s.kind = kind;
        s.c = c;
        grid.push_back(s);
      }
      break;
    case Kind::Knn:
      for (int k : {5, 11, 31, 51})
        for (auto w : {KnnWeight::Uniform, KnnWeight::Distance})
          for (int p : {1, 2}) {
            ClassifierSpec s;
            s.kind = kind;
            s.k = k;
            s.weight = w;
            s.p = p;
            grid.push_back(s);
          }
      break;
  }
  return grid;
}

std::size_t argmax_first(const std::vector<double>& v) {
  if (v.empty()) fail(ErrorKind::InvalidArgument, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

namespace {

double sparse_distance(const SparseVector& a, const SparseVector& b, int p) {
  const auto& ea = a.entries();
  const auto& eb = b.entries();
  std::size_t i = 0, j = 0;
  double s = 0.0;
  auto add = [&](double d) { s += p == 1 ? std::abs(d) : d * d; };
  while (i < ea.size() || j < eb.size()) {
    if (j == eb.size() || (i < ea.size() && ea[i].first < eb[j].first)) add(ea[i++].second);
    else if (i == ea.size() || eb[j].first < ea[i].first) add(eb[j++].second);
    else add(ea[i++].second - eb[j++].second);
  }
  return p == 1 ? s : std::sqrt(s);
}

double sparse_dot(const std::vector<double>& w, const SparseVector& x) {
  double s = 0.0;
  for (const auto& [i, v] : x.entries()) s += w[i] * v;
  return s;
}

void train_linear_ovr(std::size_t c, const SparseMatrix& x, const std::vector<std::size_t>& y, double cval,
                      bool logistic, std::uint64_t seed, const SgdSettings& sgd, std::vector<double>& w_out,
                      double& b_out) {
  const std::size_t n = x.size();
  const std::size_t width = x.front().width();
  // w = scale * v, so the L2 shrink is O(1) per step.
  std::vector<double> v(width, 0.0);
  double scale = 1.0;
  double b = 0.0;
  const double alpha = 1.0 / (cval * static_cast<double>(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, c));
  for (int epoch = 0; epoch < sgd.epochs; ++epoch) {
    rng.shuffle(order);
    const double lr = sgd.learning_rate / (1.0 + epoch);
    for (std::size_t idx : order) {
      const double target = y[idx] == c ? 1.0 : -1.0;
      const double margin = scale * sparse_dot(v, x[idx]) + b;
      double g;
      if (logistic) {
        const double z = target * margin;
        g = -target / (1.0 + std::exp(z));
      } else {
        g = target * margin < 1.0 ? -target : 0.0;
      }
      scale *= 1.0 - lr * alpha;
      if (g != 0.0) {
        for (const auto& [i, val] : x[idx].entries()) v[i] -= lr * g * val / scale;
        b -= lr * g;
      }
      if (scale < 1e-9) {
        for (auto& e : v) e *= scale;
        scale = 1.0;
      }
    }
  }
  for (auto& e : v) e *= scale;
  w_out = std::move(v);
  b_out = b;
}

}  // namespace

Classifier train_classifier(const ClassifierSpec& spec, const SparseMatrix& x, const std::vector<std::string>& y,
                            std::uint64_t seed, const SgdSettings& sgd) {
  spec.validate();
  if (x.size() != y.size())
    fail(ErrorKind::InvalidArgument, "feature rows (" + std::to_string(x.size()) + ") != labels (" +
                                         std::to_string(y.size()) + ")");
  if (x.empty()) fail(ErrorKind::InvalidArgument, "cannot train on an empty sample");
  const std::size_t width = x.front().width();
  for (std::size_t r = 0; r < x.size(); ++r) {
    if (x[r].width() != width) fail(ErrorKind::InvalidArgument, "feature rows differ in width");
    for (const auto& e : x[r].entries())
      if (!std::isfinite(e.second)) fail(ErrorKind::InvalidArgument, "non-finite feature in row " + std::to_string(r));
  }
  std::set<std::string> distinct(y.begin(), y.end());
  if (distinct.size() < 2) fail(ErrorKind::InvalidArgument, "training needs at least two distinct labels");

  Classifier m;
  m.spec_ = spec;
  m.labels_.assign(distinct.begin(), distinct.end());
  m.width_ = width;
  m.seed_ = seed;
  std::vector<std::size_t> yi(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    yi[i] = static_cast<std::size_t>(std::lower_bound(m.labels_.begin(), m.labels_.end(), y[i]) - m.labels_.begin());
  const std::size_t nc = m.labels_.size();

  switch (spec.kind) {
    case Kind::NaiveBayes: {
      std::vector<double> class_count(nc, 0.0);
      std::vector<std::vector<double>> feat(nc, std::vector<double>(width, 0.0));
      for (std::size_t r = 0; r < x.size(); ++r) {
        class_count[yi[r]] += 1.0;
        for (const auto& [i, v] : x[r].entries()) {
          if (v < 0) fail(ErrorKind::InvalidArgument, "multinomial naive Bayes needs non-negative features");
          feat[yi[r]][i] += v;
        }
      }
      m.log_prior_.resize(nc);
      m.log_likelihood_.assign(nc, std::vector<double>(width));
      for (std::size_t c = 0; c < nc; ++c) {
        m.log_prior_[c] = std::log(class_count[c] / static_cast<double>(x.size()));
        const double total = std::accumulate(feat[c].begin(), feat[c].end(), 0.0) + static_cast<double>(width);
        for (std::size_t i = 0; i < width; ++i) m.log_likelihood_[c][i] = std::log((feat[c][i] + 1.0) / total);
      }
      break;
    }
    case Kind::LogisticRegression:
    case Kind::LinearSvm: {
      m.weights_.resize(nc);
      m.bias_.resize(nc);
      for (std::size_t c = 0; c < nc; ++c)
        train_linear_ovr(c, x, yi, spec.c, spec.kind == Kind::LogisticRegression, seed, sgd, m.weights_[c],
                         m.bias_[c]);
      break;
    }
    case Kind::Knn:
      m.points_ = x;
      m.point_labels_ = yi;
      break;
  }
  return m;
}

std::vector<double> Classifier::scores(const SparseVector& x) const {
  if (x.width() != width_)
    fail(ErrorKind::InvalidArgument, "feature width " + std::to_string(x.width()) + " != model width " +
                                         std::to_string(width_));
  const std::size_t nc = labels_.size();
  std::vector<double> s(nc, 0.0);
  switch (spec_.kind) {
    case Kind::NaiveBayes:
      for (std::size_t c = 0; c < nc; ++c) s[c] = log_prior_[c] + sparse_dot(log_likelihood_[c], x);
      break;
    case Kind::LogisticRegression:
    case Kind::LinearSvm:
      for (std::size_t c = 0; c < nc; ++c) s[c] = sparse_dot(weights_[c], x) + bias_[c];
      break;
    case Kind::Knn: {
      std::vector<std::pair<double, std::size_t>> d(points_.size());
      for (std::size_t i = 0; i < points_.size(); ++i) d[i] = {sparse_distance(points_[i], x, spec_.p), i};
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(spec_.k), d.size());
      std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
      bool exact = false;
      for (std::size_t i = 0; i < k; ++i) exact = exact || d[i].first == 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        double w = 1.0;
        if (spec_.weight == KnnWeight::Distance) {
          // Exact matches take all the weight, as in the usual 1/d rule.
          if (exact) w = d[i].first == 0.0 ? 1.0 : 0.0;
          else w = 1.0 / d[i].first;
        }
        s[point_labels_[d[i].second]] += w;
      }
      break;
    }
  }
  return s;
}

std::size_t Classifier::predict_index(const SparseVector& x) const { return argmax_first(scores(x)); }

std::vector<std::string> Classifier::predict_all(const SparseMatrix& xs) const {
  std::vector<std::string> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(predict(x));
  return out;
}

std::vector<double> Classifier::probabilities(const SparseVector& x) const {
  auto s = scores(x);
  if (spec_.kind == Kind::Knn) {
    const double total = std::accumulate(s.begin(), s.end(), 0.0);
    for (auto& v : s) v /= total;
    return s;
  }
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (auto& v : s) z += (v = std::exp(v - mx));
  for (auto& v : s) v /= z;
  return s;
}

json Classifier::to_json() const {
  json j{{"spec", spec_.to_json()}, {"labels", labels_}, {"width", width_}, {"seed", seed_}};
  switch (spec_.kind) {
    case Kind::NaiveBayes:
      j["log_prior"] = log_prior_;
      j["log_likelihood"] = log_likelihood_;
      break;
    case Kind::LogisticRegression:
    case Kind::LinearSvm:
      j["weights"] = weights_;
      j["bias"] = bias_;
      break;
    case Kind::Knn: {
      json pts = json::array();
      for (const auto& p : points_) pts.push_back(features::sparse_to_json(p));
      j["points"] = pts;
      j["point_labels"] = point_labels_;
      break;
    }
  }
  return j;
}

Classifier Classifier::from_json(const json& j) {
  try {
    Classifier m;
    m.spec_ = ClassifierSpec::from_json(j.at("spec"));
    m.labels_ = j.at("labels").get<std::vector<std::string>>();
    m.width_ = j.at("width").get<std::size_t>();
    m.seed_ = j.value("seed", std::uint64_t{0});
    switch (m.spec_.kind) {
      case Kind::NaiveBayes:
        m.log_prior_ = j.at("log_prior").get<std::vector<double>>();
        m.log_likelihood_ = j.at("log_likelihood").get<std::vector<std::vector<double>>>();
        break;
      case Kind::LogisticRegression:
      case Kind::LinearSvm:
        m.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
        m.bias_ = j.at("bias").get<std::vector<double>>();
        break;
      case Kind::Knn:
        for (const auto& p : j.at("points")) {
          std::vector<std::pair<std::uint32_t, double>> e;
          for (const auto& kv : p.at("entries")) e.emplace_back(kv.at(0).get<std::uint32_t>(), kv.at(1).get<double>());
          m.points_.emplace_back(p.at("width").get<std::size_t>(), std::move(e));
        }
        m.point_labels_ = j.at("point_labels").get<std::vector<std::size_t>>();
        break;
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorKind::Schema, std::string("classifier JSON: ") + e.what());
  }
}

// Clustering ---------------------------------------------------------------

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(ErrorKind::InvalidArgument, "vector length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::size_t KMeansModel::nearest(const std::vector<double>& x) const {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(centroids[c], x);
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  return best;
}

json KMeansModel::to_json() const {
  return {{"centroids", centroids}, {"inertia_history", inertia_history}, {"iterations", iterations}};
}

KMeansModel KMeansModel::from_json(const json& j) {
  KMeansModel m;
  m.centroids = j.at("centroids").get<DenseMatrix>();
  m.inertia_history = j.value("inertia_history", std::vector<double>{});
  m.iterations = j.value("iterations", std::size_t{0});
  return m;
}

KMeansModel kmeans_fit(const DenseMatrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& opt) {
  if (k < 1) fail(ErrorKind::InvalidArgument, "k-means needs k >= 1");
  if (k > x.size())
    fail(ErrorKind::InvalidArgument, "k-means: k = " + std::to_string(k) + " exceeds " + std::to_string(x.size()) +
                                         " rows");
  const std::size_t dim = x.front().size();
  for (const auto& r : x)
    if (r.size() != dim) fail(ErrorKind::InvalidArgument, "k-means rows differ in length");

  Rng rng(seed);
  KMeansModel m;
  m.centroids.push_back(x[rng.index(x.size())]);
  std::vector<double> d2(x.size());
  while (m.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : m.centroids) best = std::min(best, squared_distance(x[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      // Every point already coincides with a centroid; take the first unused row.
      pick = m.centroids.size() % x.size();
    } else {
      double r = rng.uniform() * total;
      pick = x.size() - 1;
      for (std::size_t i = 0; i < x.size(); ++i) {
        r -= d2[i];
        if (r < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    m.centroids.push_back(x[pick]);
  }

  std::vector<std::size_t> assign(x.size(), 0);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iterations; ++it) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      assign[i] = m.nearest(x[i]);
      inertia += squared_distance(x[i], m.centroids[assign[i]]);
    }
    m.inertia_history.push_back(inertia);
    m.iterations = static_cast<std::size_t>(it + 1);
    if (std::abs(prev - inertia) < opt.tolerance) break;
    prev = inertia;
    DenseMatrix sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      ++counts[assign[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += x[i][d];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (std::size_t d = 0; d < dim; ++d) m.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
  }
  return m;
}

namespace {

std::string modal_class(const std::map<std::string, std::size_t>& counts) {
  std::string best;
  std::size_t bc = 0;
  for (const auto& [cls, n] : counts)
    if (n > bc) {
      bc = n;
      best = cls;
    }
  return best;
}

}  // namespace

UcvaModel ucva_fit(KMeansModel clustering, const DenseMatrix& x, const std::vector<corpus::Labels>& labels,
                   const std::vector<std::string>& tasks) {
  if (x.size() != labels.size()) fail(ErrorKind::InvalidArgument, "rows and label maps differ in count");
  UcvaModel m;
  m.tasks = tasks;
  m.table.resize(clustering.centroids.size());
  std::map<std::string, std::map<std::string, std::size_t>> global;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t c = clustering.nearest(x[i]);
    for (const auto& t : tasks) {
      auto it = labels[i].find(t);
      if (it == labels[i].end()) continue;
      ++m.table[c][t][it->second];
      ++global[t][it->second];
    }
  }
  for (const auto& t : tasks) m.global_mode[t] = modal_class(global[t]);
  m.clustering = std::move(clustering);
  return m;
}

corpus::Labels ucva_assign(const UcvaModel& model, const std::vector<double>& x) {
  const std::size_t c = model.clustering.nearest(x);
  corpus::Labels out;
  for (const auto& t : model.tasks) {
    auto it = model.table[c].find(t);
    if (it == model.table[c].end() || it->second.empty()) out[t] = model.global_mode.at(t);
    else out[t] = modal_class(it->second);
  }
  return out;
}

json UcvaModel::to_json() const {
  return {{"clustering", clustering.to_json()}, {"tasks", tasks}, {"table", table}, {"global_mode", global_mode}};
}

UcvaModel UcvaModel::from_json(const json& j) {
  UcvaModel m;
  m.clustering = KMeansModel::from_json(j.at("clustering"));
  m.tasks = j.at("tasks").get<std::vector<std::string>>();
  m.table = j.at("table").get<decltype(m.table)>();
  m.global_mode = j.at("global_mode").get<corpus::Labels>();
  return m;
}

// Label concatenation ------------------------------------------------------

std::string xcva_encode(const corpus::Labels& labels, const std::vector<std::string>& tasks) {
  std::string out;
  for (const auto& t : tasks) {
    auto it = labels.find(t);
    if (it == labels.end()) fail(ErrorKind::InvalidArgument, "missing label for task '" + t + "'");
    if (it->second.find_first_of("|=") != std::string::npos)
      fail(ErrorKind::InvalidArgument, "class '" + it->second + "' contains a reserved character");
    if (!out.empty()) out += '|';
    out += t + "=" + it->second;
  }
  return out;
}

corpus::Labels xcva_decode(const std::string& encoded, const std::vector<std::string>& tasks) {
  corpus::Labels out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::size_t end = i + 1 == tasks.size() ? encoded.size() : encoded.find('|', pos);
    if (end == std::string::npos) fail(ErrorKind::Parse, "concatenated label '" + encoded + "' has too few parts");
    const std::string part = encoded.substr(pos, end - pos);
    const auto eq = part.find('=');
    if (eq == std::string::npos || part.substr(0, eq) != tasks[i])
      fail(ErrorKind::Parse, "concatenated label '" + encoded + "': expected task '" + tasks[i] + "'");
    const std::string cls = part.substr(eq + 1);
    if (cls.empty() || cls.find_first_of("|=") != std::string::npos)
      fail(ErrorKind::Parse, "concatenated label '" + encoded + "': bad class for '" + tasks[i] + "'");
    out[tasks[i]] = cls;
    pos = end + 1;
  }
  if (tasks.empty() && !encoded.empty()) fail(ErrorKind::Parse, "concatenated label has no tasks to decode");
  return out;
}

// Rebalancing ----------------------------------------------------------------

std::vector<std::size_t> random_oversample(const std::vector<std::string>& labels, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::size_t majority = 0;
  for (const auto& [c, idx] : by_class) majority = std::max(majority, idx.size());
  std::vector<std::size_t> out(labels.size());
  std::iota(out.begin(), out.end(), 0);
  Rng rng(seed);
  for (const auto& [c, idx] : by_class)
    for (std::size_t n = idx.size(); n < majority; ++n) out.push_back(idx[rng.index(idx.size())]);
  return out;
}

}  // namespace svassess::models
