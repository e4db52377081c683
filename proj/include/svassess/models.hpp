#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svassess/corpus.hpp"
#include "svassess/features.hpp"

namespace svassess::models {

using features::SparseMatrix;
using features::SparseVector;
using DenseMatrix = std::vector<std::vector<double>>;

enum class Kind { NaiveBayes, LogisticRegression, LinearSvm, Knn };
enum class KnnWeight { Uniform, Distance };

std::string kind_name(Kind kind);
Kind parse_kind(const std::string& name);

struct ClassifierSpec {
  Kind kind = Kind::NaiveBayes;
  double c = 1.0;
  int k = 5;
  KnnWeight weight = KnnWeight::Uniform;
  int p = 2;

  void validate() const;
  // Number of tuned hyperparameters, used as the simplicity tie-break.
  int hyperparameter_count() const;
  std::string describe() const;
  nlohmann::json to_json() const;
  static ClassifierSpec from_json(const nlohmann::json& j);
};

// Full grid for one kind: C in {0.01,0.1,1,10,100}; k in {5,11,31,51} x
// weight x p in {1,2}; naive Bayes has a single point.
std::vector<ClassifierSpec> default_grid(Kind kind);

struct SgdSettings {
  int epochs = 100;
  double learning_rate = 0.01;
};

class Classifier {
 public:
  Classifier() = default;

  const ClassifierSpec& spec() const { return spec_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t width() const { return width_; }

  // One score per label; higher wins. Naive Bayes scores are joint log
  // probabilities, linear kinds give margins, KNN gives vote mass.
  std::vector<double> scores(const SparseVector& x) const;
  std::size_t predict_index(const SparseVector& x) const;
  std::string predict(const SparseVector& x) const { return labels_[predict_index(x)]; }
  std::vector<std::string> predict_all(const SparseMatrix& xs) const;
  // Naive Bayes posterior; other kinds return the softmax of their scores.
  std::vector<double> probabilities(const SparseVector& x) const;

  nlohmann::json to_json() const;
  static Classifier from_json(const nlohmann::json& j);

 private:
  friend Classifier train_classifier(const ClassifierSpec&, const SparseMatrix&, const std::vector<std::string>&,
                                     std::uint64_t, const SgdSettings&);

  ClassifierSpec spec_;
  std::vector<std::string> labels_;
  std::size_t width_ = 0;
  std::uint64_t seed_ = 0;
  // naive Bayes
  std::vector<double> log_prior_;
  std::vector<std::vector<double>> log_likelihood_;
  // linear kinds
  std::vector<std::vector<double>> weights_;
  std::vector<double> bias_;
  // KNN
  SparseMatrix points_;
  std::vector<std::size_t> point_labels_;
};

// Labels are kept in lexicographic order; index ties resolve to the first.
Classifier train_classifier(const ClassifierSpec& spec, const SparseMatrix& x, const std::vector<std::string>& y,
                            std::uint64_t seed, const SgdSettings& sgd = {});

std::size_t argmax_first(const std::vector<double>& v);

// Clustering ---------------------------------------------------------------

struct KMeansModel {
  DenseMatrix centroids;
  std::vector<double> inertia_history;
  std::size_t iterations = 0;

  std::size_t nearest(const std::vector<double>& x) const;
  double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
  nlohmann::json to_json() const;
  static KMeansModel from_json(const nlohmann::json& j);
};

struct KMeansOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;
};

KMeansModel kmeans_fit(const DenseMatrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& opt = {});

double squared_distance(const std::vector<double>& a, const std::vector<double>& b);

struct UcvaModel {
  KMeansModel clustering;
  std::vector<std::string> tasks;
  // cluster -> task -> class -> count
  std::vector<std::map<std::string, std::map<std::string, std::size_t>>> table;
  corpus::Labels global_mode;

  nlohmann::json to_json() const;
  static UcvaModel from_json(const nlohmann::json& j);
};

UcvaModel ucva_fit(KMeansModel clustering, const DenseMatrix& x, const std::vector<corpus::Labels>& labels,
                   const std::vector<std::string>& tasks);
corpus::Labels ucva_assign(const UcvaModel& model, const std::vector<double>& x);

// Label concatenation ------------------------------------------------------

std::string xcva_encode(const corpus::Labels& labels, const std::vector<std::string>& tasks);
corpus::Labels xcva_decode(const std::string& encoded, const std::vector<std::string>& tasks);

// Rebalancing ----------------------------------------------------------------

// Indices of the rebalanced sample: every original index in order, followed by
// draws with replacement that lift each minority class to the majority count.
std::vector<std::size_t> random_oversample(const std::vector<std::string>& labels, std::uint64_t seed);

template <typename Row>
void random_oversample(std::vector<Row>& rows, std::vector<std::string>& labels, std::uint64_t seed) {
  auto idx = random_oversample(labels, seed);
  std::vector<Row> r;
  std::vector<std::string> l;
  r.reserve(idx.size());
  l.reserve(idx.size());
  for (auto i : idx) {
    r.push_back(rows[i]);
    l.push_back(labels[i]);
  }
  rows = std::move(r);
  labels = std::move(l);
}

}  // namespace svassess::models
