#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "svassess/features.hpp"

namespace svassess::reduce {

struct LsaModel {
  // width x k, orthonormal columns.
  Eigen::MatrixXd components;
  Eigen::VectorXd singular_values;

  std::size_t k() const { return static_cast<std::size_t>(components.cols()); }
  std::size_t width() const { return static_cast<std::size_t>(components.rows()); }

  nlohmann::json to_json() const;
  static LsaModel from_json(const nlohmann::json& j);
};

struct LsaOptions {
  int power_iterations = 10;
  int oversampling = 8;
  std::uint64_t seed = 0;
};

Eigen::MatrixXd to_dense(const features::SparseMatrix& rows);

// Truncated SVD by randomized range finding followed by a small dense SVD.
LsaModel lsa_fit(const features::SparseMatrix& rows, std::size_t k, const LsaOptions& options = {});
LsaModel lsa_fit(const Eigen::MatrixXd& a, std::size_t k, const LsaOptions& options = {});

std::vector<double> lsa_transform(const LsaModel& model, const features::SparseVector& x);
std::vector<double> lsa_transform(const LsaModel& model, const std::vector<double>& x);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  void add(const std::string& token, std::vector<double> vec);
  const std::vector<double>* find(const std::string& token) const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }

  // "token v1 v2 ... vL" per line.
  static EmbeddingTable load(const std::string& path);
  static EmbeddingTable parse(const std::string& text);

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

// Mean of the in-table token vectors; zeros when none are known.
std::vector<double> average_embedding(const EmbeddingTable& table, const std::vector<std::string>& tokens);

}  // namespace svassess::reduce
