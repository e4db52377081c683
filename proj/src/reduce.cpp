#include "svassess/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "svassess/common.hpp"

namespace svassess::reduce {

using nlohmann::json;

Eigen::MatrixXd to_dense(const features::SparseMatrix& rows) {
  if (rows.empty()) fail(ErrorKind::InvalidArgument, "LSA needs at least one row");
  const auto width = rows.front().width();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].width() != width) fail(ErrorKind::InvalidArgument, "LSA rows differ in width");
    for (const auto& [c, v] : rows[r].entries()) a(static_cast<Eigen::Index>(r), c) = v;
  }
  return a;
}

LsaModel lsa_fit(const features::SparseMatrix& rows, std::size_t k, const LsaOptions& options) {
  return lsa_fit(to_dense(rows), k, options);
}

namespace {

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace

LsaModel lsa_fit(const Eigen::MatrixXd& a, std::size_t k, const LsaOptions& options) {
  const auto m = static_cast<std::size_t>(a.rows());
  const auto n = static_cast<std::size_t>(a.cols());
  if (m == 0 || n == 0) fail(ErrorKind::InvalidArgument, "LSA needs a non-empty matrix");
  if (k < 1) fail(ErrorKind::InvalidArgument, "LSA target dimension must be >= 1");
  if (k > std::min(m, n))
    fail(ErrorKind::InvalidArgument, "LSA target dimension " + std::to_string(k) + " exceeds min(rows, width) = " +
                                         std::to_string(std::min(m, n)));
  if (!a.allFinite()) fail(ErrorKind::InvalidArgument, "LSA input has non-finite entries");

  const auto l = static_cast<Eigen::Index>(std::min(k + static_cast<std::size_t>(std::max(options.oversampling, 0)),
                                                    std::min(m, n)));
  Rng rng(options.seed);
  Eigen::MatrixXd omega(a.cols(), l);
  for (Eigen::Index j = 0; j < l; ++j)
    for (Eigen::Index i = 0; i < a.cols(); ++i) omega(i, j) = rng.normal();

  Eigen::MatrixXd q = orthonormal_basis(a * omega);
  for (int it = 0; it < options.power_iterations; ++it) {
    Eigen::MatrixXd z = orthonormal_basis(a.transpose() * q);
    q = orthonormal_basis(a * z);
  }
  Eigen::MatrixXd b = q.transpose() * a;  // l x n
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinV);
  LsaModel model;
  model.components = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
  model.singular_values = svd.singularValues().head(static_cast<Eigen::Index>(k));
  // Fix each column's sign so the largest-magnitude entry is positive.
  for (Eigen::Index j = 0; j < model.components.cols(); ++j) {
    Eigen::Index idx = 0;
    model.components.col(j).cwiseAbs().maxCoeff(&idx);
    if (model.components(idx, j) < 0) model.components.col(j) *= -1.0;
  }
  return model;
}

std::vector<double> lsa_transform(const LsaModel& model, const features::SparseVector& x) {
  if (x.width() != model.width())
    fail(ErrorKind::InvalidArgument, "LSA transform: width " + std::to_string(x.width()) + " != model width " +
                                         std::to_string(model.width()));
  std::vector<double> out(model.k(), 0.0);
  for (const auto& [i, v] : x.entries())
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += v * model.components(i, static_cast<Eigen::Index>(j));
  return out;
}

std::vector<double> lsa_transform(const LsaModel& model, const std::vector<double>& x) {
  return lsa_transform(model, features::SparseVector::from_dense(x));
}

json LsaModel::to_json() const {
  json comps = json::array();
  for (Eigen::Index r = 0; r < components.rows(); ++r) {
    std::vector<double> row(components.cols());
    for (Eigen::Index c = 0; c < components.cols(); ++c) row[c] = components(r, c);
    comps.push_back(row);
  }
  return {{"components", comps},
          {"singular_values", std::vector<double>(singular_values.data(), singular_values.data() + singular_values.size())}};
}

LsaModel LsaModel::from_json(const json& j) {
  LsaModel m;
  auto rows = j.at("components").get<std::vector<std::vector<double>>>();
  auto sv = j.at("singular_values").get<std::vector<double>>();
  m.components.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(sv.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != sv.size()) fail(ErrorKind::Schema, "LSA model: ragged component rows");
    for (std::size_t c = 0; c < sv.size(); ++c) m.components(r, c) = rows[r][c];
  }
  m.singular_values = Eigen::Map<Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
  return m;
}

// Embeddings ---------------------------------------------------------------

void EmbeddingTable::add(const std::string& token, std::vector<double> vec) {
  if (table_.empty() && dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_)
    fail(ErrorKind::InvalidArgument, "embedding for '" + token + "' has length " + std::to_string(vec.size()) +
                                         ", expected " + std::to_string(dim_));
  for (double v : vec)
    if (!std::isfinite(v)) fail(ErrorKind::InvalidArgument, "embedding for '" + token + "' is not finite");
  table_[token] = std::move(vec);
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  auto it = table_.find(token);
  return it == table_.end() ? nullptr : &it->second;
}

EmbeddingTable EmbeddingTable::parse(const std::string& text) {
  EmbeddingTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto parts = split_whitespace(line);
    if (parts.empty()) continue;
    if (parts.size() < 2) fail(ErrorKind::Parse, "embedding line " + std::to_string(lineno) + ": no vector");
    std::vector<double> v;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      try {
        v.push_back(std::stod(parts[i]));
      } catch (const std::exception&) {
        fail(ErrorKind::Parse, "embedding line " + std::to_string(lineno) + ": bad number '" + parts[i] + "'");
      }
    }
    t.add(parts[0], std::move(v));
  }
  return t;
}

EmbeddingTable EmbeddingTable::load(const std::string& path) { return parse(read_file(path)); }

std::vector<double> average_embedding(const EmbeddingTable& table, const std::vector<std::string>& tokens) {
  std::vector<double> sum(table.dim(), 0.0);
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    if (const auto* v = table.find(t)) {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
      ++hits;
    }
  }
  if (hits > 0)
    for (auto& s : sum) s /= static_cast<double>(hits);
  return sum;
}

}  // namespace svassess::reduce
