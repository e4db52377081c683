#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace svassess::neural {

struct TaskHead {
  std::string name;
  int classes = 2;
};

struct AcGruConfig {
  int vocab_size = 10000;
  int input_len = 1024;
  int embed_dim = 300;
  std::vector<int> filter_sizes{1, 3, 5};
  int filters = 128;
  int gru_hidden = 128;
  int attention_hidden = 128;
  int task_hidden = 128;
  int inputs = 4;
  std::vector<TaskHead> tasks;
  double dropout = 0.2;
  double learning_rate = 0.001;
  int batch_size = 32;
  int epochs = 50;
  int patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
  int commit_width() const { return inputs * static_cast<int>(filter_sizes.size()) * gru_hidden; }
  nlohmann::json to_json() const;
  static AcGruConfig from_json(const nlohmann::json& j);
};

// Named parameter blocks. The instance id and version let backward() reject a
// cache produced by other or since-modified parameters.
class Parameters {
 public:
  Parameters() = default;
  Parameters(const AcGruConfig& config, std::uint64_t seed);
  Parameters(const Parameters& other);
  Parameters& operator=(const Parameters& other);

  const AcGruConfig& config() const { return config_; }
  std::size_t size() const { return blocks_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::size_t index_of(const std::string& name) const;
  const Eigen::MatrixXd& block(std::size_t i) const { return blocks_[i]; }
  const Eigen::MatrixXd& block(const std::string& name) const { return blocks_[index_of(name)]; }
  Eigen::MatrixXd& mutable_block(std::size_t i);
  Eigen::MatrixXd& mutable_block(const std::string& name) { return mutable_block(index_of(name)); }
  std::size_t parameter_count() const;

  std::uint64_t instance() const { return instance_; }
  std::uint64_t version() const { return version_; }

  nlohmann::json to_json() const;
  static Parameters from_json(const nlohmann::json& j);

 private:
  void add(const std::string& name, Eigen::MatrixXd m);

  AcGruConfig config_;
  std::vector<std::string> names_;
  std::vector<Eigen::MatrixXd> blocks_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t instance_ = 0;
  std::uint64_t version_ = 0;
};

// Gradients share the block layout of Parameters.
using Gradients = std::vector<Eigen::MatrixXd>;

Gradients zero_gradients(const Parameters& p);

struct Sample {
  // config.inputs token-id sequences of length config.input_len; pad id 0.
  std::vector<std::vector<int>> inputs;
  // Gold class index per task.
  std::vector<int> labels;
};

struct SequenceCache {
  Eigen::MatrixXd windows;   // (N-K+1) x K*L
  Eigen::MatrixXd conv;      // post-ReLU, (N-K+1) x F
  Eigen::MatrixXd h;         // (m+1) x H, row 0 is h_0
  Eigen::MatrixXd z, r, hhat;
  Eigen::MatrixXd u;         // m x A, tanh(W_a h + b_a)
  Eigen::RowVectorXd weights;
  Eigen::RowVectorXd out;
};

struct ForwardCache {
  std::uint64_t instance = 0;
  std::uint64_t version = 0;
  std::vector<std::vector<int>> inputs;
  // [input][size]
  std::vector<std::vector<SequenceCache>> seq;
  Eigen::RowVectorXd commit;
  Eigen::RowVectorXd commit_mask;  // scaled keep mask, ones in eval mode
  Eigen::RowVectorXd commit_dropped;
  std::vector<Eigen::RowVectorXd> task_pre;
  std::vector<Eigen::RowVectorXd> task_mask;
  std::vector<Eigen::RowVectorXd> task_out;
};

struct ForwardResult {
  std::vector<Eigen::RowVectorXd> logits;
  std::vector<Eigen::RowVectorXd> probs;
  ForwardCache cache;
};

ForwardResult forward(const Parameters& p, const Sample& x, bool train_mode, std::uint64_t dropout_seed = 0);

Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& logits);

// Sum over tasks of -ln p[y], with p[y] clamped at 1e-12.
double multitask_loss(const std::vector<Eigen::RowVectorXd>& probs, const std::vector<int>& gold);

Gradients backward(const Parameters& p, const ForwardResult& fwd, const std::vector<int>& gold);

struct AdamState {
  Gradients m;
  Gradients v;
  long t = 0;
};

void adam_step(Parameters& p, const Gradients& g, AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// Gradient check ----------------------------------------------------------------

struct BlockCheck {
  std::string name;
  std::size_t entries = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

// Central differences on the eval-mode loss for every entry of every block.
std::vector<BlockCheck> gradient_check(const Parameters& p, const Sample& x, double h = 1e-5);

// Training ---------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_mcc = 0.0;
};

struct TrainResult {
  Parameters best;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  bool stopped_early = false;

  std::string history_csv() const;
};

TrainResult train_acgru(const AcGruConfig& config, const std::vector<Sample>& train,
                        const std::vector<Sample>& validation);

struct Prediction {
  std::vector<int> classes;
  std::vector<Eigen::RowVectorXd> probs;
};

Prediction predict_acgru(const Parameters& p, const Sample& x);

// Token ids ----------------------------------------------------------------------

// Id 0 pads, id 1 stands for unknown tokens; the rest go to the most frequent
// tokens, count ties in lexicographic order.
class TokenIndex {
 public:
  TokenIndex() = default;
  TokenIndex(const std::vector<std::vector<std::string>>& docs, int vocab_size);

  int id(const std::string& token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens, int length) const;
  int size() const { return static_cast<int>(tokens_.size()) + 2; }
  nlohmann::json to_json() const;
  static TokenIndex from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

}  // namespace svassess::neural
