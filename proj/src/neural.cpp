#include "svassess/neural.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "svassess/common.hpp"
#include "svassess/eval.hpp"

namespace svassess::neural {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using nlohmann::json;

void AcGruConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::InvalidArgument, "AC-GRU config: " + m); };
  if (vocab_size < 2) bad("vocab_size must be >= 2 (pad and unknown ids)");
  if (input_len < 1 || embed_dim < 1 || filters < 1 || gru_hidden < 1 || attention_hidden < 1 || task_hidden < 1 ||
      inputs < 1)
    bad("all dimensions must be >= 1");
  if (filter_sizes.empty()) bad("at least one filter size is required");
  for (int k : filter_sizes)
    if (k < 1 || k > input_len) bad("filter size " + std::to_string(k) + " must lie in [1, input_len]");
  if (tasks.empty()) bad("at least one task is required");
  for (const auto& t : tasks)
    if (t.classes < 2) bad("task '" + t.name + "' needs at least two classes");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (!(learning_rate > 0.0)) bad("learning rate must be positive");
  if (batch_size < 1 || epochs < 1 || patience < 0) bad("batch_size, epochs >= 1 and patience >= 0 required");
}

json AcGruConfig::to_json() const {
  json t = json::array();
  for (const auto& h : tasks) t.push_back({{"name", h.name}, {"classes", h.classes}});
  return {{"vocab_size", vocab_size},
          {"input_len", input_len},
          {"embed_dim", embed_dim},
          {"filter_sizes", filter_sizes},
          {"filters", filters},
          {"gru_hidden", gru_hidden},
          {"attention_hidden", attention_hidden},
          {"task_hidden", task_hidden},
          {"inputs", inputs},
          {"tasks", t},
          {"dropout", dropout},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"patience", patience},
          {"seed", seed}};
}

AcGruConfig AcGruConfig::from_json(const json& j) {
  AcGruConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.input_len = j.value("input_len", c.input_len);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.filter_sizes = j.value("filter_sizes", c.filter_sizes);
  c.filters = j.value("filters", c.filters);
  c.gru_hidden = j.value("gru_hidden", c.gru_hidden);
  c.attention_hidden = j.value("attention_hidden", c.attention_hidden);
  c.task_hidden = j.value("task_hidden", c.task_hidden);
  c.inputs = j.value("inputs", c.inputs);
  if (j.contains("tasks"))
    for (const auto& t : j.at("tasks")) c.tasks.push_back({t.at("name").get<std::string>(), t.at("classes").get<int>()});
  c.dropout = j.value("dropout", c.dropout);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// Parameters -------------------------------------------------------------------

namespace {

std::atomic<std::uint64_t> g_next_instance{1};

// Fixed block order: embedding, then per filter size 14 blocks, then per task 4.
constexpr std::size_t kPerSize = 14;
enum SizeBlock { ConvW, ConvB, Wz, Wr, Wh, Uz, Ur, Uh, Bz, Br, Bh, Wa, Ba, Ws };
enum TaskBlock { TaskW, TaskB, HeadW, HeadB };

std::size_t size_block(std::size_t s, SizeBlock b) { return 1 + s * kPerSize + b; }
std::size_t task_block(const AcGruConfig& c, std::size_t t, TaskBlock b) {
  return 1 + c.filter_sizes.size() * kPerSize + t * 4 + b;
}

MatrixXd glorot(Rng& rng, int rows, int cols, int fan_in, int fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-limit, limit);
  return m;
}

}  // namespace

void Parameters::add(const std::string& name, MatrixXd m) {
  index_[name] = blocks_.size();
  names_.push_back(name);
  blocks_.push_back(std::move(m));
}

Parameters::Parameters(const AcGruConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  instance_ = g_next_instance.fetch_add(1);
  Rng rng(seed);
  const int L = config.embed_dim, F = config.filters, H = config.gru_hidden, A = config.attention_hidden;
  MatrixXd emb(config.vocab_size, L);
  for (int r = 0; r < emb.rows(); ++r)
    for (int c = 0; c < L; ++c) emb(r, c) = rng.uniform(-0.05, 0.05);
  add("embedding", std::move(emb));
  for (int k : config.filter_sizes) {
    const std::string p = std::to_string(k);
    add("conv" + p + ".W", glorot(rng, k * L, F, k * L, F));
    add("conv" + p + ".b", MatrixXd::Zero(1, F));
    for (const char* g : {"Wz", "Wr", "Wh"}) add("gru" + p + "." + g, glorot(rng, F, H, F, H));
    for (const char* g : {"Uz", "Ur", "Uh"}) add("gru" + p + "." + g, glorot(rng, H, H, H, H));
    for (const char* g : {"bz", "br", "bh"}) add("gru" + p + "." + g, MatrixXd::Zero(1, H));
    add("att" + p + ".Wa", glorot(rng, H, A, H, A));
    add("att" + p + ".ba", MatrixXd::Zero(1, A));
    add("att" + p + ".Ws", glorot(rng, 1, A, A, 1));
  }
  const int D = config.commit_width(), T = config.task_hidden;
  for (const auto& t : config.tasks) {
    add("task." + t.name + ".W", glorot(rng, D, T, D, T));
    add("task." + t.name + ".b", MatrixXd::Zero(1, T));
    add("head." + t.name + ".W", glorot(rng, T, t.classes, T, t.classes));
    add("head." + t.name + ".b", MatrixXd::Zero(1, t.classes));
  }
}

Parameters::Parameters(const Parameters& other)
    : config_(other.config_),
      names_(other.names_),
      blocks_(other.blocks_),
      index_(other.index_),
      instance_(g_next_instance.fetch_add(1)),
      version_(0) {}

Parameters& Parameters::operator=(const Parameters& other) {
  if (this != &other) {
    config_ = other.config_;
    names_ = other.names_;
    blocks_ = other.blocks_;
    index_ = other.index_;
    instance_ = g_next_instance.fetch_add(1);
    version_ = 0;
  }
  return *this;
}

std::size_t Parameters::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::InvalidArgument, "no parameter block named '" + name + "'");
  return it->second;
}

MatrixXd& Parameters::mutable_block(std::size_t i) {
  ++version_;
  return blocks_.at(i);
}

std::size_t Parameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.size());
  return n;
}

json Parameters::to_json() const {
  json blocks = json::array();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(b.size()));
    for (Eigen::Index r = 0; r < b.rows(); ++r)
      for (Eigen::Index c = 0; c < b.cols(); ++c) data.push_back(b(r, c));
    blocks.push_back({{"name", names_[i]}, {"rows", b.rows()}, {"cols", b.cols()}, {"data", data}});
  }
  return {{"format", "acgru-parameters"}, {"version", 1}, {"config", config_.to_json()}, {"blocks", blocks}};
}

Parameters Parameters::from_json(const json& j) {
  if (j.value("format", std::string()) != "acgru-parameters" || j.value("version", 0) != 1)
    fail(ErrorKind::Schema, "not a version-1 AC-GRU parameter bundle");
  Parameters p(AcGruConfig::from_json(j.at("config")), 0);
  for (const auto& b : j.at("blocks")) {
    const auto i = p.index_of(b.at("name").get<std::string>());
    auto& m = p.blocks_[i];
    const auto rows = b.at("rows").get<Eigen::Index>(), cols = b.at("cols").get<Eigen::Index>();
    const auto data = b.at("data").get<std::vector<double>>();
    if (rows != m.rows() || cols != m.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols)
      fail(ErrorKind::Schema, "parameter block '" + p.names_[i] + "' has the wrong shape");
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return p;
}

Gradients zero_gradients(const Parameters& p) {
  Gradients g;
  for (std::size_t i = 0; i < p.size(); ++i) g.push_back(MatrixXd::Zero(p.block(i).rows(), p.block(i).cols()));
  return g;
}

// Forward ----------------------------------------------------------------------

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RowVectorXd dropout_mask(Rng& rng, Eigen::Index n, double rate, bool train) {
  RowVectorXd m = RowVectorXd::Ones(n);
  if (!train || rate <= 0.0) return m;
  const double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < n; ++i) m(i) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return m;
}

SequenceCache run_sequence(const Parameters& p, std::size_t s, const MatrixXd& emb_rows) {
  const auto& cfg = p.config();
  const int K = cfg.filter_sizes[s];
  const int L = cfg.embed_dim;
  const int N = static_cast<int>(emb_rows.rows());
  const int m = N - K + 1;
  const int H = cfg.gru_hidden;
  SequenceCache c;
  c.windows.resize(m, K * L);
  for (int t = 0; t < m; ++t)
    for (int k = 0; k < K; ++k) c.windows.block(t, k * L, 1, L) = emb_rows.row(t + k);
  c.conv = (c.windows * p.block(size_block(s, ConvW))).rowwise() + p.block(size_block(s, ConvB)).row(0);
  c.conv = c.conv.cwiseMax(0.0);

  const MatrixXd& wz = p.block(size_block(s, Wz));
  const MatrixXd& wr = p.block(size_block(s, Wr));
  const MatrixXd& wh = p.block(size_block(s, Wh));
  const MatrixXd& uz = p.block(size_block(s, Uz));
  const MatrixXd& ur = p.block(size_block(s, Ur));
  const MatrixXd& uh = p.block(size_block(s, Uh));
  const RowVectorXd bz = p.block(size_block(s, Bz)).row(0);
  const RowVectorXd br = p.block(size_block(s, Br)).row(0);
  const RowVectorXd bh = p.block(size_block(s, Bh)).row(0);
  c.h = MatrixXd::Zero(m + 1, H);
  c.z.resize(m, H);
  c.r.resize(m, H);
  c.hhat.resize(m, H);
  for (int t = 0; t < m; ++t) {
    const RowVectorXd x = c.conv.row(t);
    const RowVectorXd hp = c.h.row(t);
    const RowVectorXd z = (x * wz + hp * uz + bz).unaryExpr(&sigmoid);
    const RowVectorXd r = (x * wr + hp * ur + br).unaryExpr(&sigmoid);
    const RowVectorXd hh = (x * wh + r.cwiseProduct(hp) * uh + bh).array().tanh().matrix();
    c.z.row(t) = z;
    c.r.row(t) = r;
    c.hhat.row(t) = hh;
    c.h.row(t + 1) = (RowVectorXd::Ones(H) - z).cwiseProduct(hp) + z.cwiseProduct(hh);
  }

  const MatrixXd hs = c.h.bottomRows(m);
  c.u = ((hs * p.block(size_block(s, Wa))).rowwise() + p.block(size_block(s, Ba)).row(0)).array().tanh().matrix();
  const Eigen::VectorXd e = c.u * p.block(size_block(s, Ws)).row(0).transpose();
  const double mx = e.maxCoeff();
  Eigen::VectorXd w = (e.array() - mx).exp().matrix();
  w /= w.sum();
  c.weights = w.transpose();
  c.out = c.weights * hs;
  return c;
}

}  // namespace

RowVectorXd softmax(const RowVectorXd& logits) {
  const double mx = logits.maxCoeff();
  RowVectorXd e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

ForwardResult forward(const Parameters& p, const Sample& x, bool train_mode, std::uint64_t dropout_seed) {
  const auto& cfg = p.config();
  if (static_cast<int>(x.inputs.size()) != cfg.inputs)
    fail(ErrorKind::InvalidArgument, "expected " + std::to_string(cfg.inputs) + " input sequences");
  ForwardResult out;
  auto& cache = out.cache;
  cache.instance = p.instance();
  cache.version = p.version();
  cache.inputs = x.inputs;
  const MatrixXd& emb = p.block(0);
  const int H = cfg.gru_hidden;
  const std::size_t S = cfg.filter_sizes.size();
  cache.commit.resize(cfg.commit_width());
  cache.seq.resize(x.inputs.size());
  for (std::size_t in = 0; in < x.inputs.size(); ++in) {
    const auto& ids = x.inputs[in];
    if (static_cast<int>(ids.size()) != cfg.input_len)
      fail(ErrorKind::InvalidArgument, "input " + std::to_string(in) + " has length " + std::to_string(ids.size()) +
                                           ", expected " + std::to_string(cfg.input_len));
    MatrixXd rows(cfg.input_len, cfg.embed_dim);
    for (int t = 0; t < cfg.input_len; ++t) {
      if (ids[t] < 0 || ids[t] >= cfg.vocab_size)
        fail(ErrorKind::InvalidArgument, "token id " + std::to_string(ids[t]) + " outside vocabulary of " +
                                             std::to_string(cfg.vocab_size));
      rows.row(t) = emb.row(ids[t]);
    }
    for (std::size_t s = 0; s < S; ++s) {
      cache.seq[in].push_back(run_sequence(p, s, rows));
      cache.commit.segment(static_cast<Eigen::Index>((in * S + s) * H), H) = cache.seq[in][s].out;
    }
  }
  Rng rng(dropout_seed);
  cache.commit_mask = dropout_mask(rng, cache.commit.size(), cfg.dropout, train_mode);
  cache.commit_dropped = cache.commit.cwiseProduct(cache.commit_mask);
  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    RowVectorXd pre = cache.commit_dropped * p.block(task_block(cfg, t, TaskW)) + p.block(task_block(cfg, t, TaskB)).row(0);
    RowVectorXd mask = dropout_mask(rng, pre.size(), cfg.dropout, train_mode);
    RowVectorXd act = pre.cwiseMax(0.0).cwiseProduct(mask);
    RowVectorXd logits = act * p.block(task_block(cfg, t, HeadW)) + p.block(task_block(cfg, t, HeadB)).row(0);
    cache.task_pre.push_back(std::move(pre));
    cache.task_mask.push_back(std::move(mask));
    cache.task_out.push_back(std::move(act));
    out.probs.push_back(softmax(logits));
    out.logits.push_back(std::move(logits));
  }
  return out;
}

double multitask_loss(const std::vector<RowVectorXd>& probs, const std::vector<int>& gold) {
  if (probs.size() != gold.size()) fail(ErrorKind::InvalidArgument, "one gold label per task is required");
  double loss = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (gold[t] < 0 || gold[t] >= probs[t].size())
      fail(ErrorKind::InvalidArgument, "gold label out of range for task " + std::to_string(t));
    double pr = probs[t](gold[t]);
    if (pr < 1e-12) {
      spdlog::warn("multitask_loss: probability {} at the gold label clamped to 1e-12", pr);
      pr = 1e-12;
    }
    loss -= std::log(pr);
  }
  return loss;
}

// Backward ---------------------------------------------------------------------

namespace {

void backward_sequence(const Parameters& p, std::size_t s, const SequenceCache& c, const RowVectorXd& dout,
                       const std::vector<int>& ids, Gradients& g) {
  const auto& cfg = p.config();
  const int K = cfg.filter_sizes[s];
  const int L = cfg.embed_dim;
  const int H = cfg.gru_hidden;
  const auto m = c.conv.rows();
  const MatrixXd hs = c.h.bottomRows(m);

  // Attention.
  MatrixXd dh = c.weights.transpose() * dout;  // m x H
  const Eigen::VectorXd dw = hs * dout.transpose();
  const double wdw = c.weights.dot(dw.transpose());
  const Eigen::VectorXd de = c.weights.transpose().cwiseProduct(dw - Eigen::VectorXd::Constant(m, wdw));
  const RowVectorXd ws = p.block(size_block(s, Ws)).row(0);
  g[size_block(s, Ws)].row(0) += de.transpose() * c.u;
  const MatrixXd dpre = (de * ws).cwiseProduct((1.0 - c.u.array().square()).matrix());
  g[size_block(s, Wa)] += hs.transpose() * dpre;
  g[size_block(s, Ba)].row(0) += dpre.colwise().sum();
  dh += dpre * p.block(size_block(s, Wa)).transpose();

  // GRU through time.
  const MatrixXd& wz = p.block(size_block(s, Wz));
  const MatrixXd& wr = p.block(size_block(s, Wr));
  const MatrixXd& wh = p.block(size_block(s, Wh));
  const MatrixXd& uz = p.block(size_block(s, Uz));
  const MatrixXd& ur = p.block(size_block(s, Ur));
  const MatrixXd& uh = p.block(size_block(s, Uh));
  MatrixXd dconv = MatrixXd::Zero(m, cfg.filters);
  RowVectorXd carry = RowVectorXd::Zero(H);
  for (Eigen::Index t = m - 1; t >= 0; --t) {
    const RowVectorXd dht = dh.row(t) + carry;
    const RowVectorXd hp = c.h.row(t);
    const RowVectorXd z = c.z.row(t), r = c.r.row(t), hh = c.hhat.row(t);
    const RowVectorXd x = c.conv.row(t);
    const RowVectorXd dz = dht.cwiseProduct(hh - hp);
    const RowVectorXd dhh = dht.cwiseProduct(z);
    RowVectorXd dhp = dht.cwiseProduct(RowVectorXd::Ones(H) - z);
    const RowVectorXd dah = dhh.cwiseProduct((1.0 - hh.array().square()).matrix());
    const RowVectorXd rh = r.cwiseProduct(hp);
    g[size_block(s, Wh)] += x.transpose() * dah;
    g[size_block(s, Uh)] += rh.transpose() * dah;
    g[size_block(s, Bh)].row(0) += dah;
    const RowVectorXd drh = dah * uh.transpose();
    const RowVectorXd dr = drh.cwiseProduct(hp);
    dhp += drh.cwiseProduct(r);
    const RowVectorXd dar = dr.cwiseProduct(r.cwiseProduct(RowVectorXd::Ones(H) - r));
    const RowVectorXd daz = dz.cwiseProduct(z.cwiseProduct(RowVectorXd::Ones(H) - z));
    g[size_block(s, Wr)] += x.transpose() * dar;
    g[size_block(s, Ur)] += hp.transpose() * dar;
    g[size_block(s, Br)].row(0) += dar;
    g[size_block(s, Wz)] += x.transpose() * daz;
    g[size_block(s, Uz)] += hp.transpose() * daz;
    g[size_block(s, Bz)].row(0) += daz;
    dhp += dar * ur.transpose() + daz * uz.transpose();
    dconv.row(t) = dah * wh.transpose() + dar * wr.transpose() + daz * wz.transpose();
    carry = dhp;
  }

  // Convolution and embedding.
  const MatrixXd dact = dconv.cwiseProduct((c.conv.array() > 0.0).cast<double>().matrix());
  g[size_block(s, ConvW)] += c.windows.transpose() * dact;
  g[size_block(s, ConvB)].row(0) += dact.colwise().sum();
  const MatrixXd dwin = dact * p.block(size_block(s, ConvW)).transpose();
  for (Eigen::Index t = 0; t < m; ++t)
    for (int k = 0; k < K; ++k) g[0].row(ids[static_cast<std::size_t>(t + k)]) += dwin.block(t, k * L, 1, L);
}

}  // namespace

namespace {

void accumulate_backward(const Parameters& p, const ForwardResult& fwd, const std::vector<int>& gold, Gradients& g) {
  const auto& cache = fwd.cache;
  if (cache.instance != p.instance() || cache.version != p.version())
    fail(ErrorKind::InvalidArgument, "stale forward cache: parameters changed since the forward pass");
  const auto& cfg = p.config();
  if (gold.size() != cfg.tasks.size()) fail(ErrorKind::InvalidArgument, "one gold label per task is required");
  RowVectorXd dcommit = RowVectorXd::Zero(cache.commit.size());
  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    RowVectorXd dlogits = fwd.probs[t];
    dlogits(gold[t]) -= 1.0;
    g[task_block(cfg, t, HeadW)] += cache.task_out[t].transpose() * dlogits;
    g[task_block(cfg, t, HeadB)].row(0) += dlogits;
    const RowVectorXd dact = dlogits * p.block(task_block(cfg, t, HeadW)).transpose();
    const RowVectorXd dpre =
        dact.cwiseProduct(cache.task_mask[t]).cwiseProduct((cache.task_pre[t].array() > 0.0).cast<double>().matrix());
    g[task_block(cfg, t, TaskW)] += cache.commit_dropped.transpose() * dpre;
    g[task_block(cfg, t, TaskB)].row(0) += dpre;
    dcommit += dpre * p.block(task_block(cfg, t, TaskW)).transpose();
  }
  dcommit = dcommit.cwiseProduct(cache.commit_mask);
  const int H = cfg.gru_hidden;
  const std::size_t S = cfg.filter_sizes.size();
  for (std::size_t in = 0; in < cache.seq.size(); ++in)
    for (std::size_t s = 0; s < S; ++s)
      backward_sequence(p, s, cache.seq[in][s], dcommit.segment(static_cast<Eigen::Index>((in * S + s) * H), H),
                        cache.inputs[in], g);
}

}  // namespace

Gradients backward(const Parameters& p, const ForwardResult& fwd, const std::vector<int>& gold) {
  Gradients g = zero_gradients(p);
  accumulate_backward(p, fwd, gold, g);
  return g;
}

void adam_step(Parameters& p, const Gradients& g, AdamState& st, double lr, double beta1, double beta2, double eps) {
  if (g.size() != p.size()) fail(ErrorKind::InvalidArgument, "gradient layout does not match parameters");
  if (st.m.empty()) {
    st.m = zero_gradients(p);
    st.v = zero_gradients(p);
    st.t = 0;
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g[i];
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g[i].cwiseProduct(g[i]);
    MatrixXd& w = p.mutable_block(i);
    w.array() -= lr * (st.m[i].array() / c1) / ((st.v[i].array() / c2).sqrt() + eps);
  }
}

// Gradient check ---------------------------------------------------------------

std::vector<BlockCheck> gradient_check(const Parameters& p, const Sample& x, double h) {
  Parameters work = p;
  const auto fwd = forward(work, x, false);
  const Gradients analytic = backward(work, fwd, x.labels);
  std::vector<BlockCheck> out;
  for (std::size_t b = 0; b < work.size(); ++b) {
    BlockCheck bc;
    bc.name = work.name(b);
    const auto rows = work.block(b).rows(), cols = work.block(b).cols();
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        const double orig = work.block(b)(r, c);
        work.mutable_block(b)(r, c) = orig + h;
        const double lp = multitask_loss(forward(work, x, false).probs, x.labels);
        work.mutable_block(b)(r, c) = orig - h;
        const double lm = multitask_loss(forward(work, x, false).probs, x.labels);
        work.mutable_block(b)(r, c) = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        const double a = analytic[b](r, c);
        const double abs_err = std::abs(a - numeric);
        // Entries whose true gradient is below the difference quotient's
        // rounding floor are judged on absolute error only.
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
        bc.max_abs_error = std::max(bc.max_abs_error, abs_err);
        bc.max_rel_error = std::max(bc.max_rel_error, abs_err / denom);
        ++bc.entries;
      }
    out.push_back(bc);
  }
  return out;
}

// Training -----------------------------------------------------------------------

namespace {

int argmax_first(const RowVectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

double mean_mcc(const Parameters& p, const std::vector<Sample>& data) {
  const auto& cfg = p.config();
  std::vector<std::vector<std::vector<std::size_t>>> conf;
  for (const auto& t : cfg.tasks)
    conf.emplace_back(static_cast<std::size_t>(t.classes), std::vector<std::size_t>(static_cast<std::size_t>(t.classes), 0));
  for (const auto& x : data) {
    const auto pred = predict_acgru(p, x);
    for (std::size_t t = 0; t < cfg.tasks.size(); ++t)
      ++conf[t][static_cast<std::size_t>(x.labels[t])][static_cast<std::size_t>(pred.classes[t])];
  }
  double sum = 0.0;
  for (const auto& c : conf) sum += eval::mcc_from_confusion(c);
  return sum / static_cast<double>(conf.size());
}

}  // namespace

Prediction predict_acgru(const Parameters& p, const Sample& x) {
  auto fwd = forward(p, x, false);
  Prediction pr;
  for (auto& prob : fwd.probs) {
    pr.classes.push_back(argmax_first(prob));
    pr.probs.push_back(std::move(prob));
  }
  return pr;
}

TrainResult train_acgru(const AcGruConfig& config, const std::vector<Sample>& train,
                        const std::vector<Sample>& validation) {
  config.validate();
  if (train.empty()) fail(ErrorKind::InvalidArgument, "AC-GRU training needs at least one sample");
  for (const auto& s : train)
    if (s.labels.size() != config.tasks.size())
      fail(ErrorKind::InvalidArgument, "every training sample needs one label per task");
  Parameters params(config, mix_seed(config.seed, 0));
  AdamState state;
  Rng order_rng(mix_seed(config.seed, 1));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& monitor = validation.empty() ? train : validation;

  TrainResult result;
  result.best = params;
  double best_mcc = -std::numeric_limits<double>::infinity();
  int wait = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    const std::uint64_t epoch_seed = mix_seed(config.seed, 2 + static_cast<std::uint64_t>(epoch));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      Gradients acc = zero_gradients(params);
      for (std::size_t pos = start; pos < end; ++pos) {
        const Sample& s = train[order[pos]];
        const auto fwd = forward(params, s, true, mix_seed(epoch_seed, pos));
        loss_sum += multitask_loss(fwd.probs, s.labels);
        accumulate_backward(params, fwd, s.labels, acc);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& g : acc) g *= scale;
      adam_step(params, acc, state, config.learning_rate);
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.val_mcc = mean_mcc(params, monitor);
    result.history.push_back(rec);
    spdlog::debug("epoch {} loss {:.6f} val_mcc {:.4f}", rec.epoch, rec.train_loss, rec.val_mcc);
    if (rec.val_mcc > best_mcc) {
      best_mcc = rec.val_mcc;
      result.best = params;
      result.best_epoch = rec.epoch;
      wait = 0;
    } else if (++wait >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

std::string TrainResult::history_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "epoch,train_loss,val_mcc\n";
  for (const auto& r : history) os << r.epoch << ',' << r.train_loss << ',' << r.val_mcc << '\n';
  return os.str();
}

// Token ids ----------------------------------------------------------------------

TokenIndex::TokenIndex(const std::vector<std::vector<std::string>>& docs, int vocab_size) {
  if (vocab_size < 2) fail(ErrorKind::InvalidArgument, "token vocabulary needs room for pad and unknown ids");
  std::map<std::string, std::size_t> counts;
  for (const auto& d : docs)
    for (const auto& t : d) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(vocab_size - 2));
  for (std::size_t i = 0; i < keep; ++i) {
    ids_[ranked[i].first] = static_cast<int>(i) + 2;
    tokens_.push_back(ranked[i].first);
  }
}

int TokenIndex::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? 1 : it->second;
}

std::vector<int> TokenIndex::encode(const std::vector<std::string>& tokens, int length) const {
  std::vector<int> out(static_cast<std::size_t>(length), 0);
  for (std::size_t i = 0; i < tokens.size() && i < out.size(); ++i) out[i] = id(tokens[i]);
  return out;
}

json TokenIndex::to_json() const { return {{"tokens", tokens_}}; }

TokenIndex TokenIndex::from_json(const json& j) {
  TokenIndex t;
  t.tokens_ = j.at("tokens").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < t.tokens_.size(); ++i) t.ids_[t.tokens_[i]] = static_cast<int>(i) + 2;
  return t;
}

}  // namespace svassess::neural
