#include "svassess/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "svassess/common.hpp"
#include "svassess/corpus.hpp"
#include "svassess/drift.hpp"
#include "svassess/eval.hpp"
#include "svassess/features.hpp"
#include "svassess/models.hpp"
#include "svassess/neural.hpp"
#include "svassess/pumine.hpp"
#include "svassess/reduce.hpp"
#include "svassess/scopes.hpp"
#include "svassess/textprep.hpp"

namespace svassess::pipeline {

using nlohmann::json;
using features::SparseMatrix;
using features::SparseVector;
using features::TokenDoc;

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kSubcommands = {"ingest", "featurize", "train",   "evaluate", "assess",
                                               "drift",  "context",   "mine",    "gradcheck"};

const std::set<std::string> kConfigKeys = {
    "dataset",  "granularity", "tasks",    "nlp_configs", "features",   "models",       "grid",
    "protocol", "folds",       "policy",   "seed",        "workers",    "out",          "mode",
    "surrounding_n", "baseline", "rebalance", "neural",   "model",      "record",       "input",
    "split_year", "char_min",  "char_max", "keywords",    "filter",     "steps",        "alpha",
    "lsa_k",    "theta",       "kmeans_k", "use_training_time"};

// Settings ---------------------------------------------------------------------

struct Settings {
  std::string subcommand;
  std::string dataset;
  corpus::DatasetKind granularity = corpus::DatasetKind::Report;
  std::vector<std::string> tasks = corpus::cvss_tasks();
  std::vector<int> nlp_configs{1, 2};
  std::vector<std::string> feature_kinds;
  std::vector<models::ClassifierSpec> specs;
  eval::Protocol protocol = eval::Protocol::TimeKFold;
  std::size_t folds = 5;
  eval::Policy policy = eval::Policy::Ch3;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out = "out";
  scopes::ModeSpec mode;
  scopes::ContextConfig context;
  std::string baseline = "classical";
  bool rebalance = false;
  json neural = json::object();
  std::string model_path;
  json config;
  bool use_training_time = false;
};

template <typename T>
T get_as(const json& config, const char* key, T fallback) {
  auto it = config.find(key);
  if (it == config.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::InvalidArgument, std::string("config key '") + key + "' has the wrong type");
  }
}

Settings parse_settings(const std::string& subcommand, const json& config) {
  if (!config.is_object()) fail(ErrorKind::InvalidArgument, "config must be a JSON object");
  for (const auto& [key, value] : config.items())
    if (!kConfigKeys.count(key)) fail(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");

  Settings s;
  s.subcommand = subcommand;
  s.config = config;
  s.dataset = get_as<std::string>(config, "dataset", "");
  s.granularity = corpus::parse_dataset_kind(get_as<std::string>(config, "granularity", "report"));
  s.tasks = get_as<std::vector<std::string>>(config, "tasks", corpus::cvss_tasks());
  if (s.tasks.empty()) fail(ErrorKind::InvalidArgument, "at least one task is required");
  s.nlp_configs = get_as<std::vector<int>>(config, "nlp_configs", {1, 2});
  for (int n : s.nlp_configs) features::NlpConfig::table_config(n);

  using corpus::DatasetKind;
  const std::string default_protocol = s.granularity == DatasetKind::Function ? "rounds10"
                                       : s.granularity == DatasetKind::Commit ? "rounds12"
                                                                               : "time_kfold";
  s.protocol = eval::parse_protocol(get_as<std::string>(config, "protocol", default_protocol));
  s.folds = get_as<std::size_t>(config, "folds", 5);
  s.policy = eval::parse_policy(
      get_as<std::string>(config, "policy", s.granularity == DatasetKind::Report ? "ch3" : "mcc"));
  s.seed = get_as<std::uint64_t>(config, "seed", 0);
  s.workers = get_as<std::size_t>(config, "workers", 1);
  if (s.workers < 1) fail(ErrorKind::InvalidArgument, "workers must be >= 1");
  s.out = get_as<std::string>(config, "out", "out");
  s.mode = scopes::parse_mode(get_as<std::string>(config, "mode", "vuln_only"));
  s.context.surrounding_n = get_as<int>(config, "surrounding_n", 6);
  if (s.context.surrounding_n < 0) fail(ErrorKind::InvalidArgument, "surrounding_n must be >= 0");
  s.baseline = get_as<std::string>(config, "baseline", "classical");
  if (s.baseline == "s-cva") s.baseline = "classical";
  if (s.baseline != "classical" && s.baseline != "x-cva" && s.baseline != "u-cva" && s.baseline != "acgru")
    fail(ErrorKind::InvalidArgument, "unknown baseline '" + s.baseline + "' (s-cva, x-cva, u-cva, acgru)");
  s.rebalance = get_as<bool>(config, "rebalance", false);
  s.use_training_time = get_as<bool>(config, "use_training_time", false);
  if (auto it = config.find("neural"); it != config.end()) {
    if (!it->is_object()) fail(ErrorKind::InvalidArgument, "config key 'neural' must be an object");
    s.neural = *it;
  }
  s.model_path = get_as<std::string>(config, "model", (fs::path(s.out) / "model.json").string());

  if (s.granularity == DatasetKind::Report) {
    const std::string f = get_as<std::string>(config, "features", "word");
    if (f != "word" && f != "char_word") fail(ErrorKind::InvalidArgument, "report features must be word or char_word");
    s.feature_kinds = {f};
  } else if (config.contains("features")) {
    const json& f = config.at("features");
    s.feature_kinds = f.is_array() ? f.get<std::vector<std::string>>()
                                   : std::vector<std::string>{f.get<std::string>()};
    for (const auto& k : s.feature_kinds)
      if (k != "bag_of_tokens" && k != "bag_of_subtokens")
        fail(ErrorKind::InvalidArgument, "code features must be bag_of_tokens or bag_of_subtokens");
  } else {
    s.feature_kinds = {"bag_of_tokens"};
  }

  if (config.contains("grid")) {
    for (const auto& g : config.at("grid")) s.specs.push_back(models::ClassifierSpec::from_json(g));
  } else {
    const auto kinds = get_as<std::vector<std::string>>(config, "models", {"naive_bayes", "logistic_regression"});
    for (const auto& k : kinds)
      for (const auto& spec : models::default_grid(models::parse_kind(k))) s.specs.push_back(spec);
  }
  if (s.specs.empty()) fail(ErrorKind::InvalidArgument, "the model grid is empty");
  return s;
}

// Artifacts ----------------------------------------------------------------------

class Artifacts {
 public:
  explicit Artifacts(std::string dir) : dir_(std::move(dir)) {}

  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void write(const std::string& name, std::string_view content) {
    ensure_dir();
    write_file(path(name), content);
    written_.push_back(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const std::vector<std::string>& written() const { return written_; }

  void ensure_dir() const {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory '" + dir_ + "': " + ec.message());
  }

 private:
  std::string dir_;
  std::vector<std::string> written_;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// Records ------------------------------------------------------------------------

corpus::Dataset load(const Settings& s, corpus::DatasetKind kind) {
  if (s.dataset.empty()) fail(ErrorKind::InvalidArgument, "no dataset path given (config key 'dataset')");
  if (!fs::exists(s.dataset)) fail(ErrorKind::Io, "dataset '" + s.dataset + "' does not exist");
  auto ds = corpus::load_dataset(s.dataset, kind, kind == corpus::DatasetKind::Post ? corpus::cvss_tasks() : s.tasks);
  if (kind != corpus::DatasetKind::Post) {
    const auto violations = corpus::validate_dataset(ds);
    if (!violations.empty())
      fail(ErrorKind::Schema, "record " + violations.front().record_id + ": " + violations.front().invariant);
  }
  return ds;
}

// One or more token documents per record; reports have one, functions one or
// two, commits four.
using Parts = std::vector<TokenDoc>;

std::vector<Parts> record_parts(const corpus::Dataset& ds, const scopes::ModeSpec& mode,
                                const scopes::ContextConfig& ctx, std::uint64_t seed) {
  std::vector<Parts> out(ds.size());
  switch (ds.kind) {
    case corpus::DatasetKind::Report: {
      const auto prep = text::PrepConfig::with_bundled_stopwords();
      for (std::size_t i = 0; i < ds.size(); ++i) out[i] = {text::preprocess_text(ds.reports[i].description, prep)};
      break;
    }
    case corpus::DatasetKind::Function:
      for (std::size_t i = 0; i < ds.size(); ++i)
        out[i] = scopes::build_input(ds.functions[i], mode, ctx, mix_seed(seed, i)).tokens;
      break;
    case corpus::DatasetKind::Commit:
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto v = scopes::commit_views(ds.commits[i]);
        out[i] = {text::tokenize_code(v.pre_hunk), text::tokenize_code(v.post_hunk), text::tokenize_code(v.pre_ces),
                  text::tokenize_code(v.post_ces)};
      }
      break;
    case corpus::DatasetKind::Post:
      fail(ErrorKind::InvalidArgument, "post datasets are only used by the mine subcommand");
  }
  return out;
}

std::vector<eval::DatedRecord> dated(const corpus::Dataset& ds) {
  std::vector<eval::DatedRecord> r;
  for (std::size_t i = 0; i < ds.size(); ++i) r.push_back({ds.id_at(i), ds.date_at(i)});
  return r;
}

// Selection splits plus the tuples used for held-out evaluation. For
// time_kfold the latest year is held out and the folds run over the rest.
struct Plans {
  eval::SplitPlan selection;
  std::vector<eval::SplitTuple> evaluation;
  int test_year = 0;
};

Plans make_plans(const Settings& s, const corpus::Dataset& ds) {
  const auto records = dated(ds);
  Plans p;
  if (s.protocol == eval::Protocol::TimeKFold) {
    std::set<int> years;
    for (const auto& r : records) years.insert(r.date.year);
    if (years.size() < s.folds + 2)
      fail(ErrorKind::InvalidArgument, "time_kfold with " + std::to_string(s.folds) + " folds and a held-out year needs " +
                                           std::to_string(s.folds + 2) + " distinct years, found " +
                                           std::to_string(years.size()));
    p.test_year = *years.rbegin();
    const int last_dev = *std::next(years.rbegin());
    std::vector<eval::DatedRecord> dev;
    std::vector<std::size_t> dev_index;
    eval::SplitTuple final_tuple;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const int y = records[i].date.year;
      if (y == p.test_year) {
        final_tuple.test.push_back(i);
        continue;
      }
      dev.push_back(records[i]);
      dev_index.push_back(i);
      (y == last_dev ? final_tuple.validation : final_tuple.train).push_back(i);
    }
    p.selection = eval::time_kfold_splits(dev, s.folds);
    for (auto& t : p.selection.tuples) {
      for (auto& i : t.train) i = dev_index[i];
      for (auto& i : t.validation) i = dev_index[i];
    }
    p.evaluation = {final_tuple};
  } else {
    p.selection = s.protocol == eval::Protocol::Rounds12 ? eval::rounds12_splits(records)
                                                         : eval::rounds10_wrap_splits(records, s.seed);
    p.evaluation = p.selection.tuples;
  }
  const std::string problem = eval::check_plan(p.selection, records);
  if (!problem.empty()) fail(ErrorKind::Runtime, "split plan rejected: " + problem);
  return p;
}

std::vector<std::size_t> merged(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> r = a;
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

// Feature recipes ------------------------------------------------------------------

struct Recipe {
  std::string kind;  // word, char_word, bag_of_tokens, bag_of_subtokens
  int nlp = 0;

  std::string name() const { return nlp > 0 ? kind + "#" + std::to_string(nlp) : kind; }
  json to_json() const { return {{"kind", kind}, {"nlp_config", nlp}}; }
  static Recipe from_json(const json& j) { return {j.at("kind").get<std::string>(), j.at("nlp_config").get<int>()}; }
};

std::vector<Recipe> recipes_for(const Settings& s) {
  std::vector<Recipe> r;
  for (const auto& k : s.feature_kinds) {
    if (s.granularity == corpus::DatasetKind::Report)
      for (int n : s.nlp_configs) r.push_back({k, n});
    else
      r.push_back({k, 0});
  }
  return r;
}

struct Fitted {
  Recipe recipe;
  features::FeatureModel model;
  features::Vocabulary vocab;

  SparseVector transform(const Parts& parts) const {
    if (recipe.nlp > 0) return model.transform(parts.empty() ? TokenDoc{} : parts.front());
    SparseVector out(0);
    for (const auto& part : parts)
      out = out.append(recipe.kind == "bag_of_subtokens" ? features::bag_of_subtokens(part, vocab)
                                                          : features::bag_of_tokens(part, vocab));
    return out;
  }

  json to_json() const {
    json j = {{"recipe", recipe.to_json()}};
    if (recipe.nlp > 0) {
      j["model"] = model.to_json();
    } else {
      j["terms"] = vocab.terms();
      j["doc_freq"] = vocab.doc_freq();
    }
    return j;
  }

  static Fitted from_json(const json& j) {
    Fitted f;
    f.recipe = Recipe::from_json(j.at("recipe"));
    if (f.recipe.nlp > 0) {
      f.model = features::FeatureModel::from_json(j.at("model"));
    } else {
      const auto terms = j.at("terms").get<std::vector<std::string>>();
      const auto df = j.at("doc_freq").get<std::vector<std::size_t>>();
      if (terms.size() != df.size()) fail(ErrorKind::Schema, "vocabulary terms and doc_freq differ in length");
      std::map<std::string, std::size_t> m;
      for (std::size_t i = 0; i < terms.size(); ++i) m[terms[i]] = df[i];
      f.vocab = features::Vocabulary(
          f.recipe.kind == "bag_of_subtokens" ? features::VocabKind::Subtoken : features::VocabKind::Word, m);
    }
    return f;
  }
};

Fitted fit_recipe(const Recipe& r, const std::vector<Parts>& parts, const std::vector<std::size_t>& idx) {
  Fitted f;
  f.recipe = r;
  if (r.nlp > 0) {
    std::vector<TokenDoc> docs;
    for (auto i : idx) docs.push_back(parts[i].front());
    const auto cfg = features::NlpConfig::table_config(r.nlp);
    f.model = r.kind == "char_word" ? features::fit_char_word_model(docs, cfg) : features::fit_word_model(docs, cfg);
  } else {
    std::vector<TokenDoc> docs;
    for (auto i : idx)
      for (const auto& p : parts[i]) docs.push_back(p);
    f.vocab = r.kind == "bag_of_subtokens" ? features::build_subtoken_vocab(docs, 2, 6, 1)
                                           : features::build_token_vocab(docs, 1);
  }
  return f;
}

SparseMatrix transform_rows(const Fitted& f, const std::vector<Parts>& parts, const std::vector<std::size_t>& idx) {
  SparseMatrix m;
  m.reserve(idx.size());
  for (auto i : idx) m.push_back(f.transform(parts[i]));
  return m;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(n);
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (!e.empty()) fail(ErrorKind::Runtime, e);
}

// Cached feature matrices per (recipe, split).
struct SplitFeatures {
  SparseMatrix train;
  SparseMatrix validation;
};

std::vector<std::vector<SplitFeatures>> featurize_splits(const std::vector<Recipe>& recipes,
                                                        const std::vector<Parts>& parts,
                                                        const std::vector<eval::SplitTuple>& tuples,
                                                        std::size_t workers) {
  std::vector<std::vector<SplitFeatures>> cache(recipes.size(), std::vector<SplitFeatures>(tuples.size()));
  parallel_for(recipes.size() * tuples.size(), workers, [&](std::size_t j) {
    const std::size_t r = j / tuples.size(), s = j % tuples.size();
    const auto fitted = fit_recipe(recipes[r], parts, tuples[s].train);
    cache[r][s] = {transform_rows(fitted, parts, tuples[s].train), transform_rows(fitted, parts, tuples[s].validation)};
  });
  return cache;
}

std::vector<std::string> labels_of(const corpus::Dataset& ds, const std::vector<std::size_t>& idx,
                                   const std::string& task) {
  std::vector<std::string> y;
  y.reserve(idx.size());
  for (auto i : idx) {
    const auto& l = ds.labels_at(i);
    auto it = l.find(task);
    if (it == l.end()) fail(ErrorKind::Schema, "record " + ds.id_at(i) + " has no label for task '" + task + "'");
    y.push_back(it->second);
  }
  return y;
}

std::vector<std::string> xcva_labels(const corpus::Dataset& ds, const std::vector<std::size_t>& idx,
                                     const std::vector<std::string>& tasks) {
  std::vector<std::string> y;
  for (auto i : idx) y.push_back(models::xcva_encode(ds.labels_at(i), tasks));
  return y;
}

eval::Score to_score(const eval::MetricReport& m) { return {m.accuracy, m.macro_f1, m.weighted_f1, m.mcc}; }

models::Classifier fit_classifier(const models::ClassifierSpec& spec, SparseMatrix x, std::vector<std::string> y,
                                  bool rebalance, std::uint64_t seed) {
  if (rebalance) models::random_oversample(x, y, mix_seed(seed, 77));
  return models::train_classifier(spec, x, y, seed);
}

// Fits on one split and predicts another. A split whose training labels are
// all equal predicts that label everywhere.
std::vector<std::string> fit_predict(const models::ClassifierSpec& spec, const SparseMatrix& train,
                                     const std::vector<std::string>& y, const SparseMatrix& test, bool rebalance,
                                     std::uint64_t seed) {
  if (!y.empty() && std::all_of(y.begin(), y.end(), [&](const std::string& v) { return v == y.front(); })) {
    spdlog::debug("single-label training split; predicting '{}'", y.front());
    return std::vector<std::string>(test.size(), y.front());
  }
  return fit_classifier(spec, train, y, rebalance, seed).predict_all(test);
}

// Classical selection ------------------------------------------------------------

struct Selection {
  std::string target;  // task name, or "xcva"
  Recipe recipe;
  models::ClassifierSpec spec;
  eval::GridOutcome outcome;
};

Selection select_classical(const Settings& s, const corpus::Dataset& ds, const std::string& target,
                           std::size_t target_index, const std::vector<Recipe>& recipes,
                           const std::vector<std::vector<SplitFeatures>>& cache,
                           const std::vector<eval::SplitTuple>& tuples) {
  std::vector<eval::GridPoint> grid;
  for (const auto& r : recipes)
    for (const auto& spec : s.specs) grid.push_back({r.name() + "|" + spec.describe(), spec.hyperparameter_count()});

  std::vector<std::vector<std::string>> y_train, y_val;
  for (const auto& t : tuples) {
    if (target == "xcva") {
      y_train.push_back(xcva_labels(ds, t.train, s.tasks));
      y_val.push_back(xcva_labels(ds, t.validation, s.tasks));
    } else {
      y_train.push_back(labels_of(ds, t.train, target));
      y_val.push_back(labels_of(ds, t.validation, target));
    }
  }
  const std::uint64_t task_seed = mix_seed(s.seed, 1000 + target_index);
  auto evaluate = [&](std::size_t c, std::size_t split) {
    const std::size_t r = c / s.specs.size();
    const auto& spec = s.specs[c % s.specs.size()];
    const auto& f = cache[r][split];
    auto pred = fit_predict(spec, f.train, y_train[split], f.validation, s.rebalance,
                            mix_seed(task_seed, c * tuples.size() + split));
    if (target == "xcva") {
      // Mean over tasks of the decoded per-task scores.
      eval::Score sum;
      for (const auto& task : s.tasks) {
        std::vector<std::string> g, p;
        for (std::size_t i = 0; i < pred.size(); ++i) {
          g.push_back(models::xcva_decode(y_val[split][i], s.tasks).at(task));
          p.push_back(models::xcva_decode(pred[i], s.tasks).at(task));
        }
        const auto m = eval::compute_metrics(g, p);
        sum.accuracy += m.accuracy;
        sum.macro_f1 += m.macro_f1;
        sum.weighted_f1 += m.weighted_f1;
        sum.mcc += m.mcc;
      }
      const auto n = static_cast<double>(s.tasks.size());
      return eval::Score{sum.accuracy / n, sum.macro_f1 / n, sum.weighted_f1 / n, sum.mcc / n};
    }
    return to_score(eval::compute_metrics(y_val[split], pred));
  };
  eval::SelectionOptions opt;
  opt.use_training_time = s.use_training_time;
  Selection sel;
  sel.target = target;
  sel.outcome = eval::grid_search(grid, tuples.size(), evaluate, s.policy, s.workers, opt);
  sel.recipe = recipes[sel.outcome.best / s.specs.size()];
  sel.spec = s.specs[sel.outcome.best % s.specs.size()];
  spdlog::info("{}: selected {}", target, sel.outcome.rows[sel.outcome.best].name);
  return sel;
}

// U-CVA ------------------------------------------------------------------------------

std::vector<std::size_t> kmeans_grid(const json& config) {
  auto ks = get_as<std::vector<std::size_t>>(config, "kmeans_k", {});
  if (ks.empty()) {
    for (std::size_t k = 2; k <= 10; ++k) ks.push_back(k);
    for (std::size_t k = 15; k <= 50; k += 5) ks.push_back(k);
  }
  return ks;
}

models::DenseMatrix dense_rows(const SparseMatrix& m) {
  models::DenseMatrix d;
  d.reserve(m.size());
  for (const auto& r : m) d.push_back(r.to_dense());
  return d;
}

eval::Score score_labels(const std::vector<corpus::Labels>& gold, const std::vector<corpus::Labels>& pred,
                         const std::vector<std::string>& tasks) {
  eval::Score sum;
  for (const auto& task : tasks) {
    std::vector<std::string> g, p;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      g.push_back(gold[i].at(task));
      p.push_back(pred[i].at(task));
    }
    const auto m = eval::compute_metrics(g, p);
    sum.accuracy += m.accuracy;
    sum.macro_f1 += m.macro_f1;
    sum.weighted_f1 += m.weighted_f1;
    sum.mcc += m.mcc;
  }
  const auto n = static_cast<double>(tasks.size());
  return {sum.accuracy / n, sum.macro_f1 / n, sum.weighted_f1 / n, sum.mcc / n};
}

std::vector<corpus::Labels> labels_rows(const corpus::Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<corpus::Labels> r;
  for (auto i : idx) r.push_back(ds.labels_at(i));
  return r;
}

models::UcvaModel fit_ucva(const models::DenseMatrix& x, const std::vector<corpus::Labels>& y,
                           const std::vector<std::string>& tasks, std::size_t k, std::uint64_t seed) {
  if (k > x.size()) fail(ErrorKind::InvalidArgument, "k = " + std::to_string(k) + " exceeds the training rows");
  return models::ucva_fit(models::kmeans_fit(x, k, seed), x, y, tasks);
}

// AC-GRU -----------------------------------------------------------------------------

struct NeuralSetup {
  neural::AcGruConfig config;
  neural::TokenIndex index;
  std::map<std::string, std::vector<std::string>> classes;
};

neural::AcGruConfig neural_config(const json& overrides, const std::vector<neural::TaskHead>& heads, int inputs,
                                  int vocab, std::uint64_t seed) {
  neural::AcGruConfig base;
  base.inputs = inputs;
  base.seed = seed;
  json j = base.to_json();
  j.merge_patch(overrides);
  json t = json::array();
  for (const auto& h : heads) t.push_back({{"name", h.name}, {"classes", h.classes}});
  j["tasks"] = t;
  j["inputs"] = inputs;
  if (!overrides.contains("vocab_size")) j["vocab_size"] = vocab;
  if (!overrides.contains("seed")) j["seed"] = seed;
  return neural::AcGruConfig::from_json(j);
}

neural::Sample make_sample(const NeuralSetup& setup, const Parts& parts, const corpus::Labels* labels,
                           const std::vector<std::string>& tasks, bool* usable) {
  neural::Sample x;
  for (int p = 0; p < setup.config.inputs; ++p)
    x.inputs.push_back(setup.index.encode(static_cast<std::size_t>(p) < parts.size() ? parts[p] : TokenDoc{},
                                          setup.config.input_len));
  if (usable) *usable = true;
  if (labels) {
    for (const auto& task : tasks) {
      const auto& cls = setup.classes.at(task);
      auto it = std::find(cls.begin(), cls.end(), labels->at(task));
      if (it == cls.end()) {
        if (usable) *usable = false;
        x.labels.push_back(0);
      } else {
        x.labels.push_back(static_cast<int>(it - cls.begin()));
      }
    }
  }
  return x;
}

// Metrics output --------------------------------------------------------------------

json metrics_json(const Settings& s, const std::vector<std::string>& tasks, const std::map<std::string, std::string>& selected,
                  const std::map<std::string, std::vector<std::string>>& gold,
                  const std::map<std::string, std::vector<std::string>>& pred, std::size_t tuples) {
  json rows = json::array();
  eval::Score sum;
  std::size_t counted = 0;
  for (const auto& task : tasks) {
    json row = {{"task", task}, {"selected", selected.count(task) ? selected.at(task) : ""}};
    const auto& g = gold.at(task);
    row["n_test"] = g.size();
    if (g.empty()) {
      row["metrics"] = nullptr;
    } else {
      const auto m = eval::compute_metrics(g, pred.at(task));
      row["metrics"] = m.to_json();
      sum.accuracy += m.accuracy;
      sum.macro_f1 += m.macro_f1;
      sum.weighted_f1 += m.weighted_f1;
      sum.mcc += m.mcc;
      ++counted;
    }
    rows.push_back(row);
  }
  json avg = nullptr;
  if (counted > 0) {
    const auto n = static_cast<double>(counted);
    avg = {{"accuracy", sum.accuracy / n},
           {"macro_f1", sum.macro_f1 / n},
           {"weighted_f1", sum.weighted_f1 / n},
           {"mcc", sum.mcc / n}};
  }
  return {{"granularity", corpus::dataset_kind_name(s.granularity)},
          {"protocol", eval::protocol_name(s.protocol)},
          {"policy", eval::policy_name(s.policy)},
          {"baseline", s.baseline},
          {"seed", s.seed},
          {"evaluation_tuples", tuples},
          {"tasks", rows},
          {"average", avg}};
}

// Bundles ----------------------------------------------------------------------------

json bundle_header(const Settings& s, const Plans& plans) {
  return {{"format", "svassess-bundle"},
          {"version", 1},
          {"granularity", corpus::dataset_kind_name(s.granularity)},
          {"protocol", eval::protocol_name(s.protocol)},
          {"policy", eval::policy_name(s.policy)},
          {"baseline", s.baseline},
          {"seed", s.seed},
          {"tasks", s.tasks},
          {"mode", scopes::mode_name(s.mode)},
          {"surrounding_n", s.context.surrounding_n},
          {"rebalance", s.rebalance},
          {"test_year", plans.test_year}};
}

json read_bundle(const std::string& path) {
  if (!fs::exists(path)) fail(ErrorKind::Io, "model bundle '" + path + "' does not exist; run train first");
  json b;
  try {
    b = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "model bundle '" + path + "': " + e.what());
  }
  if (b.value("format", "") != "svassess-bundle") fail(ErrorKind::Schema, "'" + path + "' is not a model bundle");
  return b;
}

// Settings stored in the bundle win over the run config for everything that
// shapes features and splits.
void adopt_bundle(Settings& s, const json& b) {
  s.granularity = corpus::parse_dataset_kind(b.at("granularity").get<std::string>());
  s.protocol = eval::parse_protocol(b.at("protocol").get<std::string>());
  s.policy = eval::parse_policy(b.at("policy").get<std::string>());
  s.baseline = b.at("baseline").get<std::string>();
  s.seed = b.at("seed").get<std::uint64_t>();
  s.tasks = b.at("tasks").get<std::vector<std::string>>();
  s.mode = scopes::parse_mode(b.at("mode").get<std::string>());
  s.context.surrounding_n = b.at("surrounding_n").get<int>();
  s.rebalance = b.at("rebalance").get<bool>();
  if (b.contains("folds")) s.folds = b.at("folds").get<std::size_t>();
}

// Subcommands ------------------------------------------------------------------------

json cmd_ingest(const Settings& s, Artifacts& art) {
  if (s.dataset.empty()) fail(ErrorKind::InvalidArgument, "no dataset path given (config key 'dataset')");
  if (!fs::exists(s.dataset)) fail(ErrorKind::Io, "dataset '" + s.dataset + "' does not exist");
  const auto ds = corpus::load_dataset(s.dataset, s.granularity, s.tasks);
  const auto violations = corpus::validate_dataset(ds);
  json summary = {{"kind", corpus::dataset_kind_name(ds.kind)}, {"records", ds.size()}};
  std::map<int, std::size_t> years;
  std::map<std::string, std::map<std::string, std::size_t>> classes;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.kind == corpus::DatasetKind::Post) continue;
    ++years[ds.date_at(i).year];
    for (const auto& [task, cls] : ds.labels_at(i)) ++classes[task][cls];
  }
  json y = json::object();
  for (const auto& [year, n] : years) y[std::to_string(year)] = n;
  summary["years"] = y;
  summary["classes"] = classes;
  json v = json::array();
  for (const auto& x : violations) v.push_back({{"record", x.record_id}, {"invariant", x.invariant}});
  summary["violations"] = v;
  art.write_json("ingest.json", summary);
  if (!violations.empty())
    fail(ErrorKind::Schema, std::to_string(violations.size()) + " invariant violation(s); first: record " +
                                violations.front().record_id + ": " + violations.front().invariant);
  return summary;
}

json cmd_featurize(const Settings& s, Artifacts& art) {
  const auto ds = load(s, s.granularity);
  const auto parts = record_parts(ds, s.mode, s.context, s.seed);
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Recipe r = recipes_for(s).front();
  const auto fitted = fit_recipe(r, parts, all);
  art.write_json("feature_model.json", fitted.to_json());
  std::string lines;
  std::size_t width = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto v = fitted.transform(parts[i]);
    width = v.width();
    lines += json{{"id", ds.id_at(i)}, {"features", features::sparse_to_json(v)}}.dump() + "\n";
  }
  art.write("features.jsonl", lines);
  return {{"recipe", r.name()}, {"records", ds.size()}, {"width", width}};
}

json train_classical(const Settings& s, const corpus::Dataset& ds, const std::vector<Parts>& parts,
                     const Plans& plans, Artifacts& art) {
  const auto recipes = recipes_for(s);
  const auto cache = featurize_splits(recipes, parts, plans.selection.tuples, s.workers);
  std::vector<std::string> targets = s.baseline == "x-cva" ? std::vector<std::string>{"xcva"} : s.tasks;

  // Final models are fitted on everything the bundle will later be asked to
  // generalize from: the development years for time_kfold, all records
  // otherwise.
  std::vector<std::size_t> final_idx;
  if (s.protocol == eval::Protocol::TimeKFold)
    final_idx = merged(plans.evaluation.front().train, plans.evaluation.front().validation);
  else
    for (std::size_t i = 0; i < ds.size(); ++i) final_idx.push_back(i);

  json bundle = bundle_header(s, plans);
  bundle["folds"] = s.folds;
  json models_j = json::array();
  json summary = json::array();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto sel = select_classical(s, ds, targets[t], t, recipes, cache, plans.selection.tuples);
    art.write("grid_" + targets[t] + ".csv", sel.outcome.to_csv());
    const auto fitted = fit_recipe(sel.recipe, parts, final_idx);
    const auto y = targets[t] == "xcva" ? xcva_labels(ds, final_idx, s.tasks) : labels_of(ds, final_idx, targets[t]);
    const auto clf = fit_classifier(sel.spec, transform_rows(fitted, parts, final_idx), y, s.rebalance,
                                    mix_seed(s.seed, 2000 + t));
    const std::string name = sel.outcome.rows[sel.outcome.best].name;
    models_j.push_back({{"target", targets[t]},
                        {"selected", name},
                        {"recipe", sel.recipe.to_json()},
                        {"spec", sel.spec.to_json()},
                        {"features", fitted.to_json()},
                        {"classifier", clf.to_json()}});
    summary.push_back({{"target", targets[t]}, {"selected", name}});
  }
  bundle["models"] = models_j;
  art.write_json("model.json", bundle);
  return {{"selected", summary}};
}

json train_ucva(const Settings& s, const corpus::Dataset& ds, const std::vector<Parts>& parts, const Plans& plans,
                Artifacts& art) {
  const Recipe recipe = recipes_for(s).front();
  const auto ks = kmeans_grid(s.config);
  const auto& tuples = plans.selection.tuples;
  const auto cache = featurize_splits({recipe}, parts, tuples, s.workers);
  std::vector<eval::GridPoint> grid;
  for (auto k : ks) grid.push_back({"k=" + std::to_string(k), 1});
  auto evaluate = [&](std::size_t c, std::size_t split) {
    const auto x = dense_rows(cache[0][split].train);
    const auto m = fit_ucva(x, labels_rows(ds, tuples[split].train), s.tasks, ks[c], mix_seed(s.seed, c));
    std::vector<corpus::Labels> pred;
    for (const auto& v : cache[0][split].validation) pred.push_back(models::ucva_assign(m, v.to_dense()));
    return score_labels(labels_rows(ds, tuples[split].validation), pred, s.tasks);
  };
  const auto outcome = eval::grid_search(grid, tuples.size(), evaluate, eval::Policy::Mcc, s.workers);
  art.write("grid_ucva.csv", outcome.to_csv());

  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto fitted = fit_recipe(recipe, parts, all);
  const auto model = fit_ucva(dense_rows(transform_rows(fitted, parts, all)), labels_rows(ds, all), s.tasks,
                              ks[outcome.best], mix_seed(s.seed, outcome.best));
  json bundle = bundle_header(s, plans);
  bundle["folds"] = s.folds;
  bundle["ucva"] = {{"k", ks[outcome.best]},
                    {"selected", outcome.rows[outcome.best].name},
                    {"recipe", recipe.to_json()},
                    {"features", fitted.to_json()},
                    {"model", model.to_json()}};
  art.write_json("model.json", bundle);
  return {{"selected", outcome.rows[outcome.best].name}};
}

NeuralSetup neural_setup(const Settings& s, const corpus::Dataset& ds, const std::vector<Parts>& parts,
                         const std::vector<std::size_t>& train) {
  NeuralSetup setup;
  std::vector<TokenDoc> docs;
  for (auto i : train)
    for (const auto& p : parts[i]) docs.push_back(p);
  const int vocab = get_as<int>(s.neural, "vocab_size", 10000);
  setup.index = neural::TokenIndex(docs, vocab);
  std::vector<neural::TaskHead> heads;
  for (const auto& task : s.tasks) {
    std::set<std::string> cls;
    for (auto i : train) cls.insert(ds.labels_at(i).at(task));
    if (cls.size() < 2) fail(ErrorKind::Runtime, "task '" + task + "' has a single class in the training data");
    setup.classes[task] = std::vector<std::string>(cls.begin(), cls.end());
    heads.push_back({task, static_cast<int>(cls.size())});
  }
  std::size_t inputs = 1;
  for (const auto& p : parts) inputs = std::max(inputs, p.size());
  setup.config = neural_config(s.neural, heads, static_cast<int>(inputs), setup.index.size(), s.seed);
  return setup;
}

json train_neural(const Settings& s, const corpus::Dataset& ds, const std::vector<Parts>& parts, const Plans& plans,
                  Artifacts& art) {
  // One train/validation/test tuple: the held-out split for time_kfold, the
  // last round otherwise.
  const auto& tuple = plans.evaluation.back();
  auto setup = neural_setup(s, ds, parts, tuple.train);
  std::vector<neural::Sample> train, val;
  for (auto i : tuple.train) train.push_back(make_sample(setup, parts[i], &ds.labels_at(i), s.tasks, nullptr));
  if (s.rebalance && !s.tasks.empty()) {
    // Oversample on the first task's classes.
    auto y = labels_of(ds, tuple.train, s.tasks.front());
    models::random_oversample(train, y, mix_seed(s.seed, 77));
  }
  for (auto i : tuple.validation) {
    bool usable = true;
    auto x = make_sample(setup, parts[i], &ds.labels_at(i), s.tasks, &usable);
    if (usable) val.push_back(std::move(x));
  }
  const auto result = neural::train_acgru(setup.config, train, val);
  art.write("history.csv", result.history_csv());
  json bundle = bundle_header(s, plans);
  bundle["folds"] = s.folds;
  bundle["acgru"] = {{"classes", setup.classes},
                     {"token_index", setup.index.to_json()},
                     {"best_epoch", result.best_epoch},
                     {"stopped_early", result.stopped_early},
                     {"parameters", result.best.to_json()}};
  art.write_json("model.json", bundle);
  return {{"best_epoch", result.best_epoch}, {"epochs_run", result.history.size()}};
}

json cmd_train(const Settings& s, Artifacts& art) {
  const auto ds = load(s, s.granularity);
  const auto parts = record_parts(ds, s.mode, s.context, s.seed);
  const auto plans = make_plans(s, ds);
  spdlog::info("train: {} records, {} selection splits", ds.size(), plans.selection.tuples.size());
  if (s.baseline == "u-cva") return train_ucva(s, ds, parts, plans, art);
  if (s.baseline == "acgru") return train_neural(s, ds, parts, plans, art);
  return train_classical(s, ds, parts, plans, art);
}

json cmd_evaluate(Settings s, Artifacts& art) {
  const json bundle = read_bundle(s.model_path);
  adopt_bundle(s, bundle);
  const auto ds = load(s, s.granularity);
  const auto parts = record_parts(ds, s.mode, s.context, s.seed);
  const auto plans = make_plans(s, ds);

  std::map<std::string, std::vector<std::string>> gold, pred;
  std::map<std::string, std::string> selected;
  for (const auto& task : s.tasks) {
    gold[task] = {};
    pred[task] = {};
  }
  std::size_t used_tuples = plans.evaluation.size();

  if (s.baseline == "acgru") {
    const json& a = bundle.at("acgru");
    NeuralSetup setup;
    const auto params = neural::Parameters::from_json(a.at("parameters"));
    setup.config = params.config();
    setup.index = neural::TokenIndex::from_json(a.at("token_index"));
    setup.classes = a.at("classes").get<std::map<std::string, std::vector<std::string>>>();
    for (auto i : plans.evaluation.back().test) {
      const auto p = neural::predict_acgru(params, make_sample(setup, parts[i], nullptr, s.tasks, nullptr));
      for (std::size_t t = 0; t < s.tasks.size(); ++t) {
        gold[s.tasks[t]].push_back(ds.labels_at(i).at(s.tasks[t]));
        pred[s.tasks[t]].push_back(setup.classes.at(s.tasks[t])[static_cast<std::size_t>(p.classes[t])]);
      }
    }
    for (const auto& task : s.tasks) selected[task] = "acgru";
    used_tuples = 1;
  } else if (s.baseline == "u-cva") {
    const json& u = bundle.at("ucva");
    const Recipe recipe = Recipe::from_json(u.at("recipe"));
    const auto k = u.at("k").get<std::size_t>();
    for (std::size_t r = 0; r < plans.evaluation.size(); ++r) {
      const auto& t = plans.evaluation[r];
      const auto train = merged(t.train, t.validation);
      const auto fitted = fit_recipe(recipe, parts, train);
      const auto m = fit_ucva(dense_rows(transform_rows(fitted, parts, train)), labels_rows(ds, train), s.tasks, k,
                              mix_seed(s.seed, 3000 + r));
      for (auto i : t.test) {
        const auto l = models::ucva_assign(m, fitted.transform(parts[i]).to_dense());
        for (const auto& task : s.tasks) {
          gold[task].push_back(ds.labels_at(i).at(task));
          pred[task].push_back(l.at(task));
        }
      }
    }
    for (const auto& task : s.tasks) selected[task] = u.at("selected").get<std::string>();
  } else {
    for (const auto& m : bundle.at("models")) {
      const std::string target = m.at("target").get<std::string>();
      const Recipe recipe = Recipe::from_json(m.at("recipe"));
      const auto spec = models::ClassifierSpec::from_json(m.at("spec"));
      for (std::size_t r = 0; r < plans.evaluation.size(); ++r) {
        const auto& t = plans.evaluation[r];
        const auto train = merged(t.train, t.validation);
        const auto fitted = fit_recipe(recipe, parts, train);
        const auto y = target == "xcva" ? xcva_labels(ds, train, s.tasks) : labels_of(ds, train, target);
        const auto p = fit_predict(spec, transform_rows(fitted, parts, train), y, transform_rows(fitted, parts, t.test),
                                   s.rebalance, mix_seed(s.seed, 4000 + r));
        for (std::size_t j = 0; j < t.test.size(); ++j) {
          const auto i = t.test[j];
          if (target == "xcva") {
            const auto decoded = models::xcva_decode(p[j], s.tasks);
            for (const auto& task : s.tasks) {
              gold[task].push_back(ds.labels_at(i).at(task));
              pred[task].push_back(decoded.at(task));
            }
          } else {
            gold[target].push_back(ds.labels_at(i).at(target));
            pred[target].push_back(p[j]);
          }
        }
      }
      const std::string name = m.at("selected").get<std::string>();
      if (target == "xcva")
        for (const auto& task : s.tasks) selected[task] = name;
      else
        selected[target] = name;
    }
  }
  const json metrics = metrics_json(s, s.tasks, selected, gold, pred, used_tuples);
  art.write_json("metrics.json", metrics);
  art.write("metrics.txt", metrics_table(metrics));
  return {{"average", metrics.at("average")}};
}

json cmd_assess(Settings s, Artifacts& art) {
  const json bundle = read_bundle(s.model_path);
  adopt_bundle(s, bundle);
  std::string jsonl;
  if (auto it = s.config.find("record"); it != s.config.end()) {
    jsonl = it->dump() + "\n";
  } else if (auto in = s.config.find("input"); in != s.config.end()) {
    jsonl = read_file(in->get<std::string>());
  } else {
    fail(ErrorKind::InvalidArgument, "assess needs a 'record' object or an 'input' JSONL path");
  }
  // Labels are not needed for inference; fill placeholders so the record
  // schema check passes.
  std::string filled;
  for (const auto& line : corpus::split_lines(jsonl)) {
    if (trim(line).empty()) continue;
    json r;
    try {
      r = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, std::string("assess input: ") + e.what());
    }
    if (!r.contains("labels")) {
      json l = json::object();
      for (const auto& t : s.tasks) l[t] = "?";
      r["labels"] = l;
    }
    if (!r.contains("date")) r["date"] = "1970-01-01";
    filled += r.dump() + "\n";
  }
  const auto ds = corpus::parse_dataset(filled, s.granularity, s.tasks);
  const auto parts = record_parts(ds, s.mode, s.context, s.seed);
  std::vector<corpus::Labels> out(ds.size());

  if (s.baseline == "acgru") {
    const json& a = bundle.at("acgru");
    NeuralSetup setup;
    const auto params = neural::Parameters::from_json(a.at("parameters"));
    setup.config = params.config();
    setup.index = neural::TokenIndex::from_json(a.at("token_index"));
    setup.classes = a.at("classes").get<std::map<std::string, std::vector<std::string>>>();
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto p = neural::predict_acgru(params, make_sample(setup, parts[i], nullptr, s.tasks, nullptr));
      for (std::size_t t = 0; t < s.tasks.size(); ++t)
        out[i][s.tasks[t]] = setup.classes.at(s.tasks[t])[static_cast<std::size_t>(p.classes[t])];
    }
  } else if (s.baseline == "u-cva") {
    const json& u = bundle.at("ucva");
    const auto fitted = Fitted::from_json(u.at("features"));
    const auto m = models::UcvaModel::from_json(u.at("model"));
    for (std::size_t i = 0; i < ds.size(); ++i) out[i] = models::ucva_assign(m, fitted.transform(parts[i]).to_dense());
  } else {
    for (const auto& m : bundle.at("models")) {
      const std::string target = m.at("target").get<std::string>();
      const auto fitted = Fitted::from_json(m.at("features"));
      const auto clf = models::Classifier::from_json(m.at("classifier"));
      for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto p = clf.predict(fitted.transform(parts[i]));
        if (target == "xcva")
          out[i] = models::xcva_decode(p, s.tasks);
        else
          out[i][target] = p;
      }
    }
  }
  std::string lines;
  json result = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const json row = {{"id", ds.id_at(i)}, {"labels", out[i]}};
    lines += row.dump() + "\n";
    result.push_back(row);
  }
  art.write("predictions.jsonl", lines);
  return {{"predictions", result}};
}

std::string drift_table(const drift::DriftReport& r) {
  std::string t = "year  new_terms  coverage\n";
  std::set<int> years;
  for (const auto& [y, n] : r.new_terms) years.insert(y);
  for (const auto& [y, c] : r.coverage) years.insert(y);
  char buf[96];
  for (int y : years) {
    auto n = r.new_terms.find(y);
    auto c = r.coverage.find(y);
    const std::string nt = n == r.new_terms.end() ? "-" : std::to_string(n->second);
    std::string cv = "-";
    if (c != r.coverage.end()) {
      std::snprintf(buf, sizeof buf, "%.4f", c->second);
      cv = buf;
    }
    std::snprintf(buf, sizeof buf, "%-4d  %9s  %8s\n", y, nt.c_str(), cv.c_str());
    t += buf;
  }
  t += "all-zero cases: " + std::to_string(r.all_zero_ids.size()) + "\n";
  return t;
}

json cmd_drift(const Settings& s, Artifacts& art) {
  if (s.granularity != corpus::DatasetKind::Report) fail(ErrorKind::InvalidArgument, "drift runs on report datasets");
  const auto ds = load(s, s.granularity);
  const auto parts = record_parts(ds, s.mode, s.context, s.seed);
  std::vector<drift::DatedDoc> docs;
  std::set<int> years;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    docs.push_back({ds.id_at(i), ds.date_at(i).year, parts[i].front()});
    years.insert(ds.date_at(i).year);
  }
  if (years.size() < 2) fail(ErrorKind::InvalidArgument, "drift needs records from at least two years");
  const int split = get_as<int>(s.config, "split_year", *years.rbegin());
  std::vector<TokenDoc> train;
  std::vector<drift::DatedDoc> test;
  for (const auto& d : docs) {
    if (d.year < split) train.push_back(d.tokens);
    else test.push_back(d);
  }
  if (train.empty() || test.empty())
    fail(ErrorKind::InvalidArgument, "split_year " + std::to_string(split) + " leaves an empty side");

  drift::DriftReport report;
  report.new_terms = drift::new_terms_by_year(docs);
  const auto word_model = features::fit_word_model(train, features::NlpConfig::table_config(1));
  report.all_zero_ids = drift::find_all_zero_cases(word_model, test);
  auto cfg = features::NlpConfig::table_config(1);
  cfg.char_min = get_as<int>(s.config, "char_min", 2);
  cfg.char_max = get_as<int>(s.config, "char_max", 3);
  const auto char_model = features::fit_char_model(train, cfg);
  std::map<int, std::vector<TokenDoc>> by_year;
  for (const auto& d : test) by_year[d.year].push_back(d.tokens);
  for (const auto& [y, d] : by_year) report.coverage[y] = drift::char_coverage(char_model, d);

  art.write_json("drift.json", report.to_json());
  art.write("new_terms.csv", report.new_terms_csv());
  art.write("drift.txt", drift_table(report));
  return {{"split_year", split}, {"all_zero", report.all_zero_ids.size()}};
}

json cmd_context(const Settings& s, Artifacts& art) {
  const auto ds = load(s, s.granularity);
  std::string lines;
  if (ds.kind == corpus::DatasetKind::Function) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto in = scopes::build_input(ds.functions[i], s.mode, s.context, mix_seed(s.seed, i));
      lines += json{{"record_id", ds.id_at(i)}, {"mode", scopes::mode_name(s.mode)}, {"indices", in.indices},
                    {"tokens", in.tokens}, {"short_sample", in.short_sample}}
                   .dump() +
               "\n";
    }
  } else if (ds.kind == corpus::DatasetKind::Commit) {
    for (const auto& c : ds.commits) {
      const auto v = scopes::commit_views(c);
      lines += json{{"record_id", c.id},
                    {"pre_hunk", v.pre_hunk},
                    {"post_hunk", v.post_hunk},
                    {"pre_ces", v.pre_ces},
                    {"post_ces", v.post_ces}}
                   .dump() +
               "\n";
    }
  } else {
    fail(ErrorKind::InvalidArgument, "context runs on function or commit datasets");
  }
  art.write("contexts.jsonl", lines);
  return {{"records", ds.size()}};
}

pumine::Theta read_theta(const std::string& path) {
  pumine::Theta theta;
  bool header = true;
  for (const auto& line : corpus::split_lines(read_file(path))) {
    if (trim(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // post id
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorKind::Parse, "theta CSV: bad number '" + cell + "'");
      }
    }
    theta.push_back(std::move(row));
  }
  return theta;
}

json cmd_mine(const Settings& s, Artifacts& art) {
  const auto ds = load(s, corpus::DatasetKind::Post);
  const std::string kw_path = get_as<std::string>(s.config, "keywords", "");
  if (kw_path.empty()) fail(ErrorKind::InvalidArgument, "mine needs a keyword list (config key 'keywords')");
  if (!fs::exists(kw_path)) fail(ErrorKind::Io, "keyword list '" + kw_path + "' does not exist");
  const auto kw = pumine::KeywordSet::load(kw_path);
  auto filter = pumine::ContentFilterConfig::defaults();
  if (auto it = s.config.find("filter"); it != s.config.end())
    for (const auto& [site, steps] : pumine::ContentFilterConfig::from_json(*it).thresholds)
      for (const auto& [step, t] : steps) filter.thresholds[site][step] = t;
  const auto steps = get_as<std::vector<int>>(s.config, "steps", {1});
  art.write_json("filter_config.json", filter.to_json());

  std::vector<pumine::FilteredPost> kept;
  for (auto site : {corpus::Site::SO, corpus::Site::SSE}) {
    std::vector<corpus::QaPost> current;
    for (const auto& p : ds.posts)
      if (p.site == site) current.push_back(p);
    std::vector<pumine::FilteredPost> out;
    for (int step : steps) {
      out = pumine::content_filter(current, site, step, filter, kw);
      current.clear();
      for (const auto& f : out) current.push_back(f.post);
    }
    kept.insert(kept.end(), out.begin(), out.end());
  }
  std::string lines;
  for (const auto& f : kept)
    lines += json{{"id", f.post.id},
                  {"site", corpus::site_name(f.post.site)},
                  {"label", f.post.label == corpus::PostLabel::Positive ? "positive" : "unlabeled"},
                  {"kw_count", f.metrics.count},
                  {"kw_ratio", f.metrics.ratio}}
                 .dump() +
             "\n";
  art.write("filtered.jsonl", lines);
  json result = {{"posts", ds.size()}, {"kept", kept.size()}};

  std::vector<std::size_t> pos, unl;
  for (std::size_t i = 0; i < kept.size(); ++i)
    (kept[i].post.label == corpus::PostLabel::Positive ? pos : unl).push_back(i);
  if (pos.empty() || unl.empty()) {
    spdlog::warn("mine: PU learning skipped ({} positive, {} unlabeled posts kept)", pos.size(), unl.size());
    result["pu"] = nullptr;
  } else {
    const auto prep = text::PrepConfig::with_bundled_stopwords();
    std::vector<TokenDoc> docs;
    for (const auto& f : kept) docs.push_back(text::preprocess_text(f.post.full_text(), prep));
    const auto tfidf = features::fit_word_model(docs, features::NlpConfig::table_config(2));
    const auto x = tfidf.transform_all(docs);
    const std::size_t k = std::min<std::size_t>(get_as<std::size_t>(s.config, "lsa_k", 100),
                                                std::min(x.size(), tfidf.width()));
    if (k == 0) fail(ErrorKind::Runtime, "mine: the tf-idf vocabulary of the kept posts is empty");
    reduce::LsaOptions lo;
    lo.seed = s.seed;
    const auto lsa = reduce::lsa_fit(x, k, lo);
    std::vector<pumine::Vec> emb;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      emb.push_back(reduce::lsa_transform(lsa, x[i]));
      double n = 0.0;
      for (double v : emb.back()) n += v * v;
      if (n == 0.0) fail(ErrorKind::InvalidArgument, "post " + kept[i].post.id + " has a zero-norm embedding");
    }
    std::vector<pumine::Vec> p, u;
    for (auto i : pos) p.push_back(emb[i]);
    for (auto i : unl) u.push_back(emb[i]);
    pumine::PuConfig cfg;
    cfg.alpha = get_as<double>(s.config, "alpha", 1.0);
    const auto rn = pumine::reliable_negatives(p, u, cfg.alpha);
    const auto model = pumine::pu_train(p, u, cfg, s.seed);
    json rn_ids = json::array(), predicted = json::array();
    for (auto i : rn.indices) rn_ids.push_back(kept[unl[i]].post.id);
    for (std::size_t i = 0; i < u.size(); ++i)
      if (model.is_positive(u[i])) predicted.push_back(kept[unl[i]].post.id);
    json pu = {{"alpha", cfg.alpha},
               {"lsa_k", k},
               {"reliable_negatives", rn_ids},
               {"predicted_positive", predicted},
               {"model", model.to_json()}};
    art.write_json("pu.json", pu);
    result["pu"] = {{"reliable_negatives", rn_ids.size()}, {"predicted_positive", predicted.size()}};
  }
  if (auto it = s.config.find("theta"); it != s.config.end()) {
    const auto share = pumine::topic_share(read_theta(it->get<std::string>()));
    art.write_json("topic_share.json", share);
    result["topics"] = share.size();
  }
  return result;
}

json cmd_gradcheck(const Settings& s, Artifacts& art) {
  json toy = {{"vocab_size", 50}, {"input_len", 12}, {"embed_dim", 8}, {"filter_sizes", {1, 3, 5}},
              {"filters", 4},     {"gru_hidden", 6}, {"attention_hidden", 6}, {"task_hidden", 6},
              {"inputs", 4},      {"dropout", 0.0}};
  toy.merge_patch(s.neural);
  toy["seed"] = s.seed;
  if (!toy.contains("tasks")) toy["tasks"] = json::array({{{"name", "a"}, {"classes", 2}}, {{"name", "b"}, {"classes", 3}}});
  const auto cfg = neural::AcGruConfig::from_json(toy);
  const neural::Parameters params(cfg, mix_seed(s.seed, 0));
  Rng rng(mix_seed(s.seed, 1));
  neural::Sample x;
  for (int i = 0; i < cfg.inputs; ++i) {
    std::vector<int> seq(static_cast<std::size_t>(cfg.input_len));
    for (auto& v : seq) v = static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.vocab_size)));
    x.inputs.push_back(seq);
  }
  for (const auto& t : cfg.tasks) x.labels.push_back(static_cast<int>(rng.index(static_cast<std::uint64_t>(t.classes))));
  const auto checks = neural::gradient_check(params, x);
  constexpr double kTolerance = 1e-4;
  json rows = json::array();
  bool ok = true;
  std::string table = "block                 entries   max_abs_err   max_rel_err\n";
  char buf[160];
  for (const auto& c : checks) {
    ok = ok && c.max_rel_error < kTolerance;
    rows.push_back({{"block", c.name}, {"entries", c.entries}, {"max_abs_error", c.max_abs_error},
                    {"max_rel_error", c.max_rel_error}});
    std::snprintf(buf, sizeof buf, "%-20s  %7zu  %12.3e  %12.3e\n", c.name.c_str(), c.entries, c.max_abs_error,
                  c.max_rel_error);
    table += buf;
  }
  art.write_json("gradcheck.json", {{"tolerance", kTolerance}, {"passed", ok}, {"blocks", rows}});
  art.write("gradcheck.txt", table);
  if (!ok) fail(ErrorKind::Runtime, "gradient check failed; see gradcheck.txt");
  return {{"passed", ok}, {"blocks", checks.size()}};
}

json dispatch(const Settings& s, Artifacts& art) {
  const auto& c = s.subcommand;
  if (c == "ingest") return cmd_ingest(s, art);
  if (c == "featurize") return cmd_featurize(s, art);
  if (c == "train") return cmd_train(s, art);
  if (c == "evaluate") return cmd_evaluate(s, art);
  if (c == "assess") return cmd_assess(s, art);
  if (c == "drift") return cmd_drift(s, art);
  if (c == "context") return cmd_context(s, art);
  if (c == "mine") return cmd_mine(s, art);
  return cmd_gradcheck(s, art);
}

std::string kind_label(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Io: return "io";
    case ErrorKind::Runtime: return "runtime";
  }
  return "runtime";
}

}  // namespace

bool is_subcommand(std::string_view name) {
  return std::find(kSubcommands.begin(), kSubcommands.end(), name) != kSubcommands.end();
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json run(const std::string& subcommand, const json& config) {
  if (!is_subcommand(subcommand)) fail(ErrorKind::InvalidArgument, "unknown subcommand '" + subcommand + "'");
  const Settings s = parse_settings(subcommand, config);
  Artifacts art(s.out);
  json manifest = {{"subcommand", subcommand},
                   {"config_hash", hex64(fnv1a(config.dump()))},
                   {"seed", s.seed},
                   {"versions",
                    {{"svassess", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
  try {
    json result = dispatch(s, art);
    manifest["status"] = "ok";
    manifest["artifacts"] = art.written();
    art.write_json("manifest_" + subcommand + ".json", manifest);
    result["out"] = s.out;
    result["artifacts"] = art.written();
    return result;
  } catch (const Error& e) {
    manifest["status"] = "error";
    manifest["error"] = {{"kind", kind_label(e.kind())}, {"message", e.what()}};
    manifest["artifacts"] = art.written();
    try {
      art.write_json("manifest_" + subcommand + ".json", manifest);
    } catch (const Error& io) {
      spdlog::error("could not write manifest: {}", io.what());
    }
    throw;
  } catch (const std::exception& e) {
    manifest["status"] = "error";
    manifest["error"] = {{"kind", "runtime"}, {"message", e.what()}};
    manifest["artifacts"] = art.written();
    try {
      art.write_json("manifest_" + subcommand + ".json", manifest);
    } catch (const Error& io) {
      spdlog::error("could not write manifest: {}", io.what());
    }
    throw Error(ErrorKind::Runtime, e.what());
  }
}

std::string metrics_table(const json& metrics) {
  std::string t;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %8s %8s %11s %8s  %s\n", "task", "accuracy", "macro_f1", "weighted_f1", "mcc",
                "selected");
  t += buf;
  auto row = [&](const std::string& name, const json& m, const std::string& sel) {
    if (m.is_null()) {
      std::snprintf(buf, sizeof buf, "%-18s %8s %8s %11s %8s  %s\n", name.c_str(), "n/a", "n/a", "n/a", "n/a",
                    sel.c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%-18s %8.4f %8.4f %11.4f %8.4f  %s\n", name.c_str(),
                    m.at("accuracy").get<double>(), m.at("macro_f1").get<double>(), m.at("weighted_f1").get<double>(),
                    m.at("mcc").get<double>(), sel.c_str());
    }
    std::string line = buf;
    while (line.size() > 1 && line[line.size() - 2] == ' ') line.erase(line.size() - 2, 1);
    t += line;
  };
  for (const auto& r : metrics.at("tasks"))
    row(r.at("task").get<std::string>(), r.at("metrics"), r.value("selected", ""));
  row("average", metrics.at("average"), "");
  return t;
}

}  // namespace svassess::pipeline
