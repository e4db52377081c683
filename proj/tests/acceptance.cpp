// Acceptance gate: one PASS/FAIL line per criterion. Tolerances and time
// limits are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "neural_toy.hpp"
#include "oracles.hpp"
#include "svassess/common.hpp"
#include "svassess/eval.hpp"
#include "svassess/features.hpp"
#include "svassess/neural.hpp"
#include "svassess/pumine.hpp"
#include "svassess/reduce.hpp"
#include "svassess/scopes.hpp"

using namespace svassess;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kHelloWorldSeconds = 1.0;
constexpr double kGradcheckSeconds = 30.0;
constexpr double kOverfitSeconds = 120.0;
constexpr double kEndToEndSeconds = 60.0;
constexpr double kGradTolerance = 1e-4;
constexpr double kMetricTolerance = 1e-12;
constexpr double kCentroidTolerance = 1e-9;
constexpr double kLsaTolerance = 1e-6;
constexpr double kOverfitAccuracy = 0.95;
constexpr double kPuRecall = 0.9;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::multiset<std::string> bag(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

// 1 ------------------------------------------------------------------------------
Outcome hello_world() {
  const auto t0 = Clock::now();
  const features::TokenDoc doc{"Hello", "World"};
  Outcome o;
  o.pass = bag(features::word_ngrams(doc, 1, 1)) == bag({"Hello", "World"}) &&
           bag(features::word_ngrams(doc, 2, 2)) == bag({"Hello World"}) &&
           bag(features::char_ngrams(doc, 1, 1)) == bag({"H", "e", "l", "l", "o", "W", "o", "r", "l", "d"}) &&
           bag(features::char_ngrams(doc, 2, 2)) == bag({"He", "el", "ll", "lo", "o ", " W", "Wo", "or", "rl", "ld"});
  std::map<std::string, std::size_t> grams;
  for (const auto& g : features::char_ngrams(doc, 2, 2)) grams[g] = 1;
  const features::Vocabulary chars(features::VocabKind::Char, grams);
  const features::Vocabulary words(features::VocabKind::Word, {{"Hello", 1}, {"World", 1}});
  const auto agg = features::aggregate_char_word({doc}, words, chars, 2, 2, features::NlpConfig{});
  const std::set<std::string> kept(agg.selected_chars.begin(), agg.selected_chars.end());
  const std::set<std::string> expect{"He", "el", "ll", "lo", "Wo", "or", "rl", "ld"};
  o.pass = o.pass && kept == expect;
  const double secs = seconds_since(t0);
  o.pass = o.pass && secs < kHelloWorldSeconds;
  o.detail = std::to_string(kept.size()) + " char features kept, " + fmt(secs) + " s";
  return o;
}

// 2 ------------------------------------------------------------------------------
const std::vector<std::string>& english_lexicon() {
  static const std::vector<std::string> words = {
      "the", "of", "and", "to", "in", "is", "that", "for", "it", "as", "with", "was", "on", "be", "by",
      "this", "are", "or", "from", "at", "which", "an", "not", "have", "has", "but", "can", "were", "all", "their",
      "when", "there", "more", "other", "into", "some", "these", "than", "then", "only", "also", "after", "where",
      "would", "could", "should", "about", "through", "before", "between", "under", "while", "because", "system",
      "server", "remote", "attacker", "user", "file", "memory", "buffer", "overflow", "input", "request", "access",
      "service", "function", "value", "allows", "execute", "arbitrary", "code", "via", "crafted", "denial", "version",
      "earlier", "multiple", "vulnerability", "information", "sensitive", "cause", "application", "parameter",
      "script", "web", "cross", "site", "injection", "command", "network", "local", "privileges", "gain", "obtain",
      "bypass", "restrictions", "authentication", "password", "session", "data", "length", "error", "handling",
      "improper", "validation", "certain", "unspecified", "vectors", "component", "module", "library", "kernel",
      "driver", "packet", "header", "string", "format", "integer", "pointer", "dereference", "release", "update",
      "patch", "issue", "product", "manager", "interface", "control", "content", "message", "response", "process"};
  return words;
}

// Novel words from a character bigram chain fitted on the lexicon.
class CharChain {
 public:
  CharChain() {
    for (const auto& w : english_lexicon()) {
      char prev = '^';
      for (char c : w) {
        next_[prev].push_back(c);
        prev = c;
      }
      next_[prev].push_back('$');
    }
  }
  std::string word(Rng& rng) const {
    std::string w;
    char prev = '^';
    while (w.size() < 10) {
      const auto& opts = next_.at(prev);
      const char c = opts[rng.index(opts.size())];
      if (c == '$') {
        if (w.size() >= 3) break;
        continue;
      }
      w += c;
      prev = c;
    }
    return w;
  }

 private:
  std::map<char, std::string> next_;
};

Outcome oov_robustness() {
  Rng rng(2024);
  const auto& lexicon = english_lexicon();
  // Zipf-like rank draw so function words dominate.
  auto draw = [&] {
    const double u = rng.uniform();
    return lexicon[static_cast<std::size_t>(std::pow(u, 2.5) * static_cast<double>(lexicon.size()))];
  };
  std::vector<features::TokenDoc> train;
  for (int d = 0; d < 100; ++d) {
    features::TokenDoc doc;
    for (auto n = 8 + rng.index(13); n > 0; --n) doc.push_back(draw());
    train.push_back(doc);
  }
  features::NlpConfig cfg;
  cfg.char_min = 2;
  cfg.char_max = 3;
  const auto model = features::fit_char_model(train, cfg);
  std::set<std::string> seen;
  for (const auto& d : train)
    for (const auto& w : d) seen.insert(w);
  const CharChain chain;
  std::size_t covered = 0, unseen_words = 0;
  for (int d = 0; d < 1000; ++d) {
    features::TokenDoc doc;
    for (auto n = 4 + rng.index(9); n > 0; --n) {
      doc.push_back(rng.uniform() < 0.5 ? draw() : chain.word(rng));
      unseen_words += !seen.count(doc.back());
    }
    covered += !model.transform(doc).empty();
  }
  Outcome o;
  o.pass = covered == 1000;
  o.detail = std::to_string(covered) + "/1000 held-out docs with a non-zero feature (" + std::to_string(unseen_words) +
             " unseen words, " + std::to_string(model.width()) + " char features)";
  return o;
}


// 3 ------------------------------------------------------------------------------
// Recomputed here: max(train) < min(validation) <= min(test), all sets disjoint.
std::string ordering_problem(const eval::SplitPlan& plan, const std::vector<eval::DatedRecord>& recs,
                             bool time_ordered) {
  for (std::size_t t = 0; t < plan.tuples.size(); ++t) {
    const auto& tu = plan.tuples[t];
    std::set<std::size_t> all;
    for (const auto* part : {&tu.train, &tu.validation, &tu.test})
      for (auto i : *part)
        if (!all.insert(i).second) return "tuple " + std::to_string(t) + " reuses record " + recs[i].id;
    if (!time_ordered || tu.train.empty() || tu.validation.empty()) continue;
    Date train_max = recs[tu.train.front()].date, val_min = recs[tu.validation.front()].date;
    for (auto i : tu.train) train_max = std::max(train_max, recs[i].date);
    for (auto i : tu.validation) val_min = std::min(val_min, recs[i].date);
    if (!(train_max < val_min)) return "tuple " + std::to_string(t) + " trains on or after its validation dates";
    for (auto i : tu.test)
      if (recs[i].date < val_min) return "tuple " + std::to_string(t) + " tests before its validation dates";
  }
  return {};
}

Outcome temporal_leakage() {
  Rng rng(303);
  std::size_t tuples = 0;
  Outcome o;
  for (int trial = 0; trial < 500 && o.pass; ++trial) {
    std::vector<eval::DatedRecord> recs;
    const auto n = 24 + rng.index(200);
    for (std::size_t i = 0; i < n; ++i)
      recs.push_back({"r" + std::to_string(i),
                      {2008 + static_cast<int>(rng.index(10)), 1 + static_cast<int>(rng.index(12)),
                       1 + static_cast<int>(rng.index(28))}});
    std::set<int> years;
    for (const auto& r : recs) years.insert(r.date.year);
    const auto tk = eval::time_kfold_splits(recs, 1 + rng.index(years.size() - 1));
    const auto r12 = eval::rounds12_splits(recs);
    const auto r10 = eval::rounds10_wrap_splits(recs, static_cast<std::uint64_t>(trial));
    for (const auto* plan : {&tk, &r12, &r10}) {
      auto problem = ordering_problem(*plan, recs, plan != &r10);
      if (problem.empty()) problem = eval::check_plan(*plan, recs);
      if (!problem.empty()) {
        o.pass = false;
        o.detail = eval::protocol_name(plan->protocol) + ": " + problem;
      }
      tuples += plan->tuples.size();
    }
    if (r12.tuples.size() != 10 || r12.folds.size() != 12) {
      o.pass = false;
      o.detail = "rounds12 produced " + std::to_string(r12.tuples.size()) + " rounds over " +
                 std::to_string(r12.folds.size()) + " folds";
    }
  }
  if (o.pass)
    o.detail = std::to_string(tuples) +
               " tuples; time_kfold and rounds12 strictly date-ordered, rounds10 (shuffled by design) disjoint";
  return o;
}

// 4 ------------------------------------------------------------------------------
Outcome metric_oracle() {
  Rng rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = 2 + rng.index(4);
    const auto n = 1 + rng.index(200);
    std::vector<std::string> gold, pred;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back("c" + std::to_string(rng.index(k)));
      pred.push_back("c" + std::to_string(rng.index(k)));
    }
    const auto m = eval::compute_metrics(gold, pred);
    const auto b = oracle::brute_metrics(gold, pred);
    worst = std::max({worst, std::abs(m.accuracy - b.accuracy), std::abs(m.macro_f1 - b.macro_f1),
                      std::abs(m.weighted_f1 - b.weighted_f1), std::abs(m.mcc - b.mcc)});
  }
  return {worst <= kMetricTolerance, "max deviation " + fmt(worst) + " over 1000 instances"};
}

// 5 ------------------------------------------------------------------------------
Outcome gradient_check() {
  const auto t0 = Clock::now();
  const auto cfg = toy::config(2);
  const neural::Parameters params(cfg, 5);
  Rng rng(505);
  const auto x = toy::sample(cfg, rng);
  const auto blocks = toy::finite_difference(params, x, 1e-5);
  double worst = 0.0;
  std::size_t entries = 0;
  for (const auto& b : blocks) {
    worst = std::max(worst, b.max_rel);
    entries += b.entries;
  }
  const double secs = seconds_since(t0);
  return {worst < kGradTolerance && secs < kGradcheckSeconds,
          std::to_string(blocks.size()) + " blocks, " + std::to_string(entries) + " entries, max rel error " +
              fmt(worst) + ", " + fmt(secs) + " s"};
}

// 6 ------------------------------------------------------------------------------
Outcome toy_overfit() {
  const auto t0 = Clock::now();
  auto cfg = toy::config(7);
  cfg.learning_rate = 0.01;
  cfg.batch_size = 8;
  cfg.epochs = 200;
  cfg.patience = 200;
  cfg.seed = 6;
  // Each task's class is marked by one token in one input; the rest is noise.
  Rng rng(606);
  std::vector<neural::Sample> data;
  for (int i = 0; i < 40; ++i) {
    neural::Sample s;
    for (int in = 0; in < cfg.inputs; ++in) {
      std::vector<int> ids(static_cast<std::size_t>(cfg.input_len), 0);
      for (std::size_t k = 0; k < 8; ++k) ids[k] = 31 + static_cast<int>(rng.index(19));
      s.inputs.push_back(ids);
    }
    for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
      const int y = static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.tasks[t].classes)));
      s.labels.push_back(y);
      auto& seq = s.inputs[t % static_cast<std::size_t>(cfg.inputs)];
      std::size_t pos = rng.index(12);
      while (seq[pos] >= 10 && seq[pos] <= 30) pos = rng.index(12);
      seq[pos] = 10 + 3 * static_cast<int>(t) + y;
    }
    data.push_back(s);
  }
  const auto result = neural::train_acgru(cfg, data, data);
  double worst_acc = 1.0;
  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    std::size_t hit = 0;
    for (const auto& s : data) hit += neural::predict_acgru(result.best, s).classes[t] == s.labels[t];
    worst_acc = std::min(worst_acc, static_cast<double>(hit) / static_cast<double>(data.size()));
  }
  bool positive = true, window_ok = true;
  double prev_best = std::numeric_limits<double>::infinity();
  const auto& h = result.history;
  for (std::size_t e = 0; e < h.size(); ++e) {
    positive = positive && h[e].train_loss > 0.0;
    if (e + 1 < 10) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = e + 1 - 10; j <= e; ++j) best = std::min(best, h[j].train_loss);
    window_ok = window_ok && best <= prev_best;
    prev_best = best;
  }
  const double secs = seconds_since(t0);
  return {worst_acc >= kOverfitAccuracy && positive && window_ok && secs < kOverfitSeconds,
          "min per-task train accuracy " + fmt(worst_acc) + " after " + std::to_string(h.size()) +
              " epochs, final loss " + fmt(h.empty() ? 0.0 : h.back().train_loss) +
              (window_ok ? ", windowed best loss non-increasing" : ", windowed best loss increased") + ", " +
              fmt(secs) + " s"};
}

// 7 ------------------------------------------------------------------------------
double cosine_dist(const std::vector<double>& a, const std::vector<double>& b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(1.0L - ab / std::sqrt(aa * bb));
}

Outcome pu_stage_one() {
  Rng rng(707);
  std::size_t checked = 0;
  bool condition = true, monotone = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<pumine::Vec> p, u;
    for (int i = 0; i < 20; ++i) p.push_back({2 + rng.normal(), 1 + rng.normal(), rng.normal(), 0.5 * rng.normal()});
    for (int i = 0; i < 40; ++i) u.push_back({rng.normal(), 1 + rng.normal(), 2 + rng.normal(), 0.5 * rng.normal()});
    std::vector<std::size_t> prev;
    for (double alpha : {0.0, 0.1, 0.3, 0.5, 0.8, 1.0, 1.5, 2.0, 5.0}) {
      const auto rn = pumine::reliable_negatives(p, u, alpha);
      // Centroids recomputed here rather than taken from the result.
      std::vector<double> cp(4, 0.0), cu(4, 0.0);
      for (const auto& v : p)
        for (int d = 0; d < 4; ++d) cp[d] += v[d] / 20.0;
      for (const auto& v : u)
        for (int d = 0; d < 4; ++d) cu[d] += v[d] / 40.0;
      for (auto i : rn.indices) {
        condition = condition && cosine_dist(u[i], cu) < alpha * cosine_dist(u[i], cp) + 1e-12;
        ++checked;
      }
      monotone = monotone && std::includes(rn.indices.begin(), rn.indices.end(), prev.begin(), prev.end());
      prev = rn.indices;
    }
  }
  // Incremental centroid against a running long-double sum.
  std::vector<double> c;
  std::vector<long double> sum(5, 0.0L);
  std::size_t n = 0;
  double worst = 0.0;
  for (int step = 0; step < 10000; ++step) {
    std::vector<pumine::Vec> fresh;
    for (auto k = 1 + rng.index(3); k > 0; --k) {
      pumine::Vec v(5);
      for (auto& x : v) x = rng.normal() * 10.0;
      fresh.push_back(v);
    }
    c = n == 0 ? pumine::centroid(fresh) : pumine::update_centroid(c, n, fresh);
    for (const auto& v : fresh)
      for (int d = 0; d < 5; ++d) sum[d] += v[d];
    n += fresh.size();
    for (int d = 0; d < 5; ++d)
      worst = std::max(worst, std::abs(c[d] - static_cast<double>(sum[d] / static_cast<long double>(n))));
  }
  return {condition && monotone && worst <= kCentroidTolerance,
          std::to_string(checked) + " negatives re-checked, monotone " + (monotone ? "yes" : "no") +
              ", centroid drift " + fmt(worst) + " after 10000 updates"};
}

// 8 ------------------------------------------------------------------------------
Outcome pu_end_to_end() {
  Rng rng(808);
  // Positives and negatives are mirror images across the diagonal.
  auto draw = [&](bool positive) {
    pumine::Vec v{3.0, 1.0, 1.0, 1.0, 1.0};
    if (!positive) std::swap(v[0], v[1]);
    for (auto& x : v) x += 0.5 * rng.normal();
    return v;
  };
  std::vector<pumine::Vec> p, u, held_out;
  for (int i = 0; i < 100; ++i) p.push_back(draw(true));
  for (int i = 0; i < 200; ++i) u.push_back(draw(i % 2 == 0));
  for (int i = 0; i < 200; ++i) held_out.push_back(draw(true));
  pumine::PuConfig cfg;
  cfg.alpha = 1.0;
  const auto model = pumine::pu_train(p, u, cfg, 8);
  std::size_t hit = 0;
  for (const auto& x : held_out) hit += model.is_positive(x);
  const double recall = static_cast<double>(hit) / static_cast<double>(held_out.size());
  return {recall >= kPuRecall, "held-out positive recall " + fmt(recall) + " with " +
                                   std::to_string(model.reliable_negative_count) + " reliable negatives"};
}

// 9 ------------------------------------------------------------------------------
Outcome content_filter_defaults() {
  const json expect = json::parse(R"({
    "SO":  {"step1": {"min_count": 1, "min_ratio": 0.011}, "step2": {"min_count": 3, "min_ratio": 0.017}},
    "SSE": {"step1": {"min_count": 2, "min_ratio": 0.017}, "step2": {"min_count": 3, "min_ratio": 0.025}}})");
  const std::string emitted = pumine::ContentFilterConfig::defaults().to_json().dump();
  const bool table = emitted == expect.dump();
  std::string text;
  for (int i = 0; i < 100; ++i) text += (i % 33 == 0 && i < 99 ? "exploit " : "word ");
  const auto m = pumine::keyword_metrics(text, pumine::KeywordSet({"exploit"}));
  const bool ratio = m.count == 3 && m.words == 100 && m.ratio == 0.03;
  return {table && ratio, std::string("emitted config ") + (table ? "matches" : "differs") + ", 3/100 -> " +
                              fmt(m.ratio) + (ratio ? " (exact)" : "")};
}

// 10 -----------------------------------------------------------------------------
Outcome ces_fixtures() {
  std::size_t ok = 0;
  std::string first_miss;
  const auto cases = fixture::ces_cases();
  for (const auto& c : cases) {
    const auto tree = scopes::parse_scopes(c.source);
    const auto& n = tree.nodes[static_cast<std::size_t>(scopes::extract_ces(tree, c.first, c.last))];
    if (n.kind == c.kind && n.start_line == c.start && n.end_line == c.end) ++ok;
    else if (first_miss.empty()) first_miss = c.name;
  }
  return {ok == cases.size() && cases.size() == 12,
          std::to_string(ok) + "/" + std::to_string(cases.size()) + " fixtures" +
              (first_miss.empty() ? "" : ", first mismatch " + first_miss)};
}

// 11 -----------------------------------------------------------------------------
Outcome lsa_oracle() {
  Rng rng(1111);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    oracle::Mat a(20, std::vector<double>(15));
    Eigen::MatrixXd e(20, 15);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 15; ++j) e(i, j) = a[i][j] = rng.normal();
    std::vector<double> sigma;
    oracle::Mat v;
    oracle::jacobi_svd(a, sigma, v);
    reduce::LsaOptions opt;
    opt.seed = static_cast<std::uint64_t>(trial);
    const auto m = reduce::lsa_fit(e, 4, opt);
    oracle::Mat comp(15, std::vector<double>(4));
    for (int i = 0; i < 15; ++i)
      for (int j = 0; j < 4; ++j) comp[i][j] = m.components(i, j);
    worst = std::max(worst,
                     std::abs(oracle::reconstruction_error(a, comp, 4) - oracle::reconstruction_error(a, v, 4)));
  }
  return {worst <= kLsaTolerance, "max reconstruction gap " + fmt(worst) + " over 100 matrices"};
}

// 12 -----------------------------------------------------------------------------
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files[e.path().filename().string()] = read_file(e.path().string());
  return files;
}

Outcome end_to_end_cli() {
  const fs::path work = fs::current_path() / "acceptance_e2e";
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path out = work / "out";
  const json cfg = {{"dataset", SVA_SOURCE_DIR "/data/synthetic_reports.jsonl"},
                    {"granularity", "report"},
                    {"nlp_configs", {1, 2}},
                    {"models", {"naive_bayes", "logistic_regression"}},
                    {"protocol", "time_kfold"},
                    {"policy", "ch3"},
                    {"seed", 42},
                    {"out", out.string()}};
  write_file((work / "config.json").string(), cfg.dump(2));
  auto run_all = [&](double& secs) {
    const auto t0 = Clock::now();
    for (const char* sub : {"ingest", "train", "evaluate"}) {
      const std::string cmd = std::string(SVA_ASSESS_BIN) + " " + sub + " --config " + (work / "config.json").string() +
                              " > " + (work / (std::string(sub) + ".log")).string() + " 2>&1";
      if (std::system(cmd.c_str()) != 0) return std::string(sub) + " failed";
    }
    secs = seconds_since(t0);
    return std::string();
  };
  double first_secs = 0.0, second_secs = 0.0;
  if (auto err = run_all(first_secs); !err.empty()) return {false, err};
  const auto first = snapshot(out);
  if (auto err = run_all(second_secs); !err.empty()) return {false, "rerun: " + err};
  const auto second = snapshot(out);

  const auto metrics = json::parse(first.at("metrics.json"));
  bool complete = metrics.at("tasks").size() == 7;
  for (const auto& t : metrics.at("tasks")) complete = complete && !t.at("metrics").is_null();
  complete = complete && !metrics.at("average").is_null();
  const bool identical = first == second;
  return {complete && identical && first_secs < kEndToEndSeconds,
          std::string(complete ? "7-task report" : "incomplete report") + ", rerun " +
              (identical ? "byte-identical" : "differs") + " across " + std::to_string(first.size()) + " files, " +
              fmt(first_secs) + " s"};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, hello_world},  {2, oov_robustness},         {3, temporal_leakage}, {4, metric_oracle},
      {5, gradient_check}, {6, toy_overfit},           {7, pu_stage_one},     {8, pu_end_to_end},
      {9, content_filter_defaults}, {10, ces_fixtures}, {11, lsa_oracle},      {12, end_to_end_cli},
  };
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
