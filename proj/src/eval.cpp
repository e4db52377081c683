#include "svassess/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace svassess::eval {

using nlohmann::json;

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::TimeKFold: return "time_kfold";
    case Protocol::Rounds12: return "rounds12";
    case Protocol::Rounds10Wrap: return "rounds10";
  }
  return "?";
}

Protocol parse_protocol(const std::string& name) {
  if (name == "time_kfold") return Protocol::TimeKFold;
  if (name == "rounds12") return Protocol::Rounds12;
  if (name == "rounds10" || name == "rounds10_wrap") return Protocol::Rounds10Wrap;
  fail(ErrorKind::InvalidArgument, "unknown protocol '" + name + "' (time_kfold, rounds12, rounds10)");
}

bool is_time_ordered(Protocol p) { return p != Protocol::Rounds10Wrap; }

namespace {

std::vector<std::size_t> sorted_by_date(const std::vector<DatedRecord>& records) {
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].date != records[b].date) return records[a].date < records[b].date;
    return records[a].id < records[b].id;
  });
  return idx;
}

// Fold sizes for n items in `folds` near-equal folds; the latest folds take
// the remainder.
std::vector<std::size_t> fold_targets(std::size_t n, std::size_t folds) {
  std::vector<std::size_t> t(folds, n / folds);
  for (std::size_t f = folds - n % folds; f < folds; ++f) ++t[f];
  return t;
}

}  // namespace

SplitPlan time_kfold_splits(const std::vector<DatedRecord>& records, std::size_t k) {
  if (k < 1) fail(ErrorKind::InvalidArgument, "time_kfold needs k >= 1");
  std::set<int> years;
  for (const auto& r : records) years.insert(r.date.year);
  if (years.size() < k + 1)
    fail(ErrorKind::InvalidArgument, "time_kfold with k = " + std::to_string(k) + " needs " + std::to_string(k + 1) +
                                         " distinct years, found " + std::to_string(years.size()));
  std::vector<int> ys(years.begin(), years.end());
  SplitPlan plan;
  plan.protocol = Protocol::TimeKFold;
  const auto idx = sorted_by_date(records);
  for (std::size_t f = ys.size() - k; f < ys.size(); ++f) {
    SplitTuple t;
    for (std::size_t i : idx) {
      const int y = records[i].date.year;
      if (y < ys[f]) t.train.push_back(i);
      else if (y == ys[f]) t.validation.push_back(i);
    }
    plan.tuples.push_back(std::move(t));
  }
  return plan;
}

SplitPlan rounds12_splits(const std::vector<DatedRecord>& records) {
  constexpr std::size_t kFolds = 12;
  if (records.size() < kFolds) fail(ErrorKind::InvalidArgument, "rounds12 needs at least 12 records");
  const auto idx = sorted_by_date(records);
  // Records sharing a date never straddle a fold boundary, which keeps the
  // train/validation/test dates strictly ordered.
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i : idx) {
    if (groups.empty() || records[groups.back().front()].date != records[i].date) groups.emplace_back();
    groups.back().push_back(i);
  }
  if (groups.size() < kFolds)
    fail(ErrorKind::InvalidArgument, "rounds12 needs at least 12 distinct dates, found " + std::to_string(groups.size()));

  const auto targets = fold_targets(records.size(), kFolds);
  SplitPlan plan;
  plan.protocol = Protocol::Rounds12;
  plan.folds.resize(kFolds);
  std::size_t f = 0, cum = 0, bound = targets[0];
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::size_t left = groups.size() - g;
    if (f + 1 < kFolds && !plan.folds[f].empty() && (cum >= bound || left <= kFolds - 1 - f)) {
      ++f;
      bound += targets[f];
    }
    plan.folds[f].insert(plan.folds[f].end(), groups[g].begin(), groups[g].end());
    cum += groups[g].size();
  }
  for (std::size_t i = 1; i + 1 < kFolds; ++i) {
    SplitTuple t;
    for (std::size_t j = 0; j < i; ++j) t.train.insert(t.train.end(), plan.folds[j].begin(), plan.folds[j].end());
    t.validation = plan.folds[i];
    t.test = plan.folds[i + 1];
    plan.tuples.push_back(std::move(t));
  }
  return plan;
}

SplitPlan rounds10_wrap_splits(const std::vector<DatedRecord>& records, std::uint64_t seed) {
  constexpr std::size_t kFolds = 10;
  if (records.size() < kFolds) fail(ErrorKind::InvalidArgument, "rounds10 needs at least 10 records");
  auto idx = sorted_by_date(records);
  Rng rng(seed);
  rng.shuffle(idx);
  const auto targets = fold_targets(records.size(), kFolds);
  SplitPlan plan;
  plan.protocol = Protocol::Rounds10Wrap;
  plan.folds.resize(kFolds);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < kFolds; ++f)
    for (std::size_t n = 0; n < targets[f]; ++n) plan.folds[f].push_back(idx[pos++]);
  // Round i (1-based) validates on fold i+1 and tests on fold i+2, wrapping
  // past the last fold.
  for (std::size_t i = 1; i <= kFolds; ++i) {
    const std::size_t v = i % kFolds;
    const std::size_t te = (i + 1) % kFolds;
    SplitTuple t;
    for (std::size_t j = 0; j < kFolds; ++j)
      if (j != v && j != te) t.train.insert(t.train.end(), plan.folds[j].begin(), plan.folds[j].end());
    t.validation = plan.folds[v];
    t.test = plan.folds[te];
    plan.tuples.push_back(std::move(t));
  }
  return plan;
}

std::string check_plan(const SplitPlan& plan, const std::vector<DatedRecord>& records) {
  for (std::size_t r = 0; r < plan.tuples.size(); ++r) {
    const auto& t = plan.tuples[r];
    const std::string where = "tuple " + std::to_string(r) + ": ";
    std::set<std::size_t> seen;
    for (const auto* part : {&t.train, &t.validation, &t.test})
      for (std::size_t i : *part) {
        if (i >= records.size()) return where + "index out of range";
        if (!seen.insert(i).second) return where + "record " + records[i].id + " appears twice";
      }
    if (!is_time_ordered(plan.protocol)) continue;
    auto max_of = [&](const std::vector<std::size_t>& v) {
      Date d{0, 1, 1};
      for (auto i : v) d = std::max(d, records[i].date);
      return d;
    };
    auto min_of = [&](const std::vector<std::size_t>& v) {
      Date d{9999, 12, 31};
      for (auto i : v) d = std::min(d, records[i].date);
      return d;
    };
    if (!t.train.empty() && !t.validation.empty() && !(max_of(t.train) < min_of(t.validation)))
      return where + "training data is not strictly older than validation data";
    if (!t.train.empty() && !t.test.empty() && !(max_of(t.train) < min_of(t.test)))
      return where + "training data is not strictly older than test data";
    if (!t.validation.empty() && !t.test.empty() && !(min_of(t.validation) <= min_of(t.test)))
      return where + "validation starts after test";
  }
  return {};
}

// Metrics -------------------------------------------------------------------

double mcc_from_confusion(const std::vector<std::vector<std::size_t>>& confusion) {
  const std::size_t k = confusion.size();
  double s = 0.0, c = 0.0;
  std::vector<double> p(k, 0.0), t(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    c += static_cast<double>(confusion[i][i]);
    for (std::size_t j = 0; j < k; ++j) {
      const auto v = static_cast<double>(confusion[i][j]);
      s += v;
      t[i] += v;
      p[j] += v;
    }
  }
  double pt = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    pt += p[i] * t[i];
    pp += p[i] * p[i];
    tt += t[i] * t[i];
  }
  const double denom = std::sqrt((s * s - pp) * (s * s - tt));
  if (!(denom > 0.0)) return 0.0;
  return (c * s - pt) / denom;
}

MetricReport compute_metrics(const std::vector<std::string>& gold, const std::vector<std::string>& predicted) {
  if (gold.size() != predicted.size())
    fail(ErrorKind::InvalidArgument, "gold (" + std::to_string(gold.size()) + ") and predicted (" +
                                         std::to_string(predicted.size()) + ") lengths differ");
  if (gold.empty()) fail(ErrorKind::InvalidArgument, "metrics need at least one sample");
  MetricReport m;
  std::set<std::string> labels(gold.begin(), gold.end());
  labels.insert(predicted.begin(), predicted.end());
  m.labels.assign(labels.begin(), labels.end());
  const std::size_t k = m.labels.size();
  auto index = [&](const std::string& l) {
    return static_cast<std::size_t>(std::lower_bound(m.labels.begin(), m.labels.end(), l) - m.labels.begin());
  };
  m.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) ++m.confusion[index(gold[i])][index(predicted[i])];

  const auto n = static_cast<double>(gold.size());
  std::size_t correct = 0;
  for (std::size_t c = 0; c < k; ++c) {
    correct += m.confusion[c][c];
    ClassStats st;
    st.label = m.labels[c];
    std::size_t pred = 0;
    for (std::size_t r = 0; r < k; ++r) pred += m.confusion[r][c];
    for (std::size_t j = 0; j < k; ++j) st.support += m.confusion[c][j];
    const auto tp = static_cast<double>(m.confusion[c][c]);
    st.precision = pred ? tp / static_cast<double>(pred) : 0.0;
    st.recall = st.support ? tp / static_cast<double>(st.support) : 0.0;
    st.f1 = st.precision + st.recall > 0.0 ? 2.0 * st.precision * st.recall / (st.precision + st.recall) : 0.0;
    m.macro_f1 += st.f1;
    m.weighted_f1 += st.f1 * static_cast<double>(st.support);
    m.per_class.push_back(st);
  }
  m.accuracy = static_cast<double>(correct) / n;
  m.macro_f1 /= static_cast<double>(k);
  m.weighted_f1 /= n;
  m.mcc = mcc_from_confusion(m.confusion);
  return m;
}

json MetricReport::to_json() const {
  json pc = json::array();
  for (const auto& c : per_class)
    pc.push_back({{"label", c.label}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
                  {"support", c.support}});
  return {{"accuracy", accuracy}, {"macro_f1", macro_f1}, {"weighted_f1", weighted_f1}, {"mcc", mcc},
          {"labels", labels},     {"per_class", pc},      {"confusion", confusion}};
}

// Grid search ---------------------------------------------------------------

std::string policy_name(Policy p) { return p == Policy::Ch3 ? "ch3" : "mcc"; }

Policy parse_policy(const std::string& name) {
  if (name == "ch3") return Policy::Ch3;
  if (name == "mcc") return Policy::Mcc;
  fail(ErrorKind::InvalidArgument, "unknown selection policy '" + name + "' (ch3, mcc)");
}

bool prefer(const GridRow& a, const GridRow& b, Policy policy, const SelectionOptions& opt) {
  if (a.ok != b.ok) return a.ok;
  if (policy == Policy::Ch3) {
    const bool a_ge = a.mean.accuracy >= b.mean.accuracy && a.mean.macro_f1 >= b.mean.macro_f1;
    const bool b_ge = b.mean.accuracy >= a.mean.accuracy && b.mean.macro_f1 >= a.mean.macro_f1;
    if (a_ge && !b_ge) return true;
    if (b_ge && !a_ge) return false;
    if (a.mean.weighted_f1 != b.mean.weighted_f1) return a.mean.weighted_f1 > b.mean.weighted_f1;
  } else if (a.mean.mcc != b.mean.mcc) {
    return a.mean.mcc > b.mean.mcc;
  }
  if (a.hyperparameters != b.hyperparameters) return a.hyperparameters < b.hyperparameters;
  if (opt.use_training_time && a.train_seconds != b.train_seconds) return a.train_seconds < b.train_seconds;
  return false;
}

GridOutcome grid_search(const std::vector<GridPoint>& grid, std::size_t n_splits, const FoldEvaluator& evaluate,
                        Policy policy, std::size_t workers, const SelectionOptions& opt) {
  if (grid.empty()) fail(ErrorKind::InvalidArgument, "grid search needs at least one configuration");
  if (n_splits == 0) fail(ErrorKind::InvalidArgument, "grid search needs at least one split");
  const std::size_t jobs = grid.size() * n_splits;
  std::vector<Score> scores(jobs);
  std::vector<double> seconds(jobs, 0.0);
  std::vector<std::string> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        scores[j] = evaluate(j / n_splits, j % n_splits);
      } catch (const std::exception& e) {
        errors[j] = e.what();
        if (errors[j].empty()) errors[j] = "unknown failure";
      }
      seconds[j] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, jobs));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  GridOutcome out;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    GridRow row;
    row.name = grid[c].name;
    row.hyperparameters = grid[c].hyperparameters;
    row.ok = true;
    for (std::size_t s = 0; s < n_splits; ++s) {
      const std::size_t j = c * n_splits + s;
      if (!errors[j].empty()) {
        row.ok = false;
        row.error = errors[j];
        break;
      }
      row.mean.accuracy += scores[j].accuracy;
      row.mean.macro_f1 += scores[j].macro_f1;
      row.mean.weighted_f1 += scores[j].weighted_f1;
      row.mean.mcc += scores[j].mcc;
      row.train_seconds += seconds[j];
    }
    if (row.ok) {
      const auto n = static_cast<double>(n_splits);
      row.mean.accuracy /= n;
      row.mean.macro_f1 /= n;
      row.mean.weighted_f1 /= n;
      row.mean.mcc /= n;
    } else {
      row.mean = {};
    }
    out.rows.push_back(std::move(row));
  }
  bool any = false;
  for (std::size_t c = 0; c < out.rows.size(); ++c) {
    if (!out.rows[c].ok) continue;
    if (!any || prefer(out.rows[c], out.rows[out.best], policy, opt)) out.best = c;
    any = true;
  }
  if (!any) fail(ErrorKind::Runtime, "every grid configuration failed; first error: " + out.rows.front().error);
  return out;
}

std::string GridOutcome::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "config,hyperparameters,ok,accuracy,macro_f1,weighted_f1,mcc,selected\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << '"' << r.name << "\"," << r.hyperparameters << ',' << (r.ok ? 1 : 0) << ',' << r.mean.accuracy << ','
       << r.mean.macro_f1 << ',' << r.mean.weighted_f1 << ',' << r.mean.mcc << ',' << (i == best ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace svassess::eval
