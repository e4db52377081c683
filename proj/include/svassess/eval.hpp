#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svassess/common.hpp"

namespace svassess::eval {

struct DatedRecord {
  std::string id;
  Date date;
};

enum class Protocol { TimeKFold, Rounds12, Rounds10Wrap };

std::string protocol_name(Protocol p);
Protocol parse_protocol(const std::string& name);
// Protocols whose tuples must respect train < validation <= test in time.
bool is_time_ordered(Protocol p);

// Indices refer to the record list handed to the splitter.
struct SplitTuple {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct SplitPlan {
  Protocol protocol = Protocol::TimeKFold;
  std::vector<SplitTuple> tuples;
  // Fold membership for the fold-based protocols (empty for time_kfold).
  std::vector<std::vector<std::size_t>> folds;
};

SplitPlan time_kfold_splits(const std::vector<DatedRecord>& records, std::size_t k);
SplitPlan rounds12_splits(const std::vector<DatedRecord>& records);
SplitPlan rounds10_wrap_splits(const std::vector<DatedRecord>& records, std::uint64_t seed);

// Checks disjointness and, for time-ordered protocols, strict date ordering.
// Returns a description of the first problem, or an empty string.
std::string check_plan(const SplitPlan& plan, const std::vector<DatedRecord>& records);

// Metrics -------------------------------------------------------------------

struct ClassStats {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double mcc = 0.0;
  std::vector<std::string> labels;
  std::vector<ClassStats> per_class;
  // confusion[gold][predicted], rows/cols follow `labels`.
  std::vector<std::vector<std::size_t>> confusion;

  nlohmann::json to_json() const;
};

MetricReport compute_metrics(const std::vector<std::string>& gold, const std::vector<std::string>& predicted);

// Multi-class MCC from a square confusion matrix; 0 when undefined.
double mcc_from_confusion(const std::vector<std::vector<std::size_t>>& confusion);

// Grid search ---------------------------------------------------------------

struct Score {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double mcc = 0.0;
};

enum class Policy { Ch3, Mcc };

std::string policy_name(Policy p);
Policy parse_policy(const std::string& name);

struct GridPoint {
  std::string name;
  int hyperparameters = 0;
};

struct GridRow {
  std::string name;
  int hyperparameters = 0;
  Score mean;
  double train_seconds = 0.0;
  bool ok = false;
  std::string error;
};

struct GridOutcome {
  std::vector<GridRow> rows;
  std::size_t best = 0;

  // One line per grid point in config order; timings are left out so the
  // table is reproducible.
  std::string to_csv() const;
};

struct SelectionOptions {
  // Break remaining ties on measured training time. Off by default because
  // wall-clock time makes the choice non-reproducible.
  bool use_training_time = false;
};

// True when `a` should replace `b` as the incumbent.
bool prefer(const GridRow& a, const GridRow& b, Policy policy, const SelectionOptions& opt = {});

using FoldEvaluator = std::function<Score(std::size_t config, std::size_t split)>;

// Evaluates every (config, split) pair on up to `workers` threads and reduces
// per-config means in config order.
GridOutcome grid_search(const std::vector<GridPoint>& grid, std::size_t n_splits, const FoldEvaluator& evaluate,
                        Policy policy, std::size_t workers = 1, const SelectionOptions& opt = {});

}  // namespace svassess::eval
