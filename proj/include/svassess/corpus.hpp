#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "svassess/common.hpp"

namespace svassess::corpus {

// task name -> class label
using Labels = std::map<std::string, std::string>;

// Confidentiality, Integrity, Availability, Access Vector, Access Complexity,
// Authentication, Severity.
const std::vector<std::string>& cvss_tasks();

struct SvReport {
  std::string id;
  std::string description;
  Date published_date;
  Labels labels;
};

struct FunctionRecord {
  std::string id;
  std::vector<std::string> lines;
  std::set<std::size_t> vulnerable_line_indices;
  Labels labels;
  Date date;
};

struct HunkLine {
  enum class Op : char { Context = ' ', Delete = '-', Add = '+' };
  Op op;
  std::string text;
  bool operator==(const HunkLine&) const = default;
};

struct Hunk {
  int pre_start = 0;
  int pre_len = 0;
  int post_start = 0;
  int post_len = 0;
  std::vector<std::string> deleted;
  std::vector<std::string> added;
  // Full body in diff order, context included; used for line bookkeeping and
  // for re-applying the hunk.
  std::vector<HunkLine> body;

  // Inclusive 1-based line range touched on each side. A side with zero
  // length collapses onto its anchor line.
  std::pair<int, int> pre_range() const;
  std::pair<int, int> post_range() const;

  bool operator==(const Hunk&) const = default;
};

struct FileChange {
  std::string path;
  std::vector<Hunk> hunks;
  std::optional<std::string> pre_source;
  std::optional<std::string> post_source;

  bool operator==(const FileChange&) const = default;
};

struct CommitRecord {
  std::string id;
  std::string project;
  Date date;
  std::vector<FileChange> files;
  Labels labels;
};

enum class Site { SO, SSE };
enum class PostLabel { Positive, Unlabeled };

struct QaPost {
  std::string id;
  Site site = Site::SO;
  std::string title;
  std::string body;
  std::string answers;
  std::set<std::string> tags;
  std::size_t word_count = 0;
  PostLabel label = PostLabel::Unlabeled;

  // title, body and answers joined by single spaces.
  std::string full_text() const;
};

std::string site_name(Site site);
Site parse_site(std::string_view name);

// Unified diff ------------------------------------------------------------

std::vector<FileChange> parse_unified_diff(std::string_view text);
std::string format_unified_diff(const std::vector<FileChange>& files);

// Applies every hunk of `change` to `pre_source` and returns the post text.
std::string apply_hunks(const std::string& pre_source, const std::vector<Hunk>& hunks);

std::vector<std::string> split_lines(std::string_view text);

// Datasets ----------------------------------------------------------------

enum class DatasetKind { Report, Function, Commit, Post };

DatasetKind parse_dataset_kind(std::string_view name);
std::string dataset_kind_name(DatasetKind kind);

struct Dataset {
  DatasetKind kind = DatasetKind::Report;
  std::vector<std::string> tasks = cvss_tasks();
  std::vector<SvReport> reports;
  std::vector<FunctionRecord> functions;
  std::vector<CommitRecord> commits;
  std::vector<QaPost> posts;

  std::size_t size() const;
  std::string id_at(std::size_t i) const;
  Date date_at(std::size_t i) const;
  const Labels& labels_at(std::size_t i) const;
};

struct Violation {
  std::string record_id;
  std::string invariant;
  bool operator==(const Violation&) const = default;
};

// Reads JSONL, one record per line, and rejects any record breaking a type
// invariant. Errors name the record index and the offending field.
Dataset load_dataset(const std::string& path, DatasetKind kind,
                     const std::vector<std::string>& tasks = cvss_tasks());
Dataset parse_dataset(std::string_view jsonl, DatasetKind kind,
                      const std::vector<std::string>& tasks = cvss_tasks());

std::string serialize_dataset(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::string& path);

std::vector<Violation> validate_dataset(const Dataset& dataset);

}  // namespace svassess::corpus
