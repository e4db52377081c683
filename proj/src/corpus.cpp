#include "svassess/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <regex>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace svassess::corpus {

using nlohmann::json;

const std::vector<std::string>& cvss_tasks() {
  static const std::vector<std::string> kTasks = {
      "confidentiality", "integrity", "availability", "access_vector",
      "access_complexity", "authentication", "severity"};
  return kTasks;
}

std::pair<int, int> Hunk::pre_range() const {
  if (pre_len == 0) return {std::max(pre_start, 1), std::max(pre_start, 1)};
  return {pre_start, pre_start + pre_len - 1};
}

std::pair<int, int> Hunk::post_range() const {
  if (post_len == 0) return {std::max(post_start, 1), std::max(post_start, 1)};
  return {post_start, post_start + post_len - 1};
}

std::string QaPost::full_text() const { return title + " " + body + " " + answers; }

std::string site_name(Site site) { return site == Site::SO ? "SO" : "SSE"; }

Site parse_site(std::string_view name) {
  if (name == "SO") return Site::SO;
  if (name == "SSE") return Site::SSE;
  fail(ErrorKind::InvalidArgument, "unknown site '" + std::string(name) + "' (expected SO or SSE)");
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

// Unified diff ------------------------------------------------------------

namespace {

std::string strip_diff_path(std::string_view raw) {
  std::string path = trim(raw);
  if (auto tab = path.find('\t'); tab != std::string::npos) path.resize(tab);
  if (path.rfind("a/", 0) == 0 || path.rfind("b/", 0) == 0) path = path.substr(2);
  return path;
}

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
  fail(ErrorKind::Parse, "diff line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<FileChange> parse_unified_diff(std::string_view text) {
  static const std::regex kHunkHeader(R"(^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@.*$)");
  const auto lines = split_lines(text);
  std::vector<FileChange> files;
  std::size_t i = 0;
  while (i < lines.size()) {
    const std::string& line = lines[i];
    if (line.rfind("--- ", 0) == 0 && i + 1 < lines.size() && lines[i + 1].rfind("+++ ", 0) == 0) {
      FileChange change;
      std::string pre = strip_diff_path(std::string_view(line).substr(4));
      std::string post = strip_diff_path(std::string_view(lines[i + 1]).substr(4));
      change.path = post == "/dev/null" ? pre : post;
      files.push_back(std::move(change));
      i += 2;
      continue;
    }
    if (line.rfind("@@", 0) == 0) {
      if (files.empty()) parse_error(i + 1, "hunk header before any file header");
      std::smatch m;
      if (!std::regex_match(line, m, kHunkHeader)) parse_error(i + 1, "malformed hunk header '" + line + "'");
      Hunk hunk;
      hunk.pre_start = std::stoi(m[1].str());
      hunk.pre_len = m[2].matched ? std::stoi(m[2].str()) : 1;
      hunk.post_start = std::stoi(m[3].str());
      hunk.post_len = m[4].matched ? std::stoi(m[4].str()) : 1;
      const std::size_t header_line = i + 1;
      int pre_seen = 0, post_seen = 0;
      ++i;
      while (pre_seen < hunk.pre_len || post_seen < hunk.post_len) {
        if (i >= lines.size())
          fail(ErrorKind::Parse, "diff line " + std::to_string(header_line) +
                                     ": hunk length mismatch (body ends early)");
        const std::string& body = lines[i];
        char op = body.empty() ? ' ' : body[0];
        std::string content = body.empty() ? std::string() : body.substr(1);
        if (op == '\\') {
          ++i;
          continue;
        }
        if (op == ' ') {
          ++pre_seen;
          ++post_seen;
          hunk.body.push_back({HunkLine::Op::Context, content});
        } else if (op == '-') {
          ++pre_seen;
          hunk.deleted.push_back(content);
          hunk.body.push_back({HunkLine::Op::Delete, content});
        } else if (op == '+') {
          ++post_seen;
          hunk.added.push_back(content);
          hunk.body.push_back({HunkLine::Op::Add, content});
        } else {
          fail(ErrorKind::Parse, "diff line " + std::to_string(header_line) +
                                     ": hunk length mismatch (unexpected line " +
                                     std::to_string(i + 1) + ")");
        }
        if (pre_seen > hunk.pre_len || post_seen > hunk.post_len)
          fail(ErrorKind::Parse, "diff line " + std::to_string(header_line) +
                                     ": hunk length mismatch (body longer than header)");
        ++i;
      }
      while (i < lines.size() && !lines[i].empty() && lines[i][0] == '\\') ++i;
      if (hunk.deleted.empty() && hunk.added.empty())
        fail(ErrorKind::Parse, "diff line " + std::to_string(header_line) + ": hunk has no changed lines");
      files.back().hunks.push_back(std::move(hunk));
      continue;
    }
    ++i;
  }
  return files;
}

std::string format_unified_diff(const std::vector<FileChange>& files) {
  std::ostringstream out;
  for (const auto& f : files) {
    out << "--- a/" << f.path << "\n+++ b/" << f.path << "\n";
    for (const auto& h : f.hunks) {
      out << "@@ -" << h.pre_start << "," << h.pre_len << " +" << h.post_start << ","
          << h.post_len << " @@\n";
      for (const auto& l : h.body) out << static_cast<char>(l.op) << l.text << "\n";
    }
  }
  return out.str();
}

std::string apply_hunks(const std::string& pre_source, const std::vector<Hunk>& hunks) {
  const auto pre = split_lines(pre_source);
  std::vector<std::string> post;
  std::size_t cursor = 0;  // next unconsumed pre line, 0-based
  for (const auto& h : hunks) {
    std::size_t first = h.pre_len == 0 ? static_cast<std::size_t>(h.pre_start)
                                        : static_cast<std::size_t>(h.pre_start - 1);
    if (first < cursor || first > pre.size())
      fail(ErrorKind::InvalidArgument, "hunk at -" + std::to_string(h.pre_start) + " out of order or range");
    while (cursor < first) post.push_back(pre[cursor++]);
    for (const auto& l : h.body) {
      if (l.op == HunkLine::Op::Add) {
        post.push_back(l.text);
        continue;
      }
      if (cursor >= pre.size() || pre[cursor] != l.text)
        fail(ErrorKind::InvalidArgument,
             "hunk at -" + std::to_string(h.pre_start) + " does not match source line " +
                 std::to_string(cursor + 1));
      if (l.op == HunkLine::Op::Context) post.push_back(pre[cursor]);
      ++cursor;
    }
  }
  while (cursor < pre.size()) post.push_back(pre[cursor++]);
  std::string out;
  for (const auto& l : post) {
    out += l;
    out += '\n';
  }
  if (!pre_source.empty() && pre_source.back() != '\n' && !out.empty()) out.pop_back();
  return out;
}

// Datasets ----------------------------------------------------------------

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "report") return DatasetKind::Report;
  if (name == "function") return DatasetKind::Function;
  if (name == "commit") return DatasetKind::Commit;
  if (name == "post") return DatasetKind::Post;
  fail(ErrorKind::InvalidArgument, "unknown dataset kind '" + std::string(name) + "'");
}

std::string dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Report: return "report";
    case DatasetKind::Function: return "function";
    case DatasetKind::Commit: return "commit";
    case DatasetKind::Post: return "post";
  }
  return "report";
}

std::size_t Dataset::size() const {
  switch (kind) {
    case DatasetKind::Report: return reports.size();
    case DatasetKind::Function: return functions.size();
    case DatasetKind::Commit: return commits.size();
    case DatasetKind::Post: return posts.size();
  }
  return 0;
}

std::string Dataset::id_at(std::size_t i) const {
  switch (kind) {
    case DatasetKind::Report: return reports.at(i).id;
    case DatasetKind::Function: return functions.at(i).id;
    case DatasetKind::Commit: return commits.at(i).id;
    case DatasetKind::Post: return posts.at(i).id;
  }
  return {};
}

Date Dataset::date_at(std::size_t i) const {
  switch (kind) {
    case DatasetKind::Report: return reports.at(i).published_date;
    case DatasetKind::Function: return functions.at(i).date;
    case DatasetKind::Commit: return commits.at(i).date;
    case DatasetKind::Post: break;
  }
  fail(ErrorKind::InvalidArgument, "post datasets carry no dates");
}

const Labels& Dataset::labels_at(std::size_t i) const {
  switch (kind) {
    case DatasetKind::Report: return reports.at(i).labels;
    case DatasetKind::Function: return functions.at(i).labels;
    case DatasetKind::Commit: return commits.at(i).labels;
    case DatasetKind::Post: break;
  }
  fail(ErrorKind::InvalidArgument, "post datasets carry no task labels");
}

namespace {

struct RecordReader {
  const json& j;
  std::size_t index;

  [[noreturn]] void bad(const std::string& field, const std::string& what) const {
    fail(ErrorKind::Schema, "record " + std::to_string(index) + ": field '" + field + "' " + what);
  }
  const json& field(const std::string& name) const {
    auto it = j.find(name);
    if (it == j.end()) bad(name, "is missing");
    return *it;
  }
  std::string str(const std::string& name) const {
    const json& v = field(name);
    if (!v.is_string()) bad(name, "must be a string");
    return v.get<std::string>();
  }
  Date date(const std::string& name) const {
    std::string s = str(name);
    try {
      return Date::parse(s);
    } catch (const Error&) {
      bad(name, "is not an ISO-8601 date");
    }
  }
  Labels labels() const {
    const json& v = field("labels");
    if (!v.is_object()) bad("labels", "must be an object");
    Labels out;
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (!it.value().is_string()) bad("labels." + it.key(), "must be a string");
      out[it.key()] = it.value().get<std::string>();
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& name) const {
    const json& v = field(name);
    if (!v.is_array()) bad(name, "must be an array");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) bad(name, "must contain only strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
};

void attach_sources(const RecordReader& r, CommitRecord& c) {
  auto it = r.j.find("sources");
  if (it == r.j.end()) return;
  if (!it->is_object()) r.bad("sources", "must be an object");
  for (auto& f : c.files) {
    auto s = it->find(f.path);
    if (s == it->end()) continue;
    if (auto pre = s->find("pre"); pre != s->end() && pre->is_string()) f.pre_source = pre->get<std::string>();
    if (auto post = s->find("post"); post != s->end() && post->is_string())
      f.post_source = post->get<std::string>();
  }
}

}  // namespace

Dataset parse_dataset(std::string_view jsonl, DatasetKind kind, const std::vector<std::string>& tasks) {
  Dataset ds;
  ds.kind = kind;
  ds.tasks = tasks;
  std::size_t index = 0;
  for (const auto& raw : split_lines(jsonl)) {
    if (trim(raw).empty()) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Schema, "record " + std::to_string(index) + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) fail(ErrorKind::Schema, "record " + std::to_string(index) + ": not a JSON object");
    RecordReader r{j, index};
    switch (kind) {
      case DatasetKind::Report:
        ds.reports.push_back({r.str("id"), r.str("description"), r.date("date"), r.labels()});
        break;
      case DatasetKind::Function: {
        FunctionRecord f;
        f.id = r.str("id");
        f.lines = r.strings("lines");
        const json& idx = r.field("vuln_idx");
        if (!idx.is_array()) r.bad("vuln_idx", "must be an array");
        for (const auto& e : idx) {
          if (!e.is_number_integer() || e.get<long long>() < 0) r.bad("vuln_idx", "must hold non-negative integers");
          f.vulnerable_line_indices.insert(e.get<std::size_t>());
        }
        f.date = r.date("date");
        f.labels = r.labels();
        ds.functions.push_back(std::move(f));
        break;
      }
      case DatasetKind::Commit: {
        CommitRecord c;
        c.id = r.str("id");
        c.project = r.str("project");
        c.date = r.date("date");
        try {
          c.files = parse_unified_diff(r.str("diff"));
        } catch (const Error& e) {
          r.bad("diff", std::string("does not parse: ") + e.what());
        }
        c.labels = r.labels();
        attach_sources(r, c);
        ds.commits.push_back(std::move(c));
        break;
      }
      case DatasetKind::Post: {
        QaPost p;
        p.id = r.str("id");
        try {
          p.site = parse_site(r.str("site"));
        } catch (const Error&) {
          r.bad("site", "must be SO or SSE");
        }
        p.title = r.str("title");
        p.body = r.str("body");
        p.answers = r.str("answers");
        for (auto& t : r.strings("tags")) p.tags.insert(t);
        std::string label = r.str("label");
        if (label == "positive") p.label = PostLabel::Positive;
        else if (label == "unlabeled") p.label = PostLabel::Unlabeled;
        else r.bad("label", "must be 'positive' or 'unlabeled'");
        p.word_count = split_whitespace(p.full_text()).size();
        ds.posts.push_back(std::move(p));
        break;
      }
    }
    ++index;
  }
  auto violations = validate_dataset(ds);
  if (!violations.empty()) {
    const auto& v = violations.front();
    std::size_t at = 0;
    for (std::size_t k = 0; k < ds.size(); ++k)
      if (ds.id_at(k) == v.record_id) at = k;
    fail(ErrorKind::Schema, "record " + std::to_string(at) + " ('" + v.record_id + "'): " + v.invariant);
  }
  return ds;
}

Dataset load_dataset(const std::string& path, DatasetKind kind, const std::vector<std::string>& tasks) {
  return parse_dataset(read_file(path), kind, tasks);
}

std::string serialize_dataset(const Dataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    json j;
    switch (ds.kind) {
      case DatasetKind::Report: {
        const auto& r = ds.reports[i];
        j = {{"id", r.id}, {"description", r.description}, {"date", r.published_date.iso()}, {"labels", r.labels}};
        break;
      }
      case DatasetKind::Function: {
        const auto& f = ds.functions[i];
        j = {{"id", f.id},
             {"lines", f.lines},
             {"vuln_idx", std::vector<std::size_t>(f.vulnerable_line_indices.begin(), f.vulnerable_line_indices.end())},
             {"date", f.date.iso()},
             {"labels", f.labels}};
        break;
      }
      case DatasetKind::Commit: {
        const auto& c = ds.commits[i];
        j = {{"id", c.id}, {"project", c.project}, {"date", c.date.iso()},
             {"diff", format_unified_diff(c.files)}, {"labels", c.labels}};
        json sources = json::object();
        for (const auto& f : c.files) {
          json s = json::object();
          if (f.pre_source) s["pre"] = *f.pre_source;
          if (f.post_source) s["post"] = *f.post_source;
          if (!s.empty()) sources[f.path] = s;
        }
        if (!sources.empty()) j["sources"] = sources;
        break;
      }
      case DatasetKind::Post: {
        const auto& p = ds.posts[i];
        j = {{"id", p.id}, {"site", site_name(p.site)}, {"title", p.title}, {"body", p.body},
             {"answers", p.answers}, {"tags", p.tags},
             {"label", p.label == PostLabel::Positive ? "positive" : "unlabeled"}};
        break;
      }
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::string& path) { write_file(path, serialize_dataset(ds)); }

namespace {

void check_labels(const Labels& labels, const std::vector<std::string>& tasks, const std::string& id,
                  std::vector<Violation>& out) {
  for (const auto& [task, cls] : labels) {
    if (std::find(tasks.begin(), tasks.end(), task) == tasks.end())
      out.push_back({id, "label task '" + task + "' not in the dataset's task list"});
  }
}

void check_hunk_fit(const Hunk& h, const std::optional<std::string>& source, bool pre_side,
                    const std::string& id, const std::string& path, std::vector<Violation>& out) {
  if (!source) return;
  const int n = static_cast<int>(split_lines(*source).size());
  const int start = pre_side ? h.pre_start : h.post_start;
  const int len = pre_side ? h.pre_len : h.post_len;
  if (start - 1 + len > n || (len > 0 && start < 1))
    out.push_back({id, "hunk range exceeds " + std::string(pre_side ? "pre" : "post") + "_source of " + path});
}

}  // namespace

std::vector<Violation> validate_dataset(const Dataset& ds) {
  std::vector<Violation> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string id = ds.id_at(i);
    if (id.empty()) out.push_back({id, "id must be non-empty"});
    if (!seen.insert(id).second) out.push_back({id, "duplicate id"});
    switch (ds.kind) {
      case DatasetKind::Report: {
        const auto& r = ds.reports[i];
        if (trim(r.description).empty()) out.push_back({id, "description must be non-empty"});
        check_labels(r.labels, ds.tasks, id, out);
        break;
      }
      case DatasetKind::Function: {
        const auto& f = ds.functions[i];
        if (f.vulnerable_line_indices.empty()) out.push_back({id, "vulnerable_line_indices must be non-empty"});
        for (auto v : f.vulnerable_line_indices)
          if (v >= f.lines.size()) {
            out.push_back({id, "vulnerable line index " + std::to_string(v) + " out of range"});
            break;
          }
        if (f.vulnerable_line_indices.size() >= f.lines.size())
          out.push_back({id, "function has no non-vulnerable line"});
        check_labels(f.labels, ds.tasks, id, out);
        break;
      }
      case DatasetKind::Commit: {
        const auto& c = ds.commits[i];
        if (c.files.empty()) out.push_back({id, "commit has no file changes"});
        for (const auto& f : c.files) {
          for (std::size_t k = 0; k < f.hunks.size(); ++k) {
            const auto& h = f.hunks[k];
            if ((h.pre_len > 0 && h.pre_start < 1) || (h.post_len > 0 && h.post_start < 1) ||
                h.pre_start < 0 || h.post_start < 0)
              out.push_back({id, "hunk line numbers must be >= 1 in " + f.path});
            if (h.deleted.empty() && h.added.empty())
              out.push_back({id, "hunk without deleted or added lines in " + f.path});
            if (k > 0 && f.hunks[k - 1].pre_start > h.pre_start)
              out.push_back({id, "hunks not ordered by pre_start in " + f.path});
            check_hunk_fit(h, f.pre_source, true, id, f.path, out);
            check_hunk_fit(h, f.post_source, false, id, f.path, out);
          }
        }
        check_labels(c.labels, ds.tasks, id, out);
        break;
      }
      case DatasetKind::Post: {
        const auto& p = ds.posts[i];
        if (p.word_count == 0) out.push_back({id, "post has no words"});
        break;
      }
    }
  }
  return out;
}

}  // namespace svassess::corpus
