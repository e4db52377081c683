#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "svassess/corpus.hpp"

namespace svassess::scopes {

enum class NodeKind { FileRoot, TypeDecl, Method, IfElse, Switch, Loop, TryCatch };

std::string node_kind_name(NodeKind kind);

struct ScopeNode {
  NodeKind kind = NodeKind::FileRoot;
  // 1-based, inclusive.
  int start_line = 1;
  int end_line = 1;
  // Lines in range holding code outside comments.
  std::size_t size = 0;
  int depth = 0;
  int parent = -1;
  std::vector<int> children;
};

struct ScopeTree {
  // nodes[0] is the file root.
  std::vector<ScopeNode> nodes;
  std::size_t line_count = 0;

  const ScopeNode& root() const { return nodes.front(); }
  nlohmann::json to_json() const;
};

// Brace-matching scope parser that ignores braces in comments and string or
// char literals. Throws a Parse error naming the line on unbalanced braces.
ScopeTree parse_scopes(std::string_view source);

// Index of the smallest node enclosing [first_line, last_line] (1-based).
// Size ties go to the deeper node; the root always qualifies.
int extract_ces(const ScopeTree& tree, int first_line, int last_line);

// Lines of every distinct CES for the given ranges, in line order, each span
// emitted once.
std::vector<std::string> ces_lines(std::string_view source, const std::vector<std::pair<int, int>>& ranges);

// The four textual views of a commit: deleted lines, added lines, and the
// pre/post closest enclosing scopes of all hunks, files in header order.
struct CommitViews {
  std::string pre_hunk;
  std::string post_hunk;
  std::string pre_ces;
  std::string post_ces;
};

CommitViews commit_views(const corpus::CommitRecord& commit);

// Function-level contexts ------------------------------------------------------

struct ContextConfig {
  int surrounding_n = 6;
  // A FunctionRecord already holds exactly one function, so windows never
  // leave it; the flag is kept for configuration compatibility.
  bool within_function_only = true;
};

using LineSet = std::set<std::size_t>;

LineSet surrounding_context(const corpus::FunctionRecord& rec, const ContextConfig& cfg);
LineSet function_context(const corpus::FunctionRecord& rec);

struct Slice {
  LineSet backward;
  LineSet forward;
};

// Line-level def-use approximation of a program slice around the vulnerable
// lines.
Slice defuse_slice(const corpus::FunctionRecord& rec);

// Identifier roles on one line of code, exposed for testing.
struct LineIdentifiers {
  std::set<std::string> uses;
  std::set<std::string> defs;
};
LineIdentifiers line_identifiers(std::string_view line);

enum class InputMode {
  VulnOnly,
  NonVulnRandom,
  NonVulnAll,
  VulnSlice,
  VulnSurrounding,
  VulnFunction,
};

struct ModeSpec {
  InputMode mode = InputMode::VulnOnly;
  // "+" modes only: vulnerable lines and context as two separate inputs.
  bool separate = false;
};

// "vuln_only", "nonvuln_random", "nonvuln_all", "vuln+slice",
// "vuln+surrounding", "vuln+function"; the "+" modes accept a ":separate"
// suffix.
ModeSpec parse_mode(const std::string& name);
std::string mode_name(const ModeSpec& mode);

struct BuiltInput {
  // One or two parts, each ordered by original line index.
  std::vector<std::vector<std::size_t>> indices;
  std::vector<std::vector<std::string>> tokens;
  bool short_sample = false;
};

BuiltInput build_input(const corpus::FunctionRecord& rec, const ModeSpec& mode, const ContextConfig& cfg,
                       std::uint64_t seed);

}  // namespace svassess::scopes
