#include "svassess/scopes.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>

#include "svassess/common.hpp"
#include "svassess/textprep.hpp"

namespace svassess::scopes {

using nlohmann::json;

std::string node_kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::FileRoot: return "file_root";
    case NodeKind::TypeDecl: return "type_decl";
    case NodeKind::Method: return "method";
    case NodeKind::IfElse: return "if_else";
    case NodeKind::Switch: return "switch";
    case NodeKind::Loop: return "loop";
    case NodeKind::TryCatch: return "try_catch";
  }
  return "?";
}

json ScopeTree::to_json() const {
  json nodes_j = json::array();
  for (const auto& n : nodes)
    nodes_j.push_back({{"kind", node_kind_name(n.kind)},
                       {"start_line", n.start_line},
                       {"end_line", n.end_line},
                       {"size", n.size},
                       {"parent", n.parent},
                       {"children", n.children}});
  return {{"line_count", line_count}, {"nodes", nodes_j}};
}

namespace {

struct Tok {
  std::string text;
  int line;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

// Structural tokens only: words, literals collapse to a placeholder, and
// single punctuation chars except "->".
std::vector<Tok> lex(std::string_view s) {
  std::vector<Tok> out;
  int line = 1;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const char c = s[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '/' && i + 1 < n && s[i + 1] == '/') {
      while (i < n && s[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < n && s[i + 1] == '*') {
      i += 2;
      while (i < n && !(s[i] == '*' && i + 1 < n && s[i + 1] == '/')) {
        if (s[i] == '\n') ++line;
        ++i;
      }
      i = std::min(n, i + 2);
    } else if (c == '"' && s.substr(i, 3) == "\"\"\"") {
      const int start = line;
      i += 3;
      while (i < n && s.substr(i, 3) != "\"\"\"") {
        if (s[i] == '\\') ++i;
        else if (s[i] == '\n') ++line;
        ++i;
      }
      i = std::min(n, i + 3);
      out.push_back({"\"\"", start});
    } else if (c == '"' || c == '\'') {
      const int start = line;
      ++i;
      while (i < n && s[i] != c && s[i] != '\n') {
        if (s[i] == '\\') ++i;
        ++i;
      }
      if (i < n && s[i] == c) ++i;
      out.push_back({c == '"' ? "\"\"" : "''", start});
    } else if (ident_start(c)) {
      std::size_t j = i;
      while (j < n && ident_char(s[j])) ++j;
      out.push_back({std::string(s.substr(i, j - i)), line});
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < n && (ident_char(s[j]) || s[j] == '.')) ++j;
      out.push_back({"0", line});
      i = j;
    } else if (c == '-' && i + 1 < n && s[i + 1] == '>') {
      out.push_back({"->", line});
      i += 2;
    } else {
      out.push_back({std::string(1, c), line});
      ++i;
    }
  }
  return out;
}

bool is_type_keyword(const std::string& t) { return t == "class" || t == "interface" || t == "enum"; }

// Node kind for a block opened after `header`, or nothing for blocks that do
// not form a scope (anonymous classes, lambdas, initializers, plain blocks).
std::optional<NodeKind> classify(const std::vector<Tok>& header) {
  if (header.empty()) return std::nullopt;
  const std::string& first = header.front().text;
  if (first == "if" || first == "else") return NodeKind::IfElse;
  if (first == "switch") return NodeKind::Switch;
  if (first == "for" || first == "while" || first == "do") return NodeKind::Loop;
  if (first == "try" || first == "catch" || first == "finally") return NodeKind::TryCatch;
  int depth = 0;
  bool has_new = false, has_type_kw = false, has_arrow = false;
  int last_close = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto& t = header[i].text;
    if (t == "(") ++depth;
    else if (t == ")") {
      --depth;
      if (depth == 0) last_close = static_cast<int>(i);
    } else if (depth == 0) {
      if (t == "new") has_new = true;
      else if (is_type_keyword(t)) has_type_kw = true;
      else if (t == "->") has_arrow = true;
    }
  }
  if (has_new || has_arrow) return std::nullopt;
  if (has_type_kw) return NodeKind::TypeDecl;
  if (last_close < 0) return std::nullopt;
  // Method or constructor: name '(' ... ')' [throws A, B.C]
  std::size_t k = static_cast<std::size_t>(last_close) + 1;
  if (k < header.size()) {
    if (header[k].text != "throws") return std::nullopt;
    for (++k; k < header.size(); ++k) {
      const auto& t = header[k].text;
      if (!(t == "," || t == "." || t == "<" || t == ">" || ident_start(t[0]))) return std::nullopt;
    }
  }
  // Find the '(' matching last_close and require an identifier before it.
  depth = 0;
  for (int i = last_close; i >= 0; --i) {
    const auto& t = header[static_cast<std::size_t>(i)].text;
    if (t == ")") ++depth;
    else if (t == "(" && --depth == 0) {
      if (i == 0) return std::nullopt;
      const auto& name = header[static_cast<std::size_t>(i - 1)].text;
      if (!ident_start(name[0]) || text::is_java_keyword(name)) return std::nullopt;
      return NodeKind::Method;
    }
  }
  return std::nullopt;
}

}  // namespace

ScopeTree parse_scopes(std::string_view source) {
  const auto lines = corpus::split_lines(source);
  const auto mask = text::code_line_mask(lines);
  ScopeTree tree;
  tree.line_count = lines.size();
  ScopeNode root;
  root.kind = NodeKind::FileRoot;
  root.start_line = 1;
  root.end_line = std::max<int>(1, static_cast<int>(lines.size()));
  tree.nodes.push_back(root);

  struct Frame {
    int node;  // -1: block without a node
    int owner;
    int open_line;
  };
  std::vector<Frame> stack;
  std::vector<Tok> header;
  int paren = 0;
  auto current_owner = [&] { return stack.empty() ? 0 : stack.back().owner; };

  for (const auto& tok : lex(source)) {
    if (tok.text == "(") ++paren;
    else if (tok.text == ")") paren = std::max(0, paren - 1);
    if (tok.text == "{") {
      const auto kind = classify(header);
      int node = -1;
      if (kind) {
        ScopeNode n;
        n.kind = *kind;
        n.start_line = header.front().line;
        n.parent = current_owner();
        n.depth = tree.nodes[static_cast<std::size_t>(n.parent)].depth + 1;
        node = static_cast<int>(tree.nodes.size());
        tree.nodes[static_cast<std::size_t>(n.parent)].children.push_back(node);
        tree.nodes.push_back(n);
      }
      stack.push_back({node, node >= 0 ? node : current_owner(), tok.line});
      header.clear();
      paren = 0;
    } else if (tok.text == "}") {
      if (stack.empty()) fail(ErrorKind::Parse, "unbalanced '}' at line " + std::to_string(tok.line));
      if (stack.back().node >= 0) tree.nodes[static_cast<std::size_t>(stack.back().node)].end_line = tok.line;
      stack.pop_back();
      header.clear();
      paren = 0;
    } else if (tok.text == ";" && paren == 0) {
      header.clear();
    } else {
      header.push_back(tok);
    }
  }
  if (!stack.empty())
    fail(ErrorKind::Parse, "unclosed '{' opened at line " + std::to_string(stack.back().open_line));

  for (auto& n : tree.nodes) {
    n.size = 0;
    for (int l = n.start_line; l <= n.end_line && static_cast<std::size_t>(l) <= mask.size(); ++l)
      if (mask[static_cast<std::size_t>(l - 1)]) ++n.size;
  }
  return tree;
}

int extract_ces(const ScopeTree& tree, int first_line, int last_line) {
  if (first_line > last_line) std::swap(first_line, last_line);
  int best = 0;
  // Walk qualifying children only; a node that does not enclose the range
  // cannot have an enclosing descendant.
  std::vector<int> todo{0};
  while (!todo.empty()) {
    const int cur = todo.back();
    todo.pop_back();
    const auto& n = tree.nodes[static_cast<std::size_t>(cur)];
    const auto& b = tree.nodes[static_cast<std::size_t>(best)];
    if (n.size < b.size || (n.size == b.size && n.depth > b.depth)) best = cur;
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) {
      const auto& c = tree.nodes[static_cast<std::size_t>(*it)];
      if (c.start_line <= first_line && c.end_line >= last_line) todo.push_back(*it);
    }
  }
  return best;
}

std::vector<std::string> ces_lines(std::string_view source, const std::vector<std::pair<int, int>>& ranges) {
  const auto lines = corpus::split_lines(source);
  if (ranges.empty()) return {};
  const auto tree = parse_scopes(source);
  std::set<std::pair<int, int>> spans;
  for (const auto& [a, b] : ranges) {
    const auto& n = tree.nodes[static_cast<std::size_t>(extract_ces(tree, a, b))];
    spans.emplace(n.start_line, std::min<int>(n.end_line, static_cast<int>(lines.size())));
  }
  std::vector<std::string> out;
  int emitted_to = 0;
  for (const auto& [a, b] : spans)
    for (int l = std::max(a, emitted_to + 1); l <= b; ++l) {
      out.push_back(lines[static_cast<std::size_t>(l - 1)]);
      emitted_to = l;
    }
  return out;
}

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) {
    s += l;
    s += '\n';
  }
  return s;
}

}  // namespace

CommitViews commit_views(const corpus::CommitRecord& commit) {
  CommitViews v;
  for (const auto& f : commit.files) {
    std::vector<std::pair<int, int>> pre, post;
    for (const auto& h : f.hunks) {
      v.pre_hunk += join_lines(h.deleted);
      v.post_hunk += join_lines(h.added);
      pre.push_back(h.pre_range());
      post.push_back(h.post_range());
    }
    if (f.pre_source) v.pre_ces += join_lines(ces_lines(*f.pre_source, pre));
    if (f.post_source) v.post_ces += join_lines(ces_lines(*f.post_source, post));
  }
  return v;
}

// Contexts -------------------------------------------------------------------

LineSet function_context(const corpus::FunctionRecord& rec) {
  const auto mask = text::code_line_mask(rec.lines);
  LineSet out;
  for (std::size_t i = 0; i < rec.lines.size(); ++i)
    if (mask[i] && !rec.vulnerable_line_indices.count(i)) out.insert(i);
  return out;
}

LineSet surrounding_context(const corpus::FunctionRecord& rec, const ContextConfig& cfg) {
  if (cfg.surrounding_n < 0) fail(ErrorKind::InvalidArgument, "surrounding_n must be >= 0");
  const auto mask = text::code_line_mask(rec.lines);
  const auto n = static_cast<std::size_t>(cfg.surrounding_n);
  LineSet out;
  for (std::size_t v : rec.vulnerable_line_indices) {
    std::size_t taken = 0;
    for (std::size_t i = v; i-- > 0 && taken < n;)
      if (mask[i]) {
        ++taken;
        out.insert(i);
      }
    taken = 0;
    for (std::size_t i = v + 1; i < rec.lines.size() && taken < n; ++i)
      if (mask[i]) {
        ++taken;
        out.insert(i);
      }
  }
  for (std::size_t v : rec.vulnerable_line_indices) out.erase(v);
  return out;
}

LineIdentifiers line_identifiers(std::string_view line) {
  static const std::set<std::string> kAssign = {"=",  "+=", "-=", "*=",  "/=",  "%=",
                                                "&=", "|=", "^=", "<<=", ">>=", ">>>="};
  const auto toks = text::tokenize_code(line);
  LineIdentifiers out;
  auto ident = [&](std::size_t i) {
    return i < toks.size() && text::is_identifier(toks[i]) && !text::is_java_keyword(toks[i]);
  };
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (!ident(i)) continue;
    const bool after_dot = i > 0 && toks[i - 1] == ".";
    const bool is_call = i + 1 < toks.size() && toks[i + 1] == "(";
    if (after_dot || is_call) continue;
    const std::string& t = toks[i];
    out.uses.insert(t);
    const std::string next = i + 1 < toks.size() ? toks[i + 1] : "";
    const std::string prev = i > 0 ? toks[i - 1] : "";
    const bool declared = i > 0 && (ident(i - 1) || prev == ">" || prev == "]") &&
                          (next == ";" || next == "," || next == ":" || next == ")" || next.empty());
    const bool receiver = next == "." && ident(i + 2) && i + 3 < toks.size() && toks[i + 3] == "(";
    if (kAssign.count(next) || next == "++" || next == "--" || prev == "++" || prev == "--" || declared || receiver)
      out.defs.insert(t);
  }
  return out;
}

namespace {

bool intersects(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a)
    if (b.count(x)) return true;
  return false;
}

}  // namespace

Slice defuse_slice(const corpus::FunctionRecord& rec) {
  Slice s;
  if (rec.vulnerable_line_indices.empty()) return s;
  const auto mask = text::code_line_mask(rec.lines);
  std::vector<LineIdentifiers> ids(rec.lines.size());
  for (std::size_t i = 0; i < rec.lines.size(); ++i)
    if (mask[i]) ids[i] = line_identifiers(rec.lines[i]);

  std::set<std::string> used, defined;
  for (std::size_t v : rec.vulnerable_line_indices) {
    used.insert(ids[v].uses.begin(), ids[v].uses.end());
    defined.insert(ids[v].defs.begin(), ids[v].defs.end());
  }
  if (used.empty() && defined.empty()) return s;
  const std::size_t first_vuln = *rec.vulnerable_line_indices.begin();
  const std::size_t last_vuln = *rec.vulnerable_line_indices.rbegin();
  auto vulnerable = [&](std::size_t i) { return rec.vulnerable_line_indices.count(i) > 0; };

  // Backward: earlier definitions of the used identifiers, then one more
  // pass over what those lines use.
  for (int pass = 0; pass < 2; ++pass) {
    std::set<std::string> wanted = used;
    for (std::size_t b : s.backward) wanted.insert(ids[b].uses.begin(), ids[b].uses.end());
    for (std::size_t i = 0; i < first_vuln; ++i)
      if (mask[i] && intersects(ids[i].defs, wanted)) s.backward.insert(i);
  }
  // Headers of control blocks enclosing a vulnerable line.
  std::string src;
  for (const auto& l : rec.lines) src += l + "\n";
  try {
    const auto tree = parse_scopes(src);
    for (std::size_t v : rec.vulnerable_line_indices) {
      const int line = static_cast<int>(v) + 1;
      for (const auto& n : tree.nodes) {
        const bool control = n.kind == NodeKind::IfElse || n.kind == NodeKind::Switch || n.kind == NodeKind::Loop ||
                             n.kind == NodeKind::TryCatch;
        if (control && n.start_line < line && n.end_line >= line &&
            static_cast<std::size_t>(n.start_line - 1) < first_vuln)
          s.backward.insert(static_cast<std::size_t>(n.start_line - 1));
      }
    }
  } catch (const Error&) {
    // Unbalanced fragment: keep the data dependences only.
  }
  // Forward: later uses of identifiers the vulnerable lines define, plus one
  // transitive pass.
  for (int pass = 0; pass < 2; ++pass) {
    std::set<std::string> wanted = defined;
    for (std::size_t f : s.forward) wanted.insert(ids[f].defs.begin(), ids[f].defs.end());
    for (std::size_t i = last_vuln + 1; i < rec.lines.size(); ++i)
      if (mask[i] && intersects(ids[i].uses, wanted)) s.forward.insert(i);
  }
  for (std::size_t i = 0; i < rec.lines.size(); ++i)
    if (vulnerable(i)) {
      s.backward.erase(i);
      s.forward.erase(i);
    }
  return s;
}

// Inputs ---------------------------------------------------------------------

ModeSpec parse_mode(const std::string& name) {
  ModeSpec m;
  std::string base = name;
  const auto colon = name.find(':');
  if (colon != std::string::npos) {
    if (name.substr(colon + 1) != "separate")
      fail(ErrorKind::InvalidArgument, "unknown input mode suffix in '" + name + "'");
    m.separate = true;
    base = name.substr(0, colon);
  }
  static const std::map<std::string, InputMode> kModes = {
      {"vuln_only", InputMode::VulnOnly},         {"nonvuln_random", InputMode::NonVulnRandom},
      {"nonvuln_all", InputMode::NonVulnAll},     {"vuln+slice", InputMode::VulnSlice},
      {"vuln+surrounding", InputMode::VulnSurrounding}, {"vuln+function", InputMode::VulnFunction}};
  auto it = kModes.find(base);
  if (it == kModes.end()) fail(ErrorKind::InvalidArgument, "unknown input mode '" + name + "'");
  m.mode = it->second;
  const bool plus = m.mode == InputMode::VulnSlice || m.mode == InputMode::VulnSurrounding ||
                    m.mode == InputMode::VulnFunction;
  if (m.separate && !plus) fail(ErrorKind::InvalidArgument, "':separate' applies only to the '+' modes");
  return m;
}

std::string mode_name(const ModeSpec& mode) {
  std::string s;
  switch (mode.mode) {
    case InputMode::VulnOnly: s = "vuln_only"; break;
    case InputMode::NonVulnRandom: s = "nonvuln_random"; break;
    case InputMode::NonVulnAll: s = "nonvuln_all"; break;
    case InputMode::VulnSlice: s = "vuln+slice"; break;
    case InputMode::VulnSurrounding: s = "vuln+surrounding"; break;
    case InputMode::VulnFunction: s = "vuln+function"; break;
  }
  return mode.separate ? s + ":separate" : s;
}

BuiltInput build_input(const corpus::FunctionRecord& rec, const ModeSpec& mode, const ContextConfig& cfg,
                       std::uint64_t seed) {
  const LineSet vuln(rec.vulnerable_line_indices.begin(), rec.vulnerable_line_indices.end());
  BuiltInput out;
  LineSet context;
  bool plus = true;
  switch (mode.mode) {
    case InputMode::VulnOnly:
      plus = false;
      out.indices.emplace_back(vuln.begin(), vuln.end());
      break;
    case InputMode::NonVulnAll: {
      plus = false;
      auto all = function_context(rec);
      out.indices.emplace_back(all.begin(), all.end());
      break;
    }
    case InputMode::NonVulnRandom: {
      plus = false;
      auto all = function_context(rec);
      std::vector<std::size_t> pool(all.begin(), all.end());
      if (pool.size() < vuln.size()) {
        out.short_sample = true;
      } else {
        Rng rng(seed);
        rng.shuffle(pool);
        pool.resize(vuln.size());
        std::sort(pool.begin(), pool.end());
      }
      out.indices.push_back(std::move(pool));
      break;
    }
    case InputMode::VulnSlice: {
      auto s = defuse_slice(rec);
      context = s.backward;
      context.insert(s.forward.begin(), s.forward.end());
      break;
    }
    case InputMode::VulnSurrounding: context = surrounding_context(rec, cfg); break;
    case InputMode::VulnFunction: context = function_context(rec); break;
  }
  if (plus) {
    if (mode.separate) {
      out.indices.emplace_back(vuln.begin(), vuln.end());
      out.indices.emplace_back(context.begin(), context.end());
    } else {
      LineSet merged = vuln;
      merged.insert(context.begin(), context.end());
      out.indices.emplace_back(merged.begin(), merged.end());
    }
  }
  for (const auto& part : out.indices) {
    std::vector<std::string> toks;
    for (std::size_t i : part) {
      auto t = text::tokenize_code(rec.lines.at(i));
      toks.insert(toks.end(), t.begin(), t.end());
    }
    out.tokens.push_back(std::move(toks));
  }
  return out;
}

}  // namespace svassess::scopes
