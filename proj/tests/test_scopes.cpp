#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "svassess/common.hpp"
#include "svassess/scopes.hpp"
#include "svassess/textprep.hpp"

using namespace svassess;
using namespace svassess::scopes;

namespace {

corpus::FunctionRecord record(std::vector<std::string> lines, std::set<std::size_t> vuln) {
  corpus::FunctionRecord f;
  f.id = "f";
  f.lines = std::move(lines);
  f.vulnerable_line_indices = std::move(vuln);
  f.date = {2015, 1, 1};
  return f;
}

corpus::FunctionRecord random_function(Rng& rng) {
  static const std::vector<std::string> pool = {
      "int a = 0;", "a = b + 1;", "// note", "", "if (a > b) {", "}", "call(a, c);", "c = a * 2;",
      "return c;",  "b += a;",    "/* x */", "String s = \"{\";", "for (int i = 0; i < a; i++) {", "use(s);"};
  corpus::FunctionRecord f;
  f.id = "r";
  f.lines.push_back("void f(int b) {");
  const auto n = 3 + rng.index(15);
  for (std::size_t i = 0; i < n; ++i) f.lines.push_back(pool[rng.index(pool.size())]);
  f.lines.push_back("}");
  const auto mask = text::code_line_mask(f.lines);
  std::vector<std::size_t> code;
  for (std::size_t i = 1; i + 1 < f.lines.size(); ++i)
    if (mask[i]) code.push_back(i);
  if (code.empty()) {
    f.lines[1] = "a = b;";
    code.push_back(1);
  }
  const auto picks = 1 + rng.index(std::min<std::size_t>(3, code.size()));
  for (std::size_t k = 0; k < picks; ++k) f.vulnerable_line_indices.insert(code[rng.index(code.size())]);
  f.date = {2015, 1, 1};
  return f;
}

}  // namespace

TEST(ScopeTree, NestedChain) {
  const std::string src =
      "class A {\n"
      "  void m() {\n"
      "    if (x) {\n"
      "      y();\n"
      "    }\n"
      "  }\n"
      "}\n";
  auto t = parse_scopes(src);
  ASSERT_EQ(t.nodes.size(), 4u);
  EXPECT_EQ(t.nodes[1].kind, NodeKind::TypeDecl);
  EXPECT_EQ(t.nodes[2].kind, NodeKind::Method);
  EXPECT_EQ(t.nodes[3].kind, NodeKind::IfElse);
  EXPECT_EQ(t.nodes[3].parent, 2);
  EXPECT_EQ(t.nodes[3].depth, 3);
}

TEST(ScopeTree, TopLevelStatementsOnly) {
  auto t = parse_scopes("int a = 1;\nint b = 2;\n");
  EXPECT_EQ(t.nodes.size(), 1u);
}

TEST(ScopeTree, UnbalancedIsParseError) {
  try {
    parse_scopes("class A {\n  void m() {\n}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
  }
  EXPECT_THROW(parse_scopes("}\n"), Error);
}

TEST(ScopeTree, LambdasAndAnonymousClassesDissolve) {
  const std::string src =
      "class L {\n"
      "  void m() {\n"
      "    Runnable r = () -> {\n"
      "      work();\n"
      "    };\n"
      "    Object o = new Object() {\n"
      "    };\n"
      "  }\n"
      "}\n";
  auto t = parse_scopes(src);
  EXPECT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[extract_ces(t, 4, 4)].kind, NodeKind::Method);
}

TEST(ScopeTree, SwitchNode) {
  const std::string src =
      "class W {\n"
      "  int f(int k) {\n"
      "    switch (k) {\n"
      "      case 1: return 10;\n"
      "      default: return 0;\n"
      "    }\n"
      "  }\n"
      "}\n";
  auto t = parse_scopes(src);
  const auto& n = t.nodes[extract_ces(t, 4, 5)];
  EXPECT_EQ(n.kind, NodeKind::Switch);
  EXPECT_EQ(n.start_line, 3);
  EXPECT_EQ(n.end_line, 6);
}

class CesFixture : public ::testing::TestWithParam<fixture::CesCase> {};

TEST_P(CesFixture, MatchesHandTrace) {
  const auto& c = GetParam();
  auto t = parse_scopes(c.source);
  const auto& n = t.nodes[static_cast<std::size_t>(extract_ces(t, c.first, c.last))];
  EXPECT_EQ(node_kind_name(n.kind), node_kind_name(c.kind));
  EXPECT_EQ(n.start_line, c.start);
  EXPECT_EQ(n.end_line, c.end);
}

INSTANTIATE_TEST_SUITE_P(Fixtures, CesFixture, ::testing::ValuesIn(fixture::ces_cases()),
                         [](const auto& info) { return std::string(info.param.name); });

// Property: the CES encloses the range and no enclosing node is smaller.
TEST(Ces, ExhaustiveMinimality) {
  for (const auto& c : fixture::ces_cases()) {
    auto t = parse_scopes(c.source);
    const int lines = static_cast<int>(t.line_count);
    for (int a = 1; a <= lines; ++a)
      for (int b = a; b <= lines; ++b) {
        const auto& best = t.nodes[static_cast<std::size_t>(extract_ces(t, a, b))];
        EXPECT_LE(best.start_line, a);
        EXPECT_GE(best.end_line, b);
        for (const auto& n : t.nodes)
          if (n.start_line <= a && n.end_line >= b) EXPECT_GE(n.size, best.size);
      }
  }
}

TEST(Ces, LinesEmittedOncePerSpan) {
  auto lines = ces_lines(fixture::kSimpleClass, {{5, 5}, {6, 6}});
  EXPECT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines.front(), "  public void run() {");
}

TEST(Ces, CommitViews) {
  corpus::CommitRecord c;
  c.id = "c";
  c.files = corpus::parse_unified_diff(
      "--- a/A.java\n+++ b/A.java\n@@ -5,1 +5,1 @@\n-    int y = 1;\n+    int y = 2;\n");
  c.files[0].pre_source = fixture::kSimpleClass;
  std::string post = fixture::kSimpleClass;
  post.replace(post.find("y = 1"), 5, "y = 2");
  c.files[0].post_source = post;
  auto v = commit_views(c);
  EXPECT_EQ(v.pre_hunk, "    int y = 1;\n");
  EXPECT_EQ(v.post_hunk, "    int y = 2;\n");
  EXPECT_EQ(v.pre_ces, "  public void run() {\n    int y = 1;\n    x = y;\n  }\n");
  EXPECT_NE(v.post_ces.find("y = 2"), std::string::npos);
}

TEST(Context, Surrounding) {
  auto f = record({"a();", "b();", "c();", "d();", "e();"}, {2});
  ContextConfig cfg;
  EXPECT_EQ(surrounding_context(f, cfg), (LineSet{0, 1, 3, 4}));
  cfg.surrounding_n = 0;
  EXPECT_TRUE(surrounding_context(f, cfg).empty());
  auto g = record({"a();", "// c", "", "b();", "x();", "c();"}, {4});
  cfg.surrounding_n = 2;
  EXPECT_EQ(surrounding_context(g, cfg), (LineSet{0, 3, 5}));
}

TEST(Context, FunctionComplement) {
  Rng rng(71);
  for (int trial = 0; trial < 300; ++trial) {
    auto f = random_function(rng);
    const auto mask = text::code_line_mask(f.lines);
    auto fn = function_context(f);
    LineSet all;
    for (std::size_t i = 0; i < f.lines.size(); ++i)
      if (mask[i]) all.insert(i);
    LineSet uni = fn;
    for (auto v : f.vulnerable_line_indices) {
      EXPECT_FALSE(fn.count(v));
      if (mask[v]) uni.insert(v);
    }
    EXPECT_EQ(uni, all);
    ContextConfig cfg;
    cfg.surrounding_n = static_cast<int>(rng.index(5));
    auto s = surrounding_context(f, cfg);
    for (auto i : s) EXPECT_TRUE(fn.count(i));
    cfg.surrounding_n = 1000;
    EXPECT_EQ(surrounding_context(f, cfg), fn);
  }
}

TEST(Slice, PreambleFunction) {
  auto s = defuse_slice(fixture::preamble_function());
  EXPECT_EQ(s.backward, (LineSet{4, 5, 6}));
  EXPECT_EQ(s.forward, (LineSet{8, 9}));
}

TEST(Slice, LiteralOnlyAndChain) {
  auto lit = defuse_slice(record({"int a = 1;", "print(\"x\");", "a = 2;"}, {1}));
  EXPECT_TRUE(lit.backward.empty());
  EXPECT_TRUE(lit.forward.empty());
  auto chain = defuse_slice(record({"int a = 1;", "int b = a + 1;", "use(b);"}, {1}));
  EXPECT_EQ(chain.backward, LineSet{0});
  EXPECT_EQ(chain.forward, LineSet{2});
}

TEST(Slice, DirectionProperty) {
  Rng rng(72);
  for (int trial = 0; trial < 300; ++trial) {
    auto f = random_function(rng);
    auto s = defuse_slice(f);
    const auto first = *f.vulnerable_line_indices.begin();
    const auto last = *f.vulnerable_line_indices.rbegin();
    for (auto b : s.backward) EXPECT_LT(b, last);
    for (auto w : s.forward) EXPECT_GT(w, first);
    for (auto v : f.vulnerable_line_indices) {
      EXPECT_FALSE(s.backward.count(v));
      EXPECT_FALSE(s.forward.count(v));
    }
  }
}

TEST(Identifiers, DefsAndUses) {
  auto ids = line_identifiers("int total = count + offset;");
  EXPECT_TRUE(ids.defs.count("total"));
  EXPECT_TRUE(ids.uses.count("count"));
  EXPECT_FALSE(ids.uses.count("int"));
  auto cmp = line_identifiers("if (a == b) {");
  EXPECT_TRUE(cmp.defs.empty());
}

TEST(Inputs, ModesOnPreamble) {
  const auto f = fixture::preamble_function();
  ContextConfig cfg;
  auto vuln = build_input(f, parse_mode("vuln_only"), cfg, 1);
  ASSERT_EQ(vuln.tokens.size(), 1u);
  EXPECT_EQ(vuln.tokens[0], text::tokenize_code(f.lines[7]));

  auto whole = build_input(f, parse_mode("vuln+function"), cfg, 1);
  std::vector<std::string> all;
  for (const auto& l : f.lines) {
    auto t = text::tokenize_code(l);
    all.insert(all.end(), t.begin(), t.end());
  }
  EXPECT_EQ(whole.tokens[0], all);

  auto sep = build_input(f, parse_mode("vuln+slice:separate"), cfg, 1);
  ASSERT_EQ(sep.tokens.size(), 2u);
  EXPECT_EQ(sep.indices[0], std::vector<std::size_t>{7});
  EXPECT_EQ(sep.indices[1], (std::vector<std::size_t>{4, 5, 6, 8, 9}));

  auto nonvuln = build_input(f, parse_mode("nonvuln_random"), cfg, 1);
  EXPECT_EQ(nonvuln.indices[0].size(), 1u);
  EXPECT_NE(nonvuln.indices[0][0], 7u);
  EXPECT_EQ(build_input(f, parse_mode("nonvuln_random"), cfg, 1).indices, nonvuln.indices);

  EXPECT_EQ(mode_name(parse_mode("vuln+surrounding:separate")), "vuln+surrounding:separate");
  EXPECT_THROW(parse_mode("vuln_only:separate"), Error);
  EXPECT_THROW(parse_mode("bogus"), Error);
}
