#pragma once

// Hand-traced inputs shared by the unit tests and the acceptance binary.

#include <string>
#include <vector>

#include "svassess/corpus.hpp"
#include "svassess/scopes.hpp"

namespace fixture {

struct CesCase {
  const char* name;
  const char* source;
  int first;
  int last;
  svassess::scopes::NodeKind kind;
  int start;
  int end;
};

inline const char* const kSimpleClass =
    "public class A {\n"
    "  private int x;\n"
    "\n"
    "  public void run() {\n"
    "    int y = 1;\n"
    "    x = y;\n"
    "  }\n"
    "}\n";

inline const char* const kWithImports =
    "package demo;\n"
    "\n"
    "import java.util.List;\n"
    "\n"
    "public class B {\n"
    "  void f() {\n"
    "    g();\n"
    "  }\n"
    "}\n";

inline const char* const kStringBraces =
    "class S {\n"
    "  String open() {\n"
    "    String s = \"{ not a block\";\n"
    "    return s + \"}}\";\n"
    "  }\n"
    "  char c() { return '{'; }\n"
    "}\n";

inline const char* const kNested =
    "class N {\n"
    "  int sum(int[] a) {\n"
    "    int t = 0;\n"
    "    for (int i = 0; i < a.length; i++) {\n"
    "      if (a[i] > 0) {\n"
    "        t += a[i];\n"
    "      }\n"
    "    }\n"
    "    return t;\n"
    "  }\n"
    "}\n";

inline const char* const kCommentBraces =
    "class C {\n"
    "  // a stray { in a comment\n"
    "  void m() {\n"
    "    /* } */ call();\n"
    "  }\n"
    "}\n";

inline const char* const kTryCatch =
    "class T {\n"
    "  void io() {\n"
    "    try {\n"
    "      read();\n"
    "    } catch (Exception e) {\n"
    "      log(e);\n"
    "    }\n"
    "  }\n"
    "}\n";

// A constant declared between two methods.
inline const char* const kBetweenMethods =
    "public class Config {\n"
    "  void a() {\n"
    "    x();\n"
    "  }\n"
    "  static final int LIMIT = 10;\n"
    "  void b() {\n"
    "    y();\n"
    "  }\n"
    "}\n";

inline const char* const kInnerClass =
    "class Outer {\n"
    "  static class Inner {\n"
    "    void go() {\n"
    "      run();\n"
    "    }\n"
    "    int n;\n"
    "  }\n"
    "}\n";

inline const char* const kElseBranch =
    "class E {\n"
    "  String pick(int v)\n"
    "      throws IllegalStateException {\n"
    "    if (v > 0) {\n"
    "      return \"pos\";\n"
    "    } else {\n"
    "      return \"neg\";\n"
    "    }\n"
    "  }\n"
    "}\n";

inline std::vector<CesCase> ces_cases() {
  using K = svassess::scopes::NodeKind;
  return {
      {"method_body", kSimpleClass, 5, 5, K::Method, 4, 7},
      {"field_change", kSimpleClass, 2, 2, K::TypeDecl, 1, 8},
      {"whole_file", kWithImports, 1, 9, K::FileRoot, 1, 9},
      {"string_braces", kStringBraces, 4, 4, K::Method, 2, 5},
      {"char_literal_brace", kStringBraces, 6, 6, K::Method, 6, 6},
      {"nested_if", kNested, 6, 6, K::IfElse, 5, 7},
      {"span_leaves_loop", kNested, 6, 9, K::Method, 2, 10},
      {"comment_braces", kCommentBraces, 4, 4, K::Method, 3, 5},
      {"catch_block", kTryCatch, 6, 6, K::TryCatch, 5, 7},
      {"outside_method", kBetweenMethods, 5, 5, K::TypeDecl, 1, 9},
      {"inner_class_field", kInnerClass, 6, 6, K::TypeDecl, 2, 7},
      {"else_branch", kElseBranch, 7, 7, K::IfElse, 6, 8},
  };
}

// Vulnerable function with one flagged line (index 7).
inline svassess::corpus::FunctionRecord preamble_function() {
  svassess::corpus::FunctionRecord f;
  f.id = "preamble";
  f.lines = {
      "protected String getExecutionPreamble()",
      "{",
      "    if ( getWorkingDirectoryAsString() == null )",
      "    {return null;}",
      "    String dir = getWorkingDirectoryAsString();",
      "    StringBuilder sb = new StringBuilder();",
      "    sb.append( \"cd\" );",
      "    sb.append( unifyQuotes( dir ) );",
      "    sb.append( \"&&\" );",
      "    return sb.toString();",
      "}",
  };
  f.vulnerable_line_indices = {7};
  f.labels = {{"confidentiality", "partial"}};
  f.date = {2014, 3, 1};
  return f;
}

}  // namespace fixture
