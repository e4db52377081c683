#include "svassess/textprep.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

#include <spdlog/spdlog.h>

#include "svassess/common.hpp"

namespace svassess::text {

const std::set<std::string>& bundled_stopwords() {
  static const std::set<std::string> kWords = {
#include "stopwords.inc"
  };
  return kWords;
}

PrepConfig PrepConfig::with_bundled_stopwords() {
  PrepConfig c;
  c.stopwords = bundled_stopwords();
  return c;
}

std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open stopword file '" + path + "'");
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto w = to_lower(trim(line));
    if (!w.empty()) out.insert(w);
  }
  return out;
}

namespace {

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<std::string> preprocess_text(std::string_view text, const PrepConfig& config) {
  std::vector<std::string> out;
  for (auto& chunk : split_whitespace(text)) {
    std::string word;
    if (config.keep_inner_punct) {
      std::size_t end = chunk.size();
      while (end > 0 && is_punct(chunk[end - 1])) --end;
      word = chunk.substr(0, end);
    } else {
      for (char c : chunk)
        if (!is_punct(c)) word += c;
    }
    if (config.lowercase) word = to_lower(word);
    if (word.empty()) continue;
    if (config.stopwords.count(config.lowercase ? word : to_lower(word))) continue;
    if (config.stem) word = porter_stem(word);
    if (!word.empty()) out.push_back(std::move(word));
  }
  return out;
}

// Porter stemmer ----------------------------------------------------------

namespace {

class PorterStemmer {
 public:
  explicit PorterStemmer(std::string_view word) : b_(word) {}

  std::string run() {
    if (b_.size() <= 2) return b_;
    step1a();
    step1b();
    step1c();
    step2();
    step3();
    step4();
    step5a();
    step5b();
    return b_;
  }

 private:
  std::string b_;

  bool consonant(std::size_t i) const {
    switch (b_[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u': return false;
      case 'y': return i == 0 ? true : !consonant(i - 1);
      default: return true;
    }
  }

  // m() of the first `len` characters.
  int measure(std::size_t len) const {
    int m = 0;
    std::size_t i = 0;
    while (i < len && consonant(i)) ++i;
    while (i < len) {
      while (i < len && !consonant(i)) ++i;
      if (i >= len) break;
      while (i < len && consonant(i)) ++i;
      ++m;
    }
    return m;
  }

  bool has_vowel(std::size_t len) const {
    for (std::size_t i = 0; i < len; ++i)
      if (!consonant(i)) return true;
    return false;
  }

  bool double_consonant(std::size_t len) const {
    return len >= 2 && b_[len - 1] == b_[len - 2] && consonant(len - 1);
  }

  // *o: stem ends consonant-vowel-consonant, last consonant not w, x or y.
  bool cvc(std::size_t len) const {
    if (len < 3) return false;
    if (!consonant(len - 1) || consonant(len - 2) || !consonant(len - 3)) return false;
    char c = b_[len - 1];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(std::string_view suffix) const {
    return b_.size() >= suffix.size() && std::string_view(b_).substr(b_.size() - suffix.size()) == suffix;
  }

  std::size_t stem_len(std::string_view suffix) const { return b_.size() - suffix.size(); }

  void replace(std::string_view suffix, std::string_view with) {
    b_.resize(stem_len(suffix));
    b_ += with;
  }

  struct Rule {
    std::string_view suffix;
    std::string_view replacement;
  };

  // Applies the first rule whose suffix matches, if its stem has m > min_m.
  template <std::size_t N>
  void apply_first(const std::array<Rule, N>& rules, int min_m) {
    for (const auto& r : rules) {
      if (!ends(r.suffix)) continue;
      if (measure(stem_len(r.suffix)) > min_m) replace(r.suffix, r.replacement);
      return;
    }
  }

  void step1a() {
    if (ends("sses")) replace("sses", "ss");
    else if (ends("ies")) replace("ies", "i");
    else if (ends("ss")) return;
    else if (ends("s")) replace("s", "");
  }

  void step1b() {
    if (ends("eed")) {
      if (measure(stem_len("eed")) > 0) replace("eed", "ee");
      return;
    }
    std::string_view suffix;
    if (ends("ed")) suffix = "ed";
    else if (ends("ing")) suffix = "ing";
    else return;
    if (!has_vowel(stem_len(suffix))) return;
    replace(suffix, "");
    if (ends("at")) replace("at", "ate");
    else if (ends("bl")) replace("bl", "ble");
    else if (ends("iz")) replace("iz", "ize");
    else if (double_consonant(b_.size())) {
      char c = b_.back();
      if (c != 'l' && c != 's' && c != 'z') b_.pop_back();
    } else if (measure(b_.size()) == 1 && cvc(b_.size())) {
      b_ += 'e';
    }
  }

  void step1c() {
    if (ends("y") && has_vowel(b_.size() - 1)) b_.back() = 'i';
  }

  void step2() {
    static const std::array<Rule, 20> kRules = {{
        {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"}, {"anci", "ance"},
        {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},   {"entli", "ent"},
        {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
        {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},  {"biliti", "ble"},
    }};
    // Longest match wins: order the candidates by length before applying.
    static const auto kSorted = [] {
      auto r = kRules;
      std::stable_sort(r.begin(), r.end(),
                       [](const Rule& a, const Rule& b) { return a.suffix.size() > b.suffix.size(); });
      return r;
    }();
    apply_first(kSorted, 0);
  }

  void step3() {
    static const std::array<Rule, 7> kRules = {{
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ful", ""},   {"ness", ""},
    }};
    apply_first(kRules, 0);
  }

  void step4() {
    static const std::array<std::string_view, 19> kSuffixes = {
        "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ism", "ate",
        "iti",   "ous",  "ive",  "ize",  "ion",  "al",   "er",  "ic",  "ou"};
    for (auto s : kSuffixes) {
      if (!ends(s)) continue;
      const std::size_t len = stem_len(s);
      if (measure(len) <= 1) return;
      if (s == "ion" && !(len > 0 && (b_[len - 1] == 's' || b_[len - 1] == 't'))) return;
      replace(s, "");
      return;
    }
  }

  void step5a() {
    if (!ends("e")) return;
    const std::size_t len = b_.size() - 1;
    const int m = measure(len);
    if (m > 1 || (m == 1 && !cvc(len))) b_.pop_back();
  }

  void step5b() {
    if (measure(b_.size()) > 1 && double_consonant(b_.size()) && b_.back() == 'l') b_.pop_back();
  }
};

}  // namespace

std::string porter_stem(std::string_view word) { return PorterStemmer(word).run(); }

// Code tokenizer ----------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 25> kOperators = {
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=",
    "<=",   ">=",  "+=",  "-=",  "*=",  "/=", "%=", "&=", "|=", "^=", "<<", ">>"};

bool ident_start(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalpha(u) || c == '_' || c == '$' || u >= 0x80;
}

bool ident_char(char c) { return ident_start(c) || std::isdigit(static_cast<unsigned char>(c)); }

}  // namespace

CodeTokens tokenize_code_checked(std::string_view s) {
  CodeTokens out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && s[i + 1] == '/') {
      while (i < n && s[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && s[i + 1] == '*') {
      auto end = s.find("*/", i + 2);
      i = end == std::string_view::npos ? n : end + 2;
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < n && ident_char(s[j])) ++j;
      out.tokens.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i;
      const bool hex = c == '0' && i + 1 < n && (s[i + 1] == 'x' || s[i + 1] == 'X');
      while (j < n) {
        char d = s[j];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' || d == '.') {
          ++j;
          if (!hex && (d == 'e' || d == 'E') && j < n && (s[j] == '+' || s[j] == '-')) ++j;
          continue;
        }
        break;
      }
      out.tokens.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    if (c == '"' && s.substr(i, 3) == "\"\"\"") {
      auto end = s.find("\"\"\"", i + 3);
      std::size_t j = end == std::string_view::npos ? n : end + 3;
      if (end == std::string_view::npos) out.unterminated_literal = true;
      out.tokens.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      bool closed = false;
      while (j < n && s[j] != '\n') {
        if (s[j] == '\\' && j + 1 < n) {
          j += 2;
          continue;
        }
        if (s[j] == c) {
          ++j;
          closed = true;
          break;
        }
        ++j;
      }
      if (!closed) out.unterminated_literal = true;
      out.tokens.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    std::string_view matched;
    for (auto op : kOperators) {
      if (s.substr(i, op.size()) == op) {
        matched = op;
        break;
      }
    }
    if (matched.empty()) matched = s.substr(i, 1);
    out.tokens.emplace_back(matched);
    i += matched.size();
  }
  if (out.unterminated_literal) spdlog::warn("tokenize_code: unterminated literal tokenized to end of line");
  return out;
}

std::vector<std::string> tokenize_code(std::string_view text) { return tokenize_code_checked(text).tokens; }

bool is_java_keyword(std::string_view t) {
  static const std::set<std::string, std::less<>> kKeywords = {
      "abstract", "assert",     "boolean",   "break",     "byte",      "case",      "catch",
      "char",     "class",      "const",     "continue",  "default",   "do",        "double",
      "else",     "enum",       "extends",   "final",     "finally",   "float",     "for",
      "goto",     "if",         "implements", "import",   "instanceof", "int",      "interface",
      "long",     "native",     "new",       "package",   "private",   "protected", "public",
      "return",   "short",      "static",    "strictfp",  "super",     "switch",    "synchronized",
      "this",     "throw",      "throws",    "transient", "try",       "void",      "volatile",
      "while",    "true",       "false",     "null",      "var",       "record",    "yield"};
  return kKeywords.count(t) > 0;
}

bool is_identifier(std::string_view t) {
  if (t.empty() || !ident_start(t[0])) return false;
  return std::all_of(t.begin(), t.end(), ident_char);
}

// Comment-only line detection --------------------------------------------

std::vector<bool> code_line_mask(const std::vector<std::string>& lines) {
  std::vector<bool> mask(lines.size(), false);
  bool in_block = false;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string& s = lines[li];
    bool code = false;
    std::size_t i = 0;
    while (i < s.size()) {
      if (in_block) {
        auto end = s.find("*/", i);
        if (end == std::string::npos) {
          i = s.size();
        } else {
          in_block = false;
          i = end + 2;
        }
        continue;
      }
      char c = s[i];
      if (c == '/' && i + 1 < s.size() && s[i + 1] == '/') break;
      if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
        in_block = true;
        i += 2;
        continue;
      }
      if (!std::isspace(static_cast<unsigned char>(c))) code = true;
      if (c == '"' || c == '\'') {
        std::size_t j = i + 1;
        while (j < s.size() && s[j] != c) j += (s[j] == '\\') ? 2 : 1;
        i = j + 1;
        continue;
      }
      ++i;
    }
    mask[li] = code;
  }
  return mask;
}

StrippedLines strip_noncode_lines(const std::vector<std::string>& lines) {
  StrippedLines out;
  const auto mask = code_line_mask(lines);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!mask[i]) continue;
    out.index_map[out.kept.size()] = i;
    out.kept.push_back(lines[i]);
  }
  return out;
}

}  // namespace svassess::text
