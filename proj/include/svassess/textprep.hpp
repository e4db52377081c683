#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace svassess::text {

struct PrepConfig {
  std::set<std::string> stopwords;
  bool lowercase = true;
  bool stem = true;
  // Punctuation is only stripped when it ends a word (followed by whitespace
  // or the end of the text). Turning this off strips every punctuation char.
  bool keep_inner_punct = true;

  static PrepConfig with_bundled_stopwords();
};

// English stop words shipped with the library (lowercase).
const std::set<std::string>& bundled_stopwords();
// One token per line; blank lines and surrounding whitespace ignored.
std::set<std::string> load_stopwords(const std::string& path);

std::vector<std::string> preprocess_text(std::string_view text, const PrepConfig& config);

// Porter (1980), steps 1a through 5b. Input is expected to be a lowercase
// ASCII word; anything of length <= 2 is returned unchanged.
std::string porter_stem(std::string_view word);

struct CodeTokens {
  std::vector<std::string> tokens;
  bool unterminated_literal = false;
};

// Identifiers, literals and maximal-munch Java operators. Comments and
// whitespace are dropped; case is preserved.
CodeTokens tokenize_code_checked(std::string_view text);
std::vector<std::string> tokenize_code(std::string_view text);

bool is_java_keyword(std::string_view token);
bool is_identifier(std::string_view token);

struct StrippedLines {
  std::vector<std::string> kept;
  // kept position -> original index
  std::map<std::size_t, std::size_t> index_map;
};

// Drops blank lines and lines holding nothing but comments.
StrippedLines strip_noncode_lines(const std::vector<std::string>& lines);

// Per-line flag: true when the line carries code outside comments.
std::vector<bool> code_line_mask(const std::vector<std::string>& lines);

}  // namespace svassess::text
