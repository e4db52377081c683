#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace svassess::features {

using TokenDoc = std::vector<std::string>;

enum class Weighting { Tf, TfIdf };

struct NlpConfig {
  int word_ngram_min = 1;
  int word_ngram_max = 1;
  Weighting weighting = Weighting::Tf;
  double word_min_doc_fraction = 0.001;
  int char_min = 2;
  int char_max = 6;
  double char_word_doc_fraction = 0.10;
  bool l2_normalize = false;

  void validate() const;

  // The eight word-level configurations used for model selection
  // (1: unigram tf, 2: unigram tf-idf, 3-5: 1-2..1-4 tf, 6-8: 1-2..1-4 tf-idf).
  static NlpConfig table_config(int number);

  nlohmann::json to_json() const;
  static NlpConfig from_json(const nlohmann::json& j);
};

// Sparse row with strictly increasing indices and finite non-zero values.
class SparseVector {
 public:
  SparseVector() = default;
  explicit SparseVector(std::size_t width) : width_(width) {}
  // Entries may arrive in any order; duplicates are summed and zeros dropped.
  SparseVector(std::size_t width, std::vector<std::pair<std::uint32_t, double>> entries);
  static SparseVector from_dense(const std::vector<double>& dense);

  std::size_t width() const { return width_; }
  const std::vector<std::pair<std::uint32_t, double>>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t nnz() const { return entries_.size(); }

  double dot(const std::vector<double>& dense) const;
  double norm() const;
  std::vector<double> to_dense() const;
  // Horizontal concatenation: other's indices shift by this->width().
  SparseVector append(const SparseVector& other) const;
  SparseVector scaled(double factor) const;

  bool operator==(const SparseVector&) const = default;

 private:
  std::size_t width_ = 0;
  std::vector<std::pair<std::uint32_t, double>> entries_;
};

using SparseMatrix = std::vector<SparseVector>;

enum class VocabKind { Word, Char, Subtoken };

// Terms in lexicographic order; column index = position.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(VocabKind kind, std::map<std::string, std::size_t> term_df);

  VocabKind kind() const { return kind_; }
  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::size_t>& doc_freq() const { return df_; }
  // -1 when absent.
  long index_of(const std::string& term) const;
  bool contains(const std::string& term) const { return index_of(term) >= 0; }

 private:
  VocabKind kind_ = VocabKind::Word;
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Word n-grams joined by single spaces, n in [n_min, n_max].
std::vector<std::string> word_ngrams(const TokenDoc& doc, int n_min, int n_max);
// Character n-grams over the tokens joined by single spaces. Grams made only
// of spaces are skipped.
std::vector<std::string> char_ngrams(const TokenDoc& doc, int n_min, int n_max);
// All contiguous substrings of `token` with length in [n_min, n_max].
std::vector<std::string> subtokens(const std::string& token, int n_min, int n_max);

// Every word n-gram whose document fraction is strictly above
// config.word_min_doc_fraction.
Vocabulary build_word_vocab(const std::vector<TokenDoc>& docs, const NlpConfig& config);
// Character n-grams of the words whose document fraction is strictly above
// config.char_word_doc_fraction, generated over each document's surviving
// words joined by spaces.
Vocabulary build_char_vocab(const std::vector<TokenDoc>& docs, const NlpConfig& config);
// Unigram tokens present in at least `min_doc_count` documents.
Vocabulary build_token_vocab(const std::vector<TokenDoc>& docs, std::size_t min_doc_count);
Vocabulary build_subtoken_vocab(const std::vector<TokenDoc>& docs, int n_min, int n_max,
                                std::size_t min_doc_count);

// Fitted char+word transformer. Word columns come first, then char columns.
class FeatureModel {
 public:
  FeatureModel() = default;
  FeatureModel(NlpConfig config, std::vector<std::string> word_terms, std::vector<std::string> char_terms,
               int char_scan_min, int char_scan_max, std::vector<double> idf);

  const NlpConfig& config() const { return config_; }
  const std::vector<std::string>& word_terms() const { return word_terms_; }
  const std::vector<std::string>& char_terms() const { return char_terms_; }
  const std::vector<double>& idf() const { return idf_; }
  std::size_t width() const { return word_terms_.size() + char_terms_.size(); }
  std::pair<int, int> char_scan_range() const { return {char_scan_min_, char_scan_max_}; }

  // Raw counts per column, before any weighting.
  SparseVector counts(const TokenDoc& doc) const;
  SparseVector transform(const TokenDoc& doc) const;
  SparseMatrix transform_all(const std::vector<TokenDoc>& docs) const;

  nlohmann::json to_json() const;
  static FeatureModel from_json(const nlohmann::json& j);

 private:
  void build_index();

  NlpConfig config_;
  std::vector<std::string> word_terms_;
  std::vector<std::string> char_terms_;
  int char_scan_min_ = 1;
  int char_scan_max_ = 0;
  std::vector<double> idf_;
  std::unordered_map<std::string, std::uint32_t> word_index_;
  std::unordered_map<std::string, std::uint32_t> char_index_;
};

// Smoothed inverse document frequency ln((1 + N) / (1 + df)) + 1.
double smoothed_idf(std::size_t n_docs, std::size_t df);

struct Aggregation {
  FeatureModel model;
  SparseMatrix matrix;
  // Char features kept after trimming and filtering, and the word features
  // left once those are removed.
  std::vector<std::string> selected_chars;
  std::vector<std::string> diff_words;
};

// Char-word feature aggregation: keeps single-word char features longer than
// one character, drops word features duplicated by a kept char feature, fits
// both transformers on `docs` and returns the concatenated matrix.
Aggregation aggregate_char_word(const std::vector<TokenDoc>& docs, const Vocabulary& word_vocab,
                                const Vocabulary& char_vocab, int char_min, int char_max,
                                const NlpConfig& config);

// Convenience fits built from the pieces above.
FeatureModel fit_word_model(const std::vector<TokenDoc>& docs, const NlpConfig& config);
FeatureModel fit_char_word_model(const std::vector<TokenDoc>& docs, const NlpConfig& config);
FeatureModel fit_char_model(const std::vector<TokenDoc>& docs, const NlpConfig& config);

// Bag-of-Subtokens counts of `tokens` over a fitted subtoken vocabulary.
SparseVector bag_of_subtokens(const TokenDoc& tokens, const Vocabulary& vocab, int n_min = 2, int n_max = 6);
// Bag-of-Tokens counts over a fitted token vocabulary.
SparseVector bag_of_tokens(const TokenDoc& tokens, const Vocabulary& vocab);

nlohmann::json sparse_to_json(const SparseVector& v);

}  // namespace svassess::features
