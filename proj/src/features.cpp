#include "svassess/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "svassess/common.hpp"

namespace svassess::features {

using nlohmann::json;

void NlpConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::InvalidArgument, "NlpConfig: " + what); };
  if (word_ngram_min < 1 || word_ngram_max > 4 || word_ngram_min > word_ngram_max)
    bad("word n-gram range must satisfy 1 <= min <= max <= 4");
  if (char_min < 1 || char_min > char_max) bad("char n-gram range must satisfy 1 <= min <= max");
  if (!(word_min_doc_fraction >= 0.0 && word_min_doc_fraction < 1.0))
    bad("word_min_doc_fraction must lie in [0, 1)");
  if (!(char_word_doc_fraction >= 0.0 && char_word_doc_fraction < 1.0))
    bad("char_word_doc_fraction must lie in [0, 1)");
}

NlpConfig NlpConfig::table_config(int number) {
  static const int kMaxN[] = {1, 1, 2, 3, 4, 2, 3, 4};
  if (number < 1 || number > 8) fail(ErrorKind::InvalidArgument, "NLP configuration must be 1..8");
  NlpConfig c;
  c.word_ngram_min = 1;
  c.word_ngram_max = kMaxN[number - 1];
  const bool tfidf = number == 2 || number >= 6;
  c.weighting = tfidf ? Weighting::TfIdf : Weighting::Tf;
  c.l2_normalize = tfidf;
  return c;
}

json NlpConfig::to_json() const {
  return {{"word_ngram_min", word_ngram_min},
          {"word_ngram_max", word_ngram_max},
          {"weighting", weighting == Weighting::Tf ? "tf" : "tfidf"},
          {"word_min_doc_fraction", word_min_doc_fraction},
          {"char_min", char_min},
          {"char_max", char_max},
          {"char_word_doc_fraction", char_word_doc_fraction},
          {"l2_normalize", l2_normalize}};
}

NlpConfig NlpConfig::from_json(const json& j) {
  NlpConfig c;
  c.word_ngram_min = j.value("word_ngram_min", c.word_ngram_min);
  c.word_ngram_max = j.value("word_ngram_max", c.word_ngram_max);
  const std::string w = j.value("weighting", std::string("tf"));
  if (w == "tf") c.weighting = Weighting::Tf;
  else if (w == "tfidf") c.weighting = Weighting::TfIdf;
  else fail(ErrorKind::InvalidArgument, "weighting must be 'tf' or 'tfidf'");
  c.word_min_doc_fraction = j.value("word_min_doc_fraction", c.word_min_doc_fraction);
  c.char_min = j.value("char_min", c.char_min);
  c.char_max = j.value("char_max", c.char_max);
  c.char_word_doc_fraction = j.value("char_word_doc_fraction", c.char_word_doc_fraction);
  c.l2_normalize = j.value("l2_normalize", c.weighting == Weighting::TfIdf);
  c.validate();
  return c;
}

// SparseVector ------------------------------------------------------------

SparseVector::SparseVector(std::size_t width, std::vector<std::pair<std::uint32_t, double>> entries)
    : width_(width) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [idx, val] : entries) {
    if (idx >= width) fail(ErrorKind::InvalidArgument, "sparse index out of range");
    if (!std::isfinite(val)) fail(ErrorKind::InvalidArgument, "sparse value must be finite");
    if (!entries_.empty() && entries_.back().first == idx) entries_.back().second += val;
    else entries_.emplace_back(idx, val);
  }
  std::erase_if(entries_, [](const auto& e) { return e.second == 0.0; });
}

SparseVector SparseVector::from_dense(const std::vector<double>& dense) {
  std::vector<std::pair<std::uint32_t, double>> e;
  for (std::size_t i = 0; i < dense.size(); ++i)
    if (dense[i] != 0.0) e.emplace_back(static_cast<std::uint32_t>(i), dense[i]);
  return SparseVector(dense.size(), std::move(e));
}

double SparseVector::dot(const std::vector<double>& dense) const {
  double s = 0.0;
  for (const auto& [i, v] : entries_) s += v * dense[i];
  return s;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.second * e.second;
  return std::sqrt(s);
}

std::vector<double> SparseVector::to_dense() const {
  std::vector<double> d(width_, 0.0);
  for (const auto& [i, v] : entries_) d[i] = v;
  return d;
}

SparseVector SparseVector::append(const SparseVector& other) const {
  SparseVector out(width_ + other.width_);
  out.entries_ = entries_;
  for (const auto& [i, v] : other.entries_)
    out.entries_.emplace_back(static_cast<std::uint32_t>(i + width_), v);
  return out;
}

SparseVector SparseVector::scaled(double factor) const {
  SparseVector out(width_);
  if (factor == 0.0) return out;
  out.entries_ = entries_;
  for (auto& e : out.entries_) e.second *= factor;
  return out;
}

// Vocabulary --------------------------------------------------------------

Vocabulary::Vocabulary(VocabKind kind, std::map<std::string, std::size_t> term_df) : kind_(kind) {
  terms_.reserve(term_df.size());
  for (auto& [term, df] : term_df) {
    index_.emplace(term, terms_.size());
    terms_.push_back(term);
    df_.push_back(df);
  }
}

long Vocabulary::index_of(const std::string& term) const {
  auto it = index_.find(term);
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

// n-gram generation -------------------------------------------------------

std::vector<std::string> word_ngrams(const TokenDoc& doc, int n_min, int n_max) {
  std::vector<std::string> out;
  for (int n = n_min; n <= n_max; ++n) {
    if (static_cast<std::size_t>(n) > doc.size()) break;
    for (std::size_t i = 0; i + n <= doc.size(); ++i) {
      std::string g = doc[i];
      for (int k = 1; k < n; ++k) {
        g += ' ';
        g += doc[i + k];
      }
      out.push_back(std::move(g));
    }
  }
  return out;
}

namespace {

std::string join_tokens(const TokenDoc& doc) {
  std::string s;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (i) s += ' ';
    s += doc[i];
  }
  return s;
}

}  // namespace

std::vector<std::string> char_ngrams(const TokenDoc& doc, int n_min, int n_max) {
  const std::string text = join_tokens(doc);
  std::vector<std::string> out;
  for (int n = std::max(n_min, 1); n <= n_max; ++n) {
    if (static_cast<std::size_t>(n) > text.size()) break;
    for (std::size_t i = 0; i + n <= text.size(); ++i) {
      std::string_view g(text.data() + i, n);
      if (g.find_first_not_of(' ') == std::string_view::npos) continue;
      out.emplace_back(g);
    }
  }
  return out;
}

std::vector<std::string> subtokens(const std::string& token, int n_min, int n_max) {
  std::vector<std::string> out;
  for (int n = std::max(n_min, 1); n <= n_max; ++n) {
    if (static_cast<std::size_t>(n) > token.size()) break;
    for (std::size_t i = 0; i + n <= token.size(); ++i) out.push_back(token.substr(i, n));
  }
  return out;
}

namespace {

template <typename GramFn>
std::map<std::string, std::size_t> doc_frequencies(const std::vector<TokenDoc>& docs, GramFn grams) {
  std::map<std::string, std::size_t> df;
  for (const auto& d : docs) {
    auto g = grams(d);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    for (auto& t : g) ++df[t];
  }
  return df;
}

void require_docs(const std::vector<TokenDoc>& docs) {
  if (docs.empty()) fail(ErrorKind::InvalidArgument, "cannot build a vocabulary from an empty corpus");
}

}  // namespace

Vocabulary build_word_vocab(const std::vector<TokenDoc>& docs, const NlpConfig& config) {
  require_docs(docs);
  config.validate();
  auto df = doc_frequencies(docs, [&](const TokenDoc& d) {
    return word_ngrams(d, config.word_ngram_min, config.word_ngram_max);
  });
  const double n = static_cast<double>(docs.size());
  std::erase_if(df, [&](const auto& e) { return !(e.second / n > config.word_min_doc_fraction); });
  return Vocabulary(VocabKind::Word, std::move(df));
}

Vocabulary build_char_vocab(const std::vector<TokenDoc>& docs, const NlpConfig& config) {
  require_docs(docs);
  config.validate();
  auto word_df = doc_frequencies(docs, [](const TokenDoc& d) { return d; });
  const double n = static_cast<double>(docs.size());
  std::set<std::string> frequent;
  for (const auto& [w, df] : word_df)
    if (df / n > config.char_word_doc_fraction) frequent.insert(w);
  auto df = doc_frequencies(docs, [&](const TokenDoc& d) {
    TokenDoc kept;
    for (const auto& t : d)
      if (frequent.count(t)) kept.push_back(t);
    return char_ngrams(kept, config.char_min, config.char_max);
  });
  return Vocabulary(VocabKind::Char, std::move(df));
}

Vocabulary build_token_vocab(const std::vector<TokenDoc>& docs, std::size_t min_doc_count) {
  require_docs(docs);
  auto df = doc_frequencies(docs, [](const TokenDoc& d) { return d; });
  std::erase_if(df, [&](const auto& e) { return e.second < min_doc_count; });
  return Vocabulary(VocabKind::Word, std::move(df));
}

Vocabulary build_subtoken_vocab(const std::vector<TokenDoc>& docs, int n_min, int n_max,
                                std::size_t min_doc_count) {
  require_docs(docs);
  auto df = doc_frequencies(docs, [&](const TokenDoc& d) {
    std::vector<std::string> all;
    for (const auto& t : d) {
      auto s = subtokens(t, n_min, n_max);
      all.insert(all.end(), s.begin(), s.end());
    }
    return all;
  });
  std::erase_if(df, [&](const auto& e) { return e.second < min_doc_count; });
  return Vocabulary(VocabKind::Subtoken, std::move(df));
}

// FeatureModel ------------------------------------------------------------

double smoothed_idf(std::size_t n_docs, std::size_t df) {
  return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df))) + 1.0;
}

FeatureModel::FeatureModel(NlpConfig config, std::vector<std::string> word_terms,
                           std::vector<std::string> char_terms, int char_scan_min, int char_scan_max,
                           std::vector<double> idf)
    : config_(config),
      word_terms_(std::move(word_terms)),
      char_terms_(std::move(char_terms)),
      char_scan_min_(char_scan_min),
      char_scan_max_(char_scan_max),
      idf_(std::move(idf)) {
  if (!idf_.empty() && idf_.size() != width())
    fail(ErrorKind::InvalidArgument, "idf table width does not match the vocabularies");
  build_index();
}

void FeatureModel::build_index() {
  word_index_.clear();
  char_index_.clear();
  for (std::size_t i = 0; i < word_terms_.size(); ++i)
    word_index_.emplace(word_terms_[i], static_cast<std::uint32_t>(i));
  for (std::size_t i = 0; i < char_terms_.size(); ++i) {
    if (word_index_.count(char_terms_[i]))
      fail(ErrorKind::InvalidArgument, "term '" + char_terms_[i] + "' present in both vocabularies");
    char_index_.emplace(char_terms_[i], static_cast<std::uint32_t>(word_terms_.size() + i));
  }
}

SparseVector FeatureModel::counts(const TokenDoc& doc) const {
  std::vector<std::pair<std::uint32_t, double>> e;
  if (!word_terms_.empty()) {
    for (const auto& g : word_ngrams(doc, config_.word_ngram_min, config_.word_ngram_max))
      if (auto it = word_index_.find(g); it != word_index_.end()) e.emplace_back(it->second, 1.0);
  }
  if (!char_terms_.empty()) {
    for (const auto& g : char_ngrams(doc, char_scan_min_, char_scan_max_))
      if (auto it = char_index_.find(g); it != char_index_.end()) e.emplace_back(it->second, 1.0);
  }
  return SparseVector(width(), std::move(e));
}

SparseVector FeatureModel::transform(const TokenDoc& doc) const {
  SparseVector c = counts(doc);
  if (config_.weighting == Weighting::Tf && !config_.l2_normalize) return c;
  std::vector<std::pair<std::uint32_t, double>> e = c.entries();
  if (config_.weighting == Weighting::TfIdf)
    for (auto& [i, v] : e) v *= idf_.at(i);
  SparseVector w(width(), std::move(e));
  if (config_.l2_normalize && !w.empty()) return w.scaled(1.0 / w.norm());
  return w;
}

SparseMatrix FeatureModel::transform_all(const std::vector<TokenDoc>& docs) const {
  SparseMatrix m;
  m.reserve(docs.size());
  for (const auto& d : docs) m.push_back(transform(d));
  return m;
}

json FeatureModel::to_json() const {
  return {{"config", config_.to_json()},
          {"word_vocab", word_terms_},
          {"char_vocab", char_terms_},
          {"char_scan", {char_scan_min_, char_scan_max_}},
          {"idf", idf_}};
}

FeatureModel FeatureModel::from_json(const json& j) {
  try {
    auto scan = j.value("char_scan", std::vector<int>{1, 0});
    if (scan.size() != 2) fail(ErrorKind::Schema, "feature model: char_scan must hold two integers");
    return FeatureModel(NlpConfig::from_json(j.at("config")), j.at("word_vocab").get<std::vector<std::string>>(),
                        j.at("char_vocab").get<std::vector<std::string>>(), scan[0], scan[1],
                        j.at("idf").get<std::vector<double>>());
  } catch (const json::exception& e) {
    fail(ErrorKind::Schema, std::string("feature model JSON: ") + e.what());
  }
}

namespace {

FeatureModel with_idf(const NlpConfig& config, std::vector<std::string> words, std::vector<std::string> chars,
                      int scan_min, int scan_max, const std::vector<TokenDoc>& docs) {
  FeatureModel bare(config, std::move(words), std::move(chars), scan_min, scan_max, {});
  if (config.weighting == Weighting::Tf) return bare;
  std::vector<std::size_t> df(bare.width(), 0);
  for (const auto& d : docs) {
    const SparseVector c = bare.counts(d);
    for (const auto& [i, v] : c.entries()) ++df[i];
  }
  std::vector<double> idf(bare.width());
  for (std::size_t i = 0; i < idf.size(); ++i) idf[i] = smoothed_idf(docs.size(), df[i]);
  return FeatureModel(config, bare.word_terms(), bare.char_terms(), scan_min, scan_max, std::move(idf));
}

std::vector<std::string> select_char_features(const Vocabulary& char_vocab) {
  std::set<std::string> selected;
  for (const auto& f : char_vocab.terms()) {
    auto parts = split_whitespace(f);
    if (parts.size() == 1 && parts[0].size() > 1) selected.insert(parts[0]);
  }
  return {selected.begin(), selected.end()};
}

}  // namespace

Aggregation aggregate_char_word(const std::vector<TokenDoc>& docs, const Vocabulary& word_vocab,
                                const Vocabulary& char_vocab, int char_min, int char_max,
                                const NlpConfig& config) {
  if (char_min < 1 || char_min > char_max)
    fail(ErrorKind::InvalidArgument, "aggregate_char_word: inconsistent char n-gram range");
  config.validate();
  Aggregation out;
  out.selected_chars = select_char_features(char_vocab);
  const std::set<std::string> chars(out.selected_chars.begin(), out.selected_chars.end());
  for (const auto& w : word_vocab.terms())
    if (!chars.count(w)) out.diff_words.push_back(w);
  // A trimmed gram is one char shorter than the window that produced it, so
  // the char transformer scans from char_min - 1.
  out.model = with_idf(config, out.diff_words, out.selected_chars, std::max(1, char_min - 1), char_max, docs);
  out.matrix = out.model.transform_all(docs);
  return out;
}

FeatureModel fit_word_model(const std::vector<TokenDoc>& docs, const NlpConfig& config) {
  auto vocab = build_word_vocab(docs, config);
  return with_idf(config, vocab.terms(), {}, 1, 0, docs);
}

FeatureModel fit_char_word_model(const std::vector<TokenDoc>& docs, const NlpConfig& config) {
  auto words = build_word_vocab(docs, config);
  auto chars = build_char_vocab(docs, config);
  return aggregate_char_word(docs, words, chars, config.char_min, config.char_max, config).model;
}

FeatureModel fit_char_model(const std::vector<TokenDoc>& docs, const NlpConfig& config) {
  auto chars = build_char_vocab(docs, config);
  return with_idf(config, {}, select_char_features(chars), std::max(1, config.char_min - 1), config.char_max,
                  docs);
}

SparseVector bag_of_subtokens(const TokenDoc& tokens, const Vocabulary& vocab, int n_min, int n_max) {
  std::vector<std::pair<std::uint32_t, double>> e;
  for (const auto& t : tokens)
    for (const auto& s : subtokens(t, n_min, n_max))
      if (auto i = vocab.index_of(s); i >= 0) e.emplace_back(static_cast<std::uint32_t>(i), 1.0);
  return SparseVector(vocab.size(), std::move(e));
}

SparseVector bag_of_tokens(const TokenDoc& tokens, const Vocabulary& vocab) {
  std::vector<std::pair<std::uint32_t, double>> e;
  for (const auto& t : tokens)
    if (auto i = vocab.index_of(t); i >= 0) e.emplace_back(static_cast<std::uint32_t>(i), 1.0);
  return SparseVector(vocab.size(), std::move(e));
}

json sparse_to_json(const SparseVector& v) {
  json pairs = json::array();
  for (const auto& [i, x] : v.entries()) pairs.push_back({i, x});
  return {{"width", v.width()}, {"entries", pairs}};
}

}  // namespace svassess::features
