#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "svassess/common.hpp"
#include "svassess/features.hpp"

using namespace svassess;
using namespace svassess::features;

namespace {

using Strings = std::vector<std::string>;

std::multiset<std::string> bag(const Strings& v) { return {v.begin(), v.end()}; }

std::vector<TokenDoc> random_corpus(Rng& rng, std::size_t n) {
  static const Strings words = {"overflow", "buffer", "remote", "attack", "attacker", "inject", "script",
                                "denial",   "servic", "crash",  "memori", "heap",     "xss",    "sql"};
  std::vector<TokenDoc> docs;
  for (std::size_t d = 0; d < n; ++d) {
    TokenDoc doc;
    const auto len = 1 + rng.index(8);
    for (std::size_t i = 0; i < len; ++i) doc.push_back(words[rng.index(words.size())]);
    docs.push_back(doc);
  }
  return docs;
}

}  // namespace

TEST(Ngrams, HelloWorldWords) {
  TokenDoc doc{"Hello", "World"};
  EXPECT_EQ(bag(word_ngrams(doc, 1, 1)), bag({"Hello", "World"}));
  EXPECT_EQ(bag(word_ngrams(doc, 2, 2)), bag({"Hello World"}));
}

TEST(Ngrams, HelloWorldChars) {
  TokenDoc doc{"Hello", "World"};
  EXPECT_EQ(bag(char_ngrams(doc, 1, 1)), bag({"H", "e", "l", "l", "o", "W", "o", "r", "l", "d"}));
  EXPECT_EQ(bag(char_ngrams(doc, 2, 2)), bag({"He", "el", "ll", "lo", "o ", " W", "Wo", "or", "rl", "ld"}));
  EXPECT_EQ(char_ngrams({"ab"}, 2, 2), Strings{"ab"});
}

TEST(Ngrams, Subtokens) {
  EXPECT_EQ(bag(subtokens("MyVar", 2, 3)), bag({"My", "yV", "Va", "ar", "MyV", "yVa", "Var"}));
  EXPECT_EQ(subtokens("ab", 2, 6), Strings{"ab"});
  EXPECT_TRUE(subtokens("a", 2, 6).empty());
}

TEST(WordVocab, StrictDocFraction) {
  std::vector<TokenDoc> docs{{"hello", "world"}, {"hello", "there"}};
  NlpConfig cfg;
  cfg.word_min_doc_fraction = 0.4;
  auto v = build_word_vocab(docs, cfg);
  EXPECT_EQ(v.terms(), (Strings{"hello", "there", "world"}));
  EXPECT_EQ(v.doc_freq()[0], 2u);
  cfg.word_min_doc_fraction = 0.6;
  EXPECT_EQ(build_word_vocab(docs, cfg).terms(), Strings{"hello"});
  // Exactly at the threshold is not "more than".
  cfg.word_min_doc_fraction = 0.5;
  EXPECT_EQ(build_word_vocab(docs, cfg).terms(), Strings{"hello"});
}

TEST(WordVocab, BigramsPresent) {
  NlpConfig cfg = NlpConfig::table_config(3);
  cfg.word_min_doc_fraction = 0.0;
  auto v = build_word_vocab({{"hello", "world"}}, cfg);
  EXPECT_TRUE(v.contains("hello world"));
}

TEST(TableConfigs, EightConfigurations) {
  for (int i = 1; i <= 8; ++i) EXPECT_NO_THROW(NlpConfig::table_config(i).validate());
  EXPECT_EQ(NlpConfig::table_config(1).weighting, Weighting::Tf);
  EXPECT_EQ(NlpConfig::table_config(2).weighting, Weighting::TfIdf);
  EXPECT_EQ(NlpConfig::table_config(5).word_ngram_max, 4);
  EXPECT_EQ(NlpConfig::table_config(8).word_ngram_max, 4);
  EXPECT_EQ(NlpConfig::table_config(8).weighting, Weighting::TfIdf);
  EXPECT_THROW(NlpConfig::table_config(9), Error);
}

TEST(Aggregation, HelloWorldKeepsSingleWordGrams) {
  TokenDoc doc{"Hello", "World"};
  std::map<std::string, std::size_t> grams;
  for (const auto& g : char_ngrams(doc, 2, 2)) grams[g] = 1;
  Vocabulary chars(VocabKind::Char, grams);
  Vocabulary words(VocabKind::Word, {{"Hello", 1}, {"World", 1}});
  NlpConfig cfg;
  auto agg = aggregate_char_word({doc}, words, chars, 2, 2, cfg);
  EXPECT_EQ(std::set<std::string>(agg.selected_chars.begin(), agg.selected_chars.end()),
            (std::set<std::string>{"He", "el", "ll", "lo", "Wo", "or", "rl", "ld"}));
  EXPECT_EQ(agg.diff_words, (Strings{"Hello", "World"}));
}

TEST(Aggregation, DuplicatedWordRemoved) {
  Vocabulary words(VocabKind::Word, {{"attack", 1}, {"attacker", 1}});
  Vocabulary chars(VocabKind::Char, {{"attack", 1}});
  NlpConfig cfg;
  auto agg = aggregate_char_word({{"attack", "attacker"}}, words, chars, 6, 6, cfg);
  EXPECT_EQ(agg.diff_words, Strings{"attacker"});
  EXPECT_EQ(agg.model.word_terms(), Strings{"attacker"});
  EXPECT_EQ(agg.model.char_terms(), Strings{"attack"});
}

TEST(Aggregation, EmptyCharVocabIsWordOnly) {
  Vocabulary words(VocabKind::Word, {{"a1", 1}, {"b2", 1}});
  NlpConfig cfg;
  auto agg = aggregate_char_word({{"a1", "b2", "a1"}}, words, Vocabulary(VocabKind::Char, {}), 2, 3, cfg);
  EXPECT_TRUE(agg.model.char_terms().empty());
  EXPECT_EQ(agg.matrix[0], SparseVector(2, {{0, 2.0}, {1, 1.0}}));
}

TEST(Transform, TermFrequencies) {
  FeatureModel m(NlpConfig{}, {"hello", "world"}, {}, 1, 0, {});
  EXPECT_EQ(m.transform({"hello", "hello", "world"}), SparseVector(2, {{0, 2.0}, {1, 1.0}}));
  EXPECT_TRUE(m.transform({"zzz"}).empty());
}

TEST(Transform, SmoothedIdf) {
  EXPECT_NEAR(smoothed_idf(2, 1), std::log(3.0 / 2.0) + 1.0, 1e-15);
  EXPECT_NEAR(smoothed_idf(2, 1), 1.405465, 1e-6);
  NlpConfig cfg = NlpConfig::table_config(2);
  cfg.word_min_doc_fraction = 0.0;
  cfg.l2_normalize = false;
  auto m = fit_word_model({{"alpha", "beta"}, {"alpha"}}, cfg);
  auto v = m.transform({"beta", "beta"});
  ASSERT_EQ(v.nnz(), 1u);
  EXPECT_NEAR(v.entries()[0].second, 2.0 * smoothed_idf(2, 1), 1e-12);
}

TEST(Transform, L2NormalizedHasUnitNorm) {
  Rng rng(21);
  auto docs = random_corpus(rng, 60);
  NlpConfig cfg = NlpConfig::table_config(6);
  cfg.l2_normalize = true;
  cfg.char_min = 2;
  cfg.char_max = 4;
  auto m = fit_char_word_model(docs, cfg);
  for (const auto& d : random_corpus(rng, 200)) {
    auto v = m.transform(d);
    if (!v.empty()) EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  }
}

// Width is constant and no term sits in both vocabularies.
TEST(Transform, WidthAndDisjointVocabularies) {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    auto docs = random_corpus(rng, 30);
    NlpConfig cfg = NlpConfig::table_config(1 + static_cast<int>(rng.index(8)));
    cfg.char_min = 2;
    cfg.char_max = 3 + static_cast<int>(rng.index(4));
    auto m = fit_char_word_model(docs, cfg);
    std::set<std::string> words(m.word_terms().begin(), m.word_terms().end());
    for (const auto& c : m.char_terms()) EXPECT_FALSE(words.count(c)) << c;
    for (const auto& d : random_corpus(rng, 10)) EXPECT_EQ(m.transform(d).width(), m.width());
  }
}

TEST(Transform, JsonRoundTrip) {
  Rng rng(23);
  auto docs = random_corpus(rng, 40);
  NlpConfig cfg = NlpConfig::table_config(7);
  cfg.char_min = 2;
  cfg.char_max = 3;
  auto m = fit_char_word_model(docs, cfg);
  auto back = FeatureModel::from_json(m.to_json());
  for (const auto& d : docs) EXPECT_EQ(back.transform(d), m.transform(d));
}

TEST(Sparse, ConstructionAndAppend) {
  SparseVector v(5, {{3, 1.0}, {1, 2.0}, {3, 1.0}, {4, 0.0}});
  EXPECT_EQ(v.entries(), (std::vector<std::pair<std::uint32_t, double>>{{1, 2.0}, {3, 2.0}}));
  auto w = v.append(SparseVector(2, {{0, 1.0}}));
  EXPECT_EQ(w.width(), 7u);
  EXPECT_EQ(w.entries().back(), (std::pair<std::uint32_t, double>{5, 1.0}));
  EXPECT_THROW(SparseVector(2, {{2, 1.0}}), Error);
}

TEST(CodeBags, TokensAndSubtokens) {
  auto tv = build_token_vocab({{"a", "b"}, {"a"}}, 2);
  EXPECT_EQ(tv.terms(), Strings{"a"});
  EXPECT_EQ(bag_of_tokens({"a", "a", "b"}, tv), SparseVector(1, {{0, 2.0}}));
  auto sv = build_subtoken_vocab({{"MyVar"}}, 2, 3, 1);
  EXPECT_EQ(sv.size(), 7u);
  EXPECT_EQ(bag_of_subtokens({"Var"}, sv, 2, 3).nnz(), 3u);
}
