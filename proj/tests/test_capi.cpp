#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "svassess/svassess.h"

using nlohmann::json;

namespace {

class Capi : public ::testing::Test {
 protected:
  void SetUp() override { ASSERT_EQ(sva_context_new(&ctx), SVA_OK); }
  void TearDown() override { sva_context_free(ctx); }

  // Takes ownership of a library string.
  static std::string take(char* s) {
    std::string out = s ? s : "";
    sva_string_free(s);
    return out;
  }

  sva_context* ctx = nullptr;
};

}  // namespace

TEST_F(Capi, VersionAndStatus) {
  EXPECT_STREQ(sva_version(), "0.1.0");
  EXPECT_EQ(sva_exit_code(SVA_OK), 0);
  EXPECT_EQ(sva_exit_code(SVA_ERR_SCHEMA), 1);
  EXPECT_EQ(sva_exit_code(SVA_ERR_RUNTIME), 2);
  EXPECT_STRNE(sva_status_string(SVA_ERR_IO), "");
  EXPECT_EQ(sva_set_log_level(ctx, "loud"), SVA_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(sva_set_log_level(ctx, "error"), SVA_OK);
}

TEST_F(Capi, NullHandling) {
  char* out = nullptr;
  EXPECT_EQ(sva_porter_stem(nullptr, "cats", &out), SVA_ERR_NULL);
  EXPECT_EQ(sva_porter_stem(ctx, nullptr, &out), SVA_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(sva_last_error(ctx)).find("word"), std::string::npos);
  EXPECT_EQ(sva_context_new(nullptr), SVA_ERR_NULL);
}

TEST_F(Capi, TextHelpers) {
  char* out = nullptr;
  ASSERT_EQ(sva_preprocess_text(ctx, "input.c is vulnerable", &out), SVA_OK);
  EXPECT_EQ(json::parse(take(out)), json({"input.c", "vulner"}));
  ASSERT_EQ(sva_tokenize_code(ctx, "var++", &out), SVA_OK);
  EXPECT_EQ(json::parse(take(out)), json({"var", "++"}));
  ASSERT_EQ(sva_porter_stem(ctx, "ponies", &out), SVA_OK);
  EXPECT_EQ(take(out), "poni");
}

TEST_F(Capi, DiffParsing) {
  char* out = nullptr;
  ASSERT_EQ(sva_parse_diff(ctx, "--- a/x\n+++ b/x\n@@ -1 +1 @@\n-old\n+new\n", &out), SVA_OK);
  auto files = json::parse(take(out));
  EXPECT_EQ(files.at(0).at("hunks").at(0).at("deleted"), json({"old"}));
  EXPECT_EQ(sva_parse_diff(ctx, "@@ -1 +1 @@\n-a\n+b\n", &out), SVA_ERR_PARSE);
  EXPECT_NE(std::string(sva_last_error(ctx)), "");
}

TEST_F(Capi, FeatureModelLifecycle) {
  sva_feature_model* m = nullptr;
  ASSERT_EQ(sva_feature_model_fit(ctx, "word", nullptr, R"([["hello","world"],["hello","there"]])", &m), SVA_OK);
  size_t width = 0;
  ASSERT_EQ(sva_feature_model_width(ctx, m, &width), SVA_OK);
  EXPECT_EQ(width, 3u);
  char* out = nullptr;
  ASSERT_EQ(sva_feature_model_transform(ctx, m, R"(["hello","hello","zzz"])", &out), SVA_OK);
  auto v = json::parse(take(out));
  EXPECT_EQ(v.at("entries"), json::parse("[[0, 2.0]]"));

  ASSERT_EQ(sva_feature_model_to_json(ctx, m, &out), SVA_OK);
  const std::string saved = take(out);
  sva_feature_model* loaded = nullptr;
  ASSERT_EQ(sva_feature_model_load(ctx, saved.c_str(), &loaded), SVA_OK);
  ASSERT_EQ(sva_feature_model_width(ctx, loaded, &width), SVA_OK);
  EXPECT_EQ(width, 3u);
  sva_feature_model_free(loaded);
  sva_feature_model_free(m);

  EXPECT_EQ(sva_feature_model_fit(ctx, "phonetic", nullptr, "[]", &m), SVA_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(m, nullptr);
  EXPECT_EQ(sva_feature_model_load(ctx, "{not json", &m), SVA_ERR_PARSE);
}

TEST_F(Capi, AnalysisHelpers) {
  char* out = nullptr;
  ASSERT_EQ(sva_compute_metrics(ctx, R"(["a","b","a"])", R"(["a","b","b"])", &out), SVA_OK);
  auto m = json::parse(take(out));
  EXPECT_NEAR(m.at("accuracy").get<double>(), 2.0 / 3.0, 1e-15);

  const char* src = "class A {\n  int f;\n  void m() {\n    x();\n  }\n}\n";
  ASSERT_EQ(sva_extract_ces(ctx, src, 4, 4, &out), SVA_OK);
  auto node = json::parse(take(out));
  EXPECT_EQ(node.at("kind"), "method");
  EXPECT_EQ(node.at("start_line"), 3);
  ASSERT_EQ(sva_extract_ces(ctx, src, 2, 2, &out), SVA_OK);
  EXPECT_EQ(json::parse(take(out)).at("kind"), "type_decl");

  size_t count = 0;
  double ratio = 0.0;
  ASSERT_EQ(sva_keyword_metrics(ctx, "an xss and sql-injection bug", R"(["xss","inject"])", &count, &ratio), SVA_OK);
  EXPECT_EQ(count, 2u);
  EXPECT_DOUBLE_EQ(ratio, 2.0 / 5.0);

  ASSERT_EQ(sva_reliable_negatives(ctx, "[[1,0]]", "[[-0.9,0.1],[0.9,0.1],[-2,-0.2]]", 1.0, &out), SVA_OK);
  EXPECT_EQ(json::parse(take(out)), json({0, 2}));
}

TEST_F(Capi, RunReportsErrorsAndWritesManifest) {
  const auto dir = std::filesystem::temp_directory_path() / "svassess_capi";
  std::filesystem::remove_all(dir);
  json cfg = {{"dataset", (dir / "none.jsonl").string()}, {"out", dir.string()}};
  char* out = nullptr;
  EXPECT_EQ(sva_run(ctx, "ingest", cfg.dump().c_str(), &out), SVA_ERR_IO);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest_ingest.json"));
  EXPECT_EQ(sva_run(ctx, "ingest", "{oops", &out), SVA_ERR_PARSE);

  json ok = {{"dataset", SVA_SOURCE_DIR "/data/synthetic_reports.jsonl"}, {"out", dir.string()}};
  ASSERT_EQ(sva_run(ctx, "ingest", ok.dump().c_str(), &out), SVA_OK) << sva_last_error(ctx);
  EXPECT_EQ(json::parse(take(out)).at("records"), 200);
}
