#include "svassess/svassess.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "svassess/common.hpp"
#include "svassess/corpus.hpp"
#include "svassess/eval.hpp"
#include "svassess/features.hpp"
#include "svassess/pipeline.hpp"
#include "svassess/pumine.hpp"
#include "svassess/scopes.hpp"
#include "svassess/textprep.hpp"

using nlohmann::json;
using namespace svassess;

struct sva_context {
  std::string last_error;
};

struct sva_feature_model {
  features::FeatureModel model;
};

namespace {

sva_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return SVA_ERR_INVALID_ARGUMENT;
    case ErrorKind::Parse: return SVA_ERR_PARSE;
    case ErrorKind::Schema: return SVA_ERR_SCHEMA;
    case ErrorKind::Io: return SVA_ERR_IO;
    case ErrorKind::Runtime: return SVA_ERR_RUNTIME;
  }
  return SVA_ERR_RUNTIME;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

json parse_json(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string(what) + ": " + e.what());
  }
}

// Runs body, translating exceptions into a status plus ctx->last_error.
template <typename Body>
sva_status guarded(sva_context* ctx, Body body) {
  if (!ctx) return SVA_ERR_NULL;
  ctx->last_error.clear();
  try {
    body();
    return SVA_OK;
  } catch (const Error& e) {
    ctx->last_error = e.what();
    return status_of(e.kind());
  } catch (const json::exception& e) {
    ctx->last_error = e.what();
    return SVA_ERR_SCHEMA;
  } catch (const std::bad_alloc&) {
    ctx->last_error = "out of memory";
    return SVA_ERR_RUNTIME;
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return SVA_ERR_RUNTIME;
  }
}

void require(const void* p, const char* name) {
  if (!p) fail(ErrorKind::InvalidArgument, std::string(name) + " must not be NULL");
}

void apply_level(const std::string& name) {
  const auto level = spdlog::level::from_str(name);
  if (level == spdlog::level::off && name != "off")
    fail(ErrorKind::InvalidArgument, "unknown log level '" + name + "'");
  spdlog::set_level(level);
}

void init_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_color_mt("svassess");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
}

std::vector<features::TokenDoc> docs_from(const json& j) {
  if (!j.is_array()) fail(ErrorKind::InvalidArgument, "docs must be an array of token arrays");
  std::vector<features::TokenDoc> docs;
  for (const auto& d : j) docs.push_back(d.get<features::TokenDoc>());
  return docs;
}

std::vector<pumine::Vec> vectors_from(const json& j, const char* what) {
  if (!j.is_array()) fail(ErrorKind::InvalidArgument, std::string(what) + " must be an array of vectors");
  return j.get<std::vector<pumine::Vec>>();
}

}  // namespace

extern "C" {

const char* sva_version(void) { return pipeline::kVersion; }

const char* sva_status_string(sva_status status) {
  switch (status) {
    case SVA_OK: return "ok";
    case SVA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SVA_ERR_PARSE: return "parse error";
    case SVA_ERR_SCHEMA: return "schema error";
    case SVA_ERR_IO: return "i/o error";
    case SVA_ERR_RUNTIME: return "runtime error";
    case SVA_ERR_NULL: return "null handle";
  }
  return "unknown status";
}

int sva_exit_code(sva_status status) {
  switch (status) {
    case SVA_OK: return 0;
    case SVA_ERR_RUNTIME: return 2;
    default: return 1;
  }
}

sva_status sva_context_new(sva_context** out) {
  if (!out) return SVA_ERR_NULL;
  *out = nullptr;
  try {
    init_logging();
    auto* ctx = new sva_context();
    if (const char* env = std::getenv("ASSESS_LOG"); env && *env) {
      try {
        apply_level(env);
      } catch (const Error& e) {
        spdlog::warn("ASSESS_LOG ignored: {}", e.what());
      }
    }
    *out = ctx;
    return SVA_OK;
  } catch (...) {
    return SVA_ERR_RUNTIME;
  }
}

void sva_context_free(sva_context* ctx) { delete ctx; }

const char* sva_last_error(const sva_context* ctx) { return ctx ? ctx->last_error.c_str() : "null context"; }

sva_status sva_set_log_level(sva_context* ctx, const char* level) {
  return guarded(ctx, [&] {
    require(level, "level");
    apply_level(level);
  });
}

void sva_string_free(char* s) { std::free(s); }

sva_status sva_run(sva_context* ctx, const char* subcommand, const char* config_json, char** result_json) {
  return guarded(ctx, [&] {
    require(subcommand, "subcommand");
    require(config_json, "config_json");
    require(result_json, "result_json");
    *result_json = nullptr;
    const json result = pipeline::run(subcommand, parse_json(config_json, "config"));
    *result_json = dup(result.dump());
  });
}

sva_status sva_parse_diff(sva_context* ctx, const char* diff, char** files_json) {
  return guarded(ctx, [&] {
    require(diff, "diff");
    require(files_json, "files_json");
    json files = json::array();
    for (const auto& f : corpus::parse_unified_diff(diff)) {
      json hunks = json::array();
      for (const auto& h : f.hunks)
        hunks.push_back({{"pre_start", h.pre_start},
                         {"pre_len", h.pre_len},
                         {"post_start", h.post_start},
                         {"post_len", h.post_len},
                         {"deleted", h.deleted},
                         {"added", h.added}});
      files.push_back({{"path", f.path}, {"hunks", hunks}});
    }
    *files_json = dup(files.dump());
  });
}

sva_status sva_validate_dataset(sva_context* ctx, const char* path, const char* kind, char** violations_json) {
  return guarded(ctx, [&] {
    require(path, "path");
    require(kind, "kind");
    require(violations_json, "violations_json");
    const auto ds = corpus::load_dataset(path, corpus::parse_dataset_kind(kind));
    json v = json::array();
    for (const auto& x : corpus::validate_dataset(ds)) v.push_back({{"record", x.record_id}, {"invariant", x.invariant}});
    *violations_json = dup(v.dump());
  });
}

sva_status sva_preprocess_text(sva_context* ctx, const char* text, char** tokens_json) {
  return guarded(ctx, [&] {
    require(text, "text");
    require(tokens_json, "tokens_json");
    static const auto prep = text::PrepConfig::with_bundled_stopwords();
    *tokens_json = dup(json(text::preprocess_text(text, prep)).dump());
  });
}

sva_status sva_tokenize_code(sva_context* ctx, const char* code, char** tokens_json) {
  return guarded(ctx, [&] {
    require(code, "code");
    require(tokens_json, "tokens_json");
    *tokens_json = dup(json(text::tokenize_code(code)).dump());
  });
}

sva_status sva_porter_stem(sva_context* ctx, const char* word, char** stem) {
  return guarded(ctx, [&] {
    require(word, "word");
    require(stem, "stem");
    *stem = dup(text::porter_stem(word));
  });
}

sva_status sva_feature_model_fit(sva_context* ctx, const char* kind, const char* nlp_config_json, const char* docs_json,
                                 sva_feature_model** out) {
  return guarded(ctx, [&] {
    require(kind, "kind");
    require(docs_json, "docs_json");
    require(out, "out");
    *out = nullptr;
    const auto cfg = nlp_config_json ? features::NlpConfig::from_json(parse_json(nlp_config_json, "nlp config"))
                                     : features::NlpConfig{};
    const auto docs = docs_from(parse_json(docs_json, "docs"));
    const std::string k = kind;
    auto m = std::make_unique<sva_feature_model>();
    if (k == "word") m->model = features::fit_word_model(docs, cfg);
    else if (k == "char_word") m->model = features::fit_char_word_model(docs, cfg);
    else if (k == "char") m->model = features::fit_char_model(docs, cfg);
    else fail(ErrorKind::InvalidArgument, "unknown feature model kind '" + k + "' (word, char_word, char)");
    *out = m.release();
  });
}

sva_status sva_feature_model_load(sva_context* ctx, const char* model_json, sva_feature_model** out) {
  return guarded(ctx, [&] {
    require(model_json, "model_json");
    require(out, "out");
    *out = nullptr;
    auto m = std::make_unique<sva_feature_model>();
    m->model = features::FeatureModel::from_json(parse_json(model_json, "feature model"));
    *out = m.release();
  });
}

sva_status sva_feature_model_to_json(sva_context* ctx, const sva_feature_model* model, char** model_json) {
  return guarded(ctx, [&] {
    require(model, "model");
    require(model_json, "model_json");
    *model_json = dup(model->model.to_json().dump());
  });
}

sva_status sva_feature_model_width(sva_context* ctx, const sva_feature_model* model, size_t* width) {
  return guarded(ctx, [&] {
    require(model, "model");
    require(width, "width");
    *width = model->model.width();
  });
}

sva_status sva_feature_model_transform(sva_context* ctx, const sva_feature_model* model, const char* tokens_json,
                                       char** sparse_json) {
  return guarded(ctx, [&] {
    require(model, "model");
    require(tokens_json, "tokens_json");
    require(sparse_json, "sparse_json");
    const auto tokens = parse_json(tokens_json, "tokens").get<features::TokenDoc>();
    *sparse_json = dup(features::sparse_to_json(model->model.transform(tokens)).dump());
  });
}

void sva_feature_model_free(sva_feature_model* model) { delete model; }

sva_status sva_compute_metrics(sva_context* ctx, const char* gold_json, const char* predicted_json,
                               char** report_json) {
  return guarded(ctx, [&] {
    require(gold_json, "gold_json");
    require(predicted_json, "predicted_json");
    require(report_json, "report_json");
    const auto gold = parse_json(gold_json, "gold").get<std::vector<std::string>>();
    const auto pred = parse_json(predicted_json, "predicted").get<std::vector<std::string>>();
    *report_json = dup(eval::compute_metrics(gold, pred).to_json().dump());
  });
}

sva_status sva_extract_ces(sva_context* ctx, const char* source, int first_line, int last_line, char** node_json) {
  return guarded(ctx, [&] {
    require(source, "source");
    require(node_json, "node_json");
    const auto tree = scopes::parse_scopes(source);
    const int i = scopes::extract_ces(tree, first_line, last_line);
    const auto& n = tree.nodes[static_cast<std::size_t>(i)];
    *node_json = dup(json{{"index", i},
                          {"kind", scopes::node_kind_name(n.kind)},
                          {"start_line", n.start_line},
                          {"end_line", n.end_line},
                          {"size", n.size},
                          {"depth", n.depth}}
                         .dump());
  });
}

sva_status sva_keyword_metrics(sva_context* ctx, const char* text, const char* keywords_json, size_t* count,
                               double* ratio) {
  return guarded(ctx, [&] {
    require(text, "text");
    require(keywords_json, "keywords_json");
    require(count, "count");
    require(ratio, "ratio");
    const pumine::KeywordSet kw(parse_json(keywords_json, "keywords").get<std::vector<std::string>>());
    const auto m = pumine::keyword_metrics(text, kw);
    *count = m.count;
    *ratio = m.ratio;
  });
}

sva_status sva_reliable_negatives(sva_context* ctx, const char* positives_json, const char* unlabeled_json,
                                  double alpha, char** indices_json) {
  return guarded(ctx, [&] {
    require(positives_json, "positives_json");
    require(unlabeled_json, "unlabeled_json");
    require(indices_json, "indices_json");
    const auto p = vectors_from(parse_json(positives_json, "positives"), "positives");
    const auto u = vectors_from(parse_json(unlabeled_json, "unlabeled"), "unlabeled");
    *indices_json = dup(json(pumine::reliable_negatives(p, u, alpha).indices).dump());
  });
}

}  // extern "C"
