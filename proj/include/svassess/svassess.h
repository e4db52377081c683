#ifndef SVASSESS_H
#define SVASSESS_H

#include <stddef.h>

#if defined(SVA_BUILDING_LIBRARY)
#define SVA_API __attribute__((visibility("default")))
#else
#define SVA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sva_status {
  SVA_OK = 0,
  SVA_ERR_INVALID_ARGUMENT = 1,
  SVA_ERR_PARSE = 2,
  SVA_ERR_SCHEMA = 3,
  SVA_ERR_IO = 4,
  SVA_ERR_RUNTIME = 5,
  SVA_ERR_NULL = 6
} sva_status;

typedef struct sva_context sva_context;
typedef struct sva_feature_model sva_feature_model;

SVA_API const char* sva_version(void);
SVA_API const char* sva_status_string(sva_status status);
/* 0 on success, 1 for validation failures, 2 for runtime failures. */
SVA_API int sva_exit_code(sva_status status);

/* Reads ASSESS_LOG (trace, debug, info, warn, error, off) for the log level. */
SVA_API sva_status sva_context_new(sva_context** out);
SVA_API void sva_context_free(sva_context* ctx);
/* Message of the last failed call on ctx; "" when none. Owned by ctx. */
SVA_API const char* sva_last_error(const sva_context* ctx);
SVA_API sva_status sva_set_log_level(sva_context* ctx, const char* level);

/* Strings returned through char** are allocated by the library. */
SVA_API void sva_string_free(char* s);

/* Runs a pipeline subcommand with a JSON config object. */
SVA_API sva_status sva_run(sva_context* ctx, const char* subcommand, const char* config_json, char** result_json);

/* Text and corpus helpers. */
SVA_API sva_status sva_parse_diff(sva_context* ctx, const char* diff, char** files_json);
SVA_API sva_status sva_validate_dataset(sva_context* ctx, const char* path, const char* kind, char** violations_json);
SVA_API sva_status sva_preprocess_text(sva_context* ctx, const char* text, char** tokens_json);
SVA_API sva_status sva_tokenize_code(sva_context* ctx, const char* code, char** tokens_json);
SVA_API sva_status sva_porter_stem(sva_context* ctx, const char* word, char** stem);

/* Feature models. kind is "word", "char_word" or "char"; nlp_config_json may
   be NULL for defaults. docs_json is an array of token arrays. */
SVA_API sva_status sva_feature_model_fit(sva_context* ctx, const char* kind, const char* nlp_config_json,
                                         const char* docs_json, sva_feature_model** out);
SVA_API sva_status sva_feature_model_load(sva_context* ctx, const char* model_json, sva_feature_model** out);
SVA_API sva_status sva_feature_model_to_json(sva_context* ctx, const sva_feature_model* model, char** model_json);
SVA_API sva_status sva_feature_model_width(sva_context* ctx, const sva_feature_model* model, size_t* width);
SVA_API sva_status sva_feature_model_transform(sva_context* ctx, const sva_feature_model* model,
                                               const char* tokens_json, char** sparse_json);
SVA_API void sva_feature_model_free(sva_feature_model* model);

/* Analysis helpers. */
SVA_API sva_status sva_compute_metrics(sva_context* ctx, const char* gold_json, const char* predicted_json,
                                       char** report_json);
/* 1-based inclusive line range; writes the CES node as JSON. */
SVA_API sva_status sva_extract_ces(sva_context* ctx, const char* source, int first_line, int last_line,
                                   char** node_json);
SVA_API sva_status sva_keyword_metrics(sva_context* ctx, const char* text, const char* keywords_json,
                                       size_t* count, double* ratio);
SVA_API sva_status sva_reliable_negatives(sva_context* ctx, const char* positives_json, const char* unlabeled_json,
                                          double alpha, char** indices_json);

#ifdef __cplusplus
}
#endif

#endif
