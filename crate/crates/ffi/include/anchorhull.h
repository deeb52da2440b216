#ifndef ANCHORHULL_H
#define ANCHORHULL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define AH_METHOD_GREEDY 0

#define AH_METHOD_HULL_PCA 1

#define AH_METHOD_HULL_TSNE 2

typedef enum AhStatus {
  AH_STATUS_OK = 0,
  AH_STATUS_NULL_POINTER = 1,
  AH_STATUS_INVALID_ARGUMENT = 2,
  AH_STATUS_BUFFER_TOO_SMALL = 3,
  AH_STATUS_K_TOO_LARGE = 4,
  AH_STATUS_DEGENERATE_GEOMETRY = 5,
  AH_STATUS_UNSUPPORTED_DIM = 6,
  AH_STATUS_MIXED_ARTIFACTS = 7,
  AH_STATUS_IO = 8,
  // Numerical failure inside a stage (search, convergence, rank).
  AH_STATUS_NUMERICAL = 9,
  // Malformed input or artifact data.
  AH_STATUS_FORMAT = 10,
  AH_STATUS_PANIC = 99,
} AhStatus;

// Pipeline settings.
typedef struct AhConfig AhConfig;

// Convex hull of a point set.
typedef struct AhHull AhHull;

// A fitted model with its metrics.
typedef struct AhModel AhModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, empty after a success.
// Valid until the next call into this library from the same thread.
const char *ah_last_error(void);

// Library version as a static string.
const char *ah_version(void);

// Hull of `n` points with `dim` (2 or 3) coordinates each, stored row-major.
//
// # Safety
// `points` must hold `n * dim` doubles and `out` must be writable.
enum AhStatus ah_convex_hull(const double *points, size_t n, size_t dim, struct AhHull **out);

// # Safety
// `hull` must come from [`ah_convex_hull`] and not be used afterwards.
void ah_hull_free(struct AhHull *hull);

// # Safety
// `hull` must be a live handle or null.
size_t ah_hull_vertex_count(const struct AhHull *hull);

// Ascending input indices of the hull vertices.
//
// # Safety
// `hull` must be a live handle and `out` must hold `len` values.
enum AhStatus ah_hull_vertices(const struct AhHull *hull, size_t *out, size_t len);

// Number of facets: edges in 2-D, triangles in 3-D.
//
// # Safety
// `hull` must be a live handle or null.
size_t ah_hull_facet_count(const struct AhHull *hull);

// Facets as `dim` indices each, row-major. 2-D edges run counter-clockwise;
// 3-D triangles are oriented outward.
//
// # Safety
// `hull` must be a live handle and `out` must hold `len` values.
enum AhStatus ah_hull_facets(const struct AhHull *hull, size_t *out, size_t len);

// Settings for a corpus file or directory, writing artifacts to `work_dir`.
// Returns null on failure.
//
// # Safety
// Both arguments must be nul-terminated strings.
struct AhConfig *ah_config_new(const char *corpus, const char *work_dir);

// # Safety
// `config` must come from [`ah_config_new`] and not be used afterwards.
void ah_config_free(struct AhConfig *config);

// One of the `AH_METHOD_*` constants.
//
// # Safety
// `config` must be a live handle.
enum AhStatus ah_config_set_method(struct AhConfig *config, int32_t method);

// # Safety
// `config` must be a live handle.
enum AhStatus ah_config_set_topics(struct AhConfig *config, size_t k);

// Seed for the held-out split, the embedding and the held-out estimator.
//
// # Safety
// `config` must be a live handle.
enum AhStatus ah_config_set_seed(struct AhConfig *config, uint64_t seed);

// Minimum corpus frequency for a word to stay in the vocabulary.
//
// # Safety
// `config` must be a live handle.
enum AhStatus ah_config_set_min_freq(struct AhConfig *config, uint64_t min_freq);

// Curation settings for the small bundled example corpus.
//
// # Safety
// `config` must be a live handle.
enum AhStatus ah_config_use_toy_curation(struct AhConfig *config);

// Runs every stage.
//
// # Safety
// `config` must be a live handle and `out` must be writable.
enum AhStatus ah_run_pipeline(const struct AhConfig *config, struct AhModel **out);

// # Safety
// `model` must come from [`ah_run_pipeline`] and not be used afterwards.
void ah_model_free(struct AhModel *model);

// # Safety
// `model` must be a live handle or null.
size_t ah_model_topics(const struct AhModel *model);

// # Safety
// `model` must be a live handle or null.
size_t ah_model_vocab_size(const struct AhModel *model);

// Word-given-topic probabilities, vocabulary-major (`vocab_size * topics` values).
//
// # Safety
// `model` must be a live handle and `out` must hold `len` values.
enum AhStatus ah_model_topic_word(const struct AhModel *model, double *out, size_t len);

// Anchor word ids of the topics, in topic order.
//
// # Safety
// `model` must be a live handle and `out` must hold `len` values.
enum AhStatus ah_model_anchors(const struct AhModel *model, size_t *out, size_t len);

// Vocabulary entry `id`, or null when out of range. Release with [`ah_string_free`].
//
// # Safety
// `model` must be a live handle or null.
char *ah_model_token(const struct AhModel *model, size_t id);

// Metrics report as JSON. Release with [`ah_string_free`].
//
// # Safety
// `model` must be a live handle or null.
char *ah_model_metrics_json(const struct AhModel *model);

// # Safety
// `s` must come from this library and not be used afterwards.
void ah_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANCHORHULL_H */
