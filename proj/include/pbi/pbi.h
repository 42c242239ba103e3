/* Popularity-debiased graph recommender: C interface.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns a pbi_status; on
 * failure pbi_last_error() describes the problem (per thread, valid until
 * the next failing call on that thread). Strings returned through char**
 * out-parameters are heap-allocated and released with pbi_string_free.
 */
#ifndef PBI_PBI_H_
#define PBI_PBI_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(PBI_BUILDING_LIBRARY)
#    define PBI_API __declspec(dllexport)
#  else
#    define PBI_API __declspec(dllimport)
#  endif
#else
#  define PBI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pbi_status {
  PBI_OK = 0,
  PBI_ERR_INVALID_ARGUMENT = 1,
  PBI_ERR_IO = 2,
  PBI_ERR_PARSE = 3,
  PBI_ERR_SHAPE = 4,
  PBI_ERR_DIVERGED = 5,
  PBI_ERR_INTERNAL = 6
} pbi_status;

typedef struct pbi_graph pbi_graph;
typedef struct pbi_config pbi_config;
typedef struct pbi_model pbi_model;

typedef struct pbi_graph_stats {
  uint64_t num_users;
  uint64_t num_items;
  uint64_t num_edges;
  uint64_t duplicates_dropped;
  double density;
} pbi_graph_stats;

PBI_API const char* pbi_version(void);
PBI_API const char* pbi_last_error(void);
PBI_API const char* pbi_status_name(pbi_status status);
PBI_API void pbi_string_free(char* s);

/* Warning sink; NULL restores the default (stderr). */
typedef void (*pbi_log_fn)(const char* message, void* user_data);
PBI_API void pbi_set_log_handler(pbi_log_fn fn, void* user_data);

/* Worker threads for ranking and propagation; 0 = single-threaded. */
PBI_API void pbi_set_threads(unsigned n);

/* ---- graphs ---- */

/* Loads a `user_id<TAB>item_id` edge list. */
PBI_API pbi_status pbi_graph_load(const char* path, pbi_graph** out);
/* Loads train and test files into one shared index space (train ids first). */
PBI_API pbi_status pbi_graph_load_pair(const char* train_path, const char* test_path,
                                       pbi_graph** train_out, pbi_graph** test_out);
PBI_API void pbi_graph_free(pbi_graph* graph);
PBI_API pbi_status pbi_graph_stats_get(const pbi_graph* graph, pbi_graph_stats* out);
/* User-wise random holdout; round(test_fraction * d_u) edges per user go to test. */
PBI_API pbi_status pbi_graph_split(const pbi_graph* graph, double test_fraction, uint64_t seed,
                                   pbi_graph** train_out, pbi_graph** test_out);
/* Writes the edges with their original ids, sorted by (user, item) index. */
PBI_API pbi_status pbi_graph_write(const pbi_graph* graph, const char* path);
/* Degree threshold marking roughly the top `top_fraction` of items popular. */
PBI_API pbi_status pbi_graph_percentile_threshold(const pbi_graph* graph, double top_fraction,
                                                  uint32_t* alpha_out);

/* ---- configuration (key=value, see pbi_config_keys) ---- */

PBI_API pbi_status pbi_config_new(pbi_config** out);
PBI_API void pbi_config_free(pbi_config* config);
PBI_API pbi_status pbi_config_set(pbi_config* config, const char* key, const char* value);
PBI_API pbi_status pbi_config_get(const pbi_config* config, const char* key, char** value_out);
/* Applies the key=value lines of a config file on top of the current values. */
PBI_API pbi_status pbi_config_load_file(pbi_config* config, const char* path);
/* Canonical key=value text of every field. */
PBI_API pbi_status pbi_config_to_text(const pbi_config* config, char** text_out);
/* Newline-separated list of valid keys. */
PBI_API const char* pbi_config_keys(void);
PBI_API pbi_status pbi_config_validate(const pbi_config* config);

/* ---- training ---- */

/* Receives one JSON object per finished epoch. */
typedef void (*pbi_epoch_fn)(const char* epoch_json, void* user_data);

/* Trains on `train`; `valid` drives early stopping. With `valid` NULL a
 * validation set of valid_fraction per user is carved out of `train` and
 * held back from training (valid_fraction=0: no early stopping). The returned
 * model holds the best-validation embeddings. `summary_json` (nullable)
 * receives {best_epoch, best_valid_ndcg, epochs_run, stopped_early, alpha}. */
PBI_API pbi_status pbi_train(const pbi_graph* train, const pbi_graph* valid,
                             const pbi_config* config, pbi_epoch_fn on_epoch, void* user_data,
                             pbi_model** model_out, char** summary_json);

/* Writes one epoch's sampled triples as `origin<TAB>u<TAB>i<TAB>j` lines
 * (dense indices), exactly as pbi_train(train, NULL, config, ...) draws them
 * for epoch 0. */
PBI_API pbi_status pbi_dump_triples(const pbi_graph* train, const pbi_config* config,
                                    const char* path);

PBI_API void pbi_model_free(pbi_model* model);
PBI_API pbi_status pbi_model_save(const pbi_model* model, const char* path);
PBI_API pbi_status pbi_model_load(const char* path, pbi_model** out);
PBI_API pbi_status pbi_model_shape(const pbi_model* model, uint64_t* num_users,
                                   uint64_t* num_items, uint64_t* dim);
/* Score of (user, item) by dense index, using the propagated embeddings of
 * the model over `train`. */
PBI_API pbi_status pbi_model_score(const pbi_model* model, const pbi_graph* train, uint32_t user,
                                   uint32_t item, double* score_out);

/* Header of a checkpoint file as JSON. */
PBI_API pbi_status pbi_checkpoint_inspect(const char* path, char** json_out);

/* ---- evaluation ---- */

/* Ranks every test user's non-training items and reports F1/NDCG/MAP at k
 * plus PRU and PRI as JSON. `fingerprint` (nullable) is echoed back. */
PBI_API pbi_status pbi_evaluate(const pbi_model* model, const pbi_graph* train,
                                const pbi_graph* test, uint32_t k, const char* fingerprint,
                                char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* PBI_PBI_H_ */
