#ifndef SELECTIVBENCH_H
#define SELECTIVBENCH_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_ARGUMENT = 2,
  SB_STATUS_INVALID_CONFIG = 3,
  SB_STATUS_CONSTRUCTION_FAILED = 4,
  SB_STATUS_IO = 5,
  SB_STATUS_FORMAT = 6,
  SB_STATUS_HASH_MISMATCH = 7,
  SB_STATUS_NUMERICAL = 8,
  SB_STATUS_PANIC = 9,
  SB_STATUS_OTHER = 10,
} SbStatus;

// Opaque handle to one generated dataset (or a gap-sweep family).
typedef struct SbDataset SbDataset;

// Opaque grammar handle.
typedef struct SbGrammar SbGrammar;

// Task generation settings. `split` is 0 for train, 1 for test.
typedef struct SbTaskConfig {
  uint8_t task;
  uint8_t split;
  size_t t_min;
  size_t t_max;
  size_t n_min;
  size_t n_max;
  size_t test_gap;
  float gamma;
  double p_gap;
  size_t num_sequences;
  uint64_t seed;
} SbTaskConfig;

// Oracle evaluation summary.
typedef struct SbOracleResult {
  size_t sequences;
  size_t positions;
  size_t mismatches;
  size_t failures;
  // NaN when undefined.
  double accuracy_all;
  double accuracy_symbols;
  bool certified;
} SbOracleResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *sb_last_error_message(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not be freed twice.
void sb_string_free(char *s);

// Builds a grammar.
//
// # Safety
// `out` must be a valid pointer.
enum SbStatus sb_grammar_build(size_t num_observables,
                               size_t ambiguity,
                               double p_transition,
                               double p_end,
                               uint64_t seed,
                               struct SbGrammar **out);

// Parses a grammar from its JSON document.
//
// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum SbStatus sb_grammar_from_json(const char *json, struct SbGrammar **out);

// Serializes a grammar; free the result with `sb_string_free`.
//
// # Safety
// `grammar` must be a live handle and `out` a valid pointer.
enum SbStatus sb_grammar_to_json(const struct SbGrammar *grammar, char **out);

// # Safety
// `grammar` must come from this library and not be freed twice.
void sb_grammar_free(struct SbGrammar *grammar);

// Vocabulary size including the terminal symbol; 0 for a null handle.
//
// # Safety
// `grammar` must be null or a live handle.
size_t sb_grammar_vocab_size(const struct SbGrammar *grammar);

// Number of non-terminal latent states; 0 for a null handle.
//
// # Safety
// `grammar` must be null or a live handle.
size_t sb_grammar_latent_count(const struct SbGrammar *grammar);

// # Safety
// `grammar` must be a live handle and `out` a valid pointer.
enum SbStatus sb_grammar_topological_entropy(const struct SbGrammar *grammar, double *out);

// Writes whether the grammar is exactly disambiguable.
//
// # Safety
// `grammar` must be a live handle and `out` a valid pointer.
enum SbStatus sb_grammar_validate(const struct SbGrammar *grammar, bool *out);

// Default task settings (Task 1, train split, 1000 sequences).
struct SbTaskConfig sb_task_config_default(void);

// Generates a dataset from a grammar.
//
// # Safety
// `grammar` must be a live handle; `config` and `out` valid pointers.
enum SbStatus sb_dataset_generate(const struct SbGrammar *grammar,
                                  const struct SbTaskConfig *config,
                                  struct SbDataset **out);

// Total sequences in the dataset; 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t sb_dataset_sequence_count(const struct SbDataset *dataset);

// Total tokens in the dataset; 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t sb_dataset_token_count(const struct SbDataset *dataset);

// # Safety
// `dataset` must come from this library and not be freed twice.
void sb_dataset_free(struct SbDataset *dataset);

// Runs the oracle over every sequence of the dataset.
//
// # Safety
// Handles must be live and `out` a valid pointer.
enum SbStatus sb_oracle_eval(const struct SbGrammar *grammar,
                             const struct SbDataset *dataset,
                             struct SbOracleResult *out);

// Transition-gate parameter count for a model name such as `"deltanet"`.
//
// # Safety
// `model` must be a nul-terminated string and `out` a valid pointer.
enum SbStatus sb_gate_params(const char *model,
                             size_t d,
                             size_t n_heads,
                             size_t d_state,
                             size_t n_householder,
                             size_t expansion,
                             uint64_t *out);

// Recurrent state size. Fails with `InvalidArgument` for softmax attention,
// whose cache is unbounded.
//
// # Safety
// `model` must be a nul-terminated string and `out` a valid pointer.
enum SbStatus sb_state_size(const char *model,
                            size_t d,
                            size_t n_heads,
                            size_t d_state,
                            size_t n_householder,
                            size_t expansion,
                            uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SELECTIVBENCH_H */
