#ifndef SKILLSIM_H
#define SKILLSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by all functions.
typedef enum SkillsimStatus {
  SKILLSIM_STATUS_OK = 0,
  SKILLSIM_STATUS_NULL_POINTER = 1,
  SKILLSIM_STATUS_INVALID_UTF8 = 2,
  SKILLSIM_STATUS_IO = 3,
  SKILLSIM_STATUS_FORMAT = 4,
  SKILLSIM_STATUS_INVALID_ARGUMENT = 5,
  SKILLSIM_STATUS_EMPTY_TITLE = 6,
  SKILLSIM_STATUS_DIMENSION_MISMATCH = 7,
  SKILLSIM_STATUS_BUFFER_TOO_SMALL = 8,
  SKILLSIM_STATUS_PANIC = 99,
} SkillsimStatus;

// Trained title encoder.
typedef struct SkillsimEncoder SkillsimEncoder;

// Exact nearest-neighbour index over unit vectors.
typedef struct SkillsimIndex SkillsimIndex;

// Ranked `(id, score)` list returned by `skillsim_index_rank`.
typedef struct SkillsimRanking SkillsimRanking;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after success.
// The pointer stays valid until the next call on the same thread.
const char *skillsim_last_error(void);

// Loads an encoder model file into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SkillsimStatus skillsim_encoder_load(const char *path, struct SkillsimEncoder **out);

// # Safety
// `encoder` must come from `skillsim_encoder_load` or be null.
void skillsim_encoder_free(struct SkillsimEncoder *encoder);

// Embedding dimension, or 0 for a null handle.
//
// # Safety
// `encoder` must be a live handle or null.
size_t skillsim_encoder_dim(const struct SkillsimEncoder *encoder);

// Writes the unit-norm embedding of `title` to `out[0..dim]`.
//
// # Safety
// `title` must be NUL-terminated; `out` must hold `out_len` doubles.
enum SkillsimStatus skillsim_encoder_encode(const struct SkillsimEncoder *encoder,
                                            const char *title,
                                            double *out,
                                            size_t out_len);

// Loads an index file into `*out`.
//
// # Safety
// `path` must be NUL-terminated and `out` a valid pointer.
enum SkillsimStatus skillsim_index_load(const char *path, struct SkillsimIndex **out);

// Encodes `n` titles with `encoder` and indexes them under `ids`. Titles
// that normalize to nothing are skipped.
//
// # Safety
// `ids` and `titles` must each point to `n` NUL-terminated strings.
enum SkillsimStatus skillsim_index_build(const struct SkillsimEncoder *encoder,
                                         const char *const *ids,
                                         const char *const *titles,
                                         size_t n,
                                         struct SkillsimIndex **out);

// # Safety
// `index` must be a live handle.
enum SkillsimStatus skillsim_index_save(const struct SkillsimIndex *index, const char *path);

// Number of indexed entries, or 0 for a null handle.
//
// # Safety
// `index` must be a live handle or null.
size_t skillsim_index_len(const struct SkillsimIndex *index);

// # Safety
// `index` must come from a `skillsim_index_*` constructor or be null.
void skillsim_index_free(struct SkillsimIndex *index);

// Ranks the index against a unit query vector. `k == 0` keeps every entry.
// Scores descend; ties are broken by ascending id.
//
// # Safety
// `query` must hold `dim` doubles and `out` be a valid pointer.
enum SkillsimStatus skillsim_index_rank(const struct SkillsimIndex *index,
                                        const double *query,
                                        size_t dim,
                                        size_t k,
                                        struct SkillsimRanking **out);

// # Safety
// `ranking` must be a live handle or null.
size_t skillsim_ranking_len(const struct SkillsimRanking *ranking);

// Id at position `i`, or null when out of range. Owned by the ranking.
//
// # Safety
// `ranking` must be a live handle or null.
const char *skillsim_ranking_id(const struct SkillsimRanking *ranking, size_t i);

// Score at position `i`, or NaN when out of range.
//
// # Safety
// `ranking` must be a live handle or null.
double skillsim_ranking_score(const struct SkillsimRanking *ranking, size_t i);

// # Safety
// `ranking` must come from `skillsim_index_rank` or be null.
void skillsim_ranking_free(struct SkillsimRanking *ranking);

// `1 - cos(u, v)` for two vectors of length `n`.
//
// # Safety
// `u` and `v` must hold `n` doubles; `out` must be a valid pointer.
enum SkillsimStatus skillsim_cosine_distance(const double *u,
                                             const double *v,
                                             size_t n,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKILLSIM_H */
