#ifndef POLYTTS_H
#define POLYTTS_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call. Zero means success.
 */
typedef enum {
  POLYTTS_STATUS_OK = 0,
  POLYTTS_STATUS_NULL_ARGUMENT = 1,
  POLYTTS_STATUS_INVALID_UTF8 = 2,
  POLYTTS_STATUS_CONFIG = 3,
  POLYTTS_STATUS_UNKNOWN_SYMBOL = 4,
  POLYTTS_STATUS_G2P = 5,
  POLYTTS_STATUS_PARSE = 6,
  POLYTTS_STATUS_SHAPE = 7,
  POLYTTS_STATUS_CONTRACT = 8,
  POLYTTS_STATUS_AUDIO = 9,
  POLYTTS_STATUS_ALIGNMENT = 10,
  POLYTTS_STATUS_EMPTY_TASK = 11,
  POLYTTS_STATUS_CHECKPOINT = 12,
  POLYTTS_STATUS_ZERO_NORM = 13,
  POLYTTS_STATUS_IO = 14,
  POLYTTS_STATUS_TENSOR = 15,
  POLYTTS_STATUS_JSON = 16,
  POLYTTS_STATUS_WAV = 17,
  POLYTTS_STATUS_PANIC = 18,
} PolyttsStatus;

/**
 * Kind of a unit produced by the frontend.
 */
typedef enum {
  POLYTTS_UNIT_KIND_PHONEME = 0,
  POLYTTS_UNIT_KIND_WORD_BOUNDARY = 1,
  POLYTTS_UNIT_KIND_PAUSE = 2,
  POLYTTS_UNIT_KIND_SENTENCE_MARK = 3,
} PolyttsUnitKind;

/**
 * Mono audio.
 */
typedef struct PolyttsAudio PolyttsAudio;

/**
 * Owned array of floats, such as a speaker embedding.
 */
typedef struct PolyttsFloats PolyttsFloats;

/**
 * Loaded acoustic model, frontend, vocoder and speaker embedder.
 */
typedef struct PolyttsSystem PolyttsSystem;

/**
 * Unit sequence for one utterance. Symbols are NUL-terminated copies.
 */
typedef struct PolyttsUnits PolyttsUnits;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *polytts_last_error_message(void);

/**
 * Library version tag, a static NUL-terminated string.
 */
const char *polytts_version(void);

/**
 * Sample rate of every waveform this library produces.
 */
uint32_t polytts_sample_rate(void);

/**
 * Loads a model checkpoint. `config_path` may be null for the default
 * run configuration.
 *
 * # Safety
 * String arguments are null or NUL-terminated; `out` is writable.
 */
PolyttsStatus polytts_system_load(const char *config_path,
                                  const char *checkpoint_path,
                                  PolyttsSystem **out);

/**
 * # Safety
 * `system` is null or a live handle; it must not be used afterwards.
 */
void polytts_system_free(PolyttsSystem *system);

/**
 * Number of languages the model knows.
 *
 * # Safety
 * `system` is a live handle; `out` is writable.
 */
PolyttsStatus polytts_system_language_count(const PolyttsSystem *system, size_t *out);

/**
 * Numeric id for a language name or id string.
 *
 * # Safety
 * `system` is a live handle; `language` is NUL-terminated; `out` is writable.
 */
PolyttsStatus polytts_system_language_id(const PolyttsSystem *system,
                                         const char *language,
                                         uint32_t *out);

/**
 * Length of the speaker vectors the model expects.
 *
 * # Safety
 * `system` is a live handle; `out` is writable.
 */
PolyttsStatus polytts_system_speaker_dim(const PolyttsSystem *system, size_t *out);

/**
 * Converts text to units with the system's frontend.
 *
 * # Safety
 * `system` is a live handle; strings are NUL-terminated; `out` is writable.
 */
PolyttsStatus polytts_system_text_to_units(const PolyttsSystem *system,
                                           const char *text,
                                           const char *language,
                                           PolyttsUnits **out);

/**
 * Speaker embedding of a WAV file, resampled to the library rate if needed.
 *
 * # Safety
 * `system` is a live handle; `wav_path` is NUL-terminated; `out` is writable.
 */
PolyttsStatus polytts_system_embed_wav(const PolyttsSystem *system,
                                       const char *wav_path,
                                       PolyttsFloats **out);

/**
 * Synthesizes `text` in `language` for the speaker vector `speaker`.
 *
 * # Safety
 * `system` is a live handle; strings are NUL-terminated; `speaker` holds
 * `speaker_len` floats; `out` is writable.
 */
PolyttsStatus polytts_system_synthesize(const PolyttsSystem *system,
                                        const char *text,
                                        const char *language,
                                        const float *speaker,
                                        size_t speaker_len,
                                        PolyttsAudio **out);

/**
 * # Safety
 * `units` is a live handle.
 */
size_t polytts_units_len(const PolyttsUnits *units);

/**
 * Symbol of unit `index`, or null when out of range. Owned by the handle.
 *
 * # Safety
 * `units` is a live handle.
 */
const char *polytts_units_symbol(const PolyttsUnits *units, size_t index);

/**
 * Kind of unit `index`.
 *
 * # Safety
 * `units` is a live handle; `out` is writable.
 */
PolyttsStatus polytts_units_kind(const PolyttsUnits *units, size_t index, PolyttsUnitKind *out);

/**
 * # Safety
 * `units` is null or a live handle; it must not be used afterwards.
 */
void polytts_units_free(PolyttsUnits *units);

/**
 * # Safety
 * `audio` is a live handle.
 */
size_t polytts_audio_len(const PolyttsAudio *audio);

/**
 * Samples owned by the handle; `polytts_audio_len` gives the count.
 *
 * # Safety
 * `audio` is a live handle.
 */
const float *polytts_audio_samples(const PolyttsAudio *audio);

/**
 * # Safety
 * `audio` is a live handle.
 */
uint32_t polytts_audio_sample_rate(const PolyttsAudio *audio);

/**
 * Writes the audio as a 16-bit mono WAV file.
 *
 * # Safety
 * `audio` is a live handle; `path` is NUL-terminated.
 */
PolyttsStatus polytts_audio_write_wav(const PolyttsAudio *audio, const char *path);

/**
 * # Safety
 * `audio` is null or a live handle; it must not be used afterwards.
 */
void polytts_audio_free(PolyttsAudio *audio);

/**
 * # Safety
 * `floats` is a live handle.
 */
size_t polytts_floats_len(const PolyttsFloats *floats);

/**
 * Values owned by the handle; `polytts_floats_len` gives the count.
 *
 * # Safety
 * `floats` is a live handle.
 */
const float *polytts_floats_data(const PolyttsFloats *floats);

/**
 * # Safety
 * `floats` is null or a live handle; it must not be used afterwards.
 */
void polytts_floats_free(PolyttsFloats *floats);

/**
 * Cosine similarity of two equal-length vectors, in [-1, 1].
 *
 * # Safety
 * `a` and `b` hold `len` floats; `out` is writable.
 */
PolyttsStatus polytts_cosine(const float *a, const float *b, size_t len, double *out);

/**
 * Monotonic alignment search over a row-major `frames × units` score
 * matrix. Writes the number of frames per unit to `durations`.
 *
 * # Safety
 * `scores` holds `frames * units` doubles; `durations` has room for `units`.
 */
PolyttsStatus polytts_mas(const double *scores, size_t frames, size_t units, uint32_t *durations);

/**
 * Mean of frame values over each unit's span. With `exclude_zeros`, zero
 * frames are skipped and a unit with none left gets 0.
 *
 * # Safety
 * `values` holds `frames` floats, `durations` holds `units` entries and
 * `out` has room for `units` floats.
 */
PolyttsStatus polytts_phoneme_average(const float *values,
                                      size_t frames,
                                      const uint32_t *durations,
                                      size_t units,
                                      bool exclude_zeros,
                                      float *out);

/**
 * Edit-distance error rate in percent between two symbol sequences.
 *
 * # Safety
 * `reference` and `hypothesis` hold the given number of NUL-terminated
 * strings; `out` is writable.
 */
PolyttsStatus polytts_error_rate(const char *const *reference,
                                 size_t reference_len,
                                 const char *const *hypothesis,
                                 size_t hypothesis_len,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYTTS_H */
