#ifndef SOFT_EDIT_H
#define SOFT_EDIT_H

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum SeStatus {
  SE_STATUS_OK = 0,
  SE_STATUS_NULL_POINTER = 1,
  SE_STATUS_INVALID_UTF8 = 2,
  SE_STATUS_INVALID_ARGUMENT = 3,
  SE_STATUS_UNKNOWN_SYMBOL = 4,
  SE_STATUS_ALPHABET_MISMATCH = 5,
  SE_STATUS_BUFFER_TOO_SMALL = 6,
  SE_STATUS_INTERNAL = 7,
  SE_STATUS_PANIC = 8,
} SeStatus;

/*
 Opaque symbol alphabet.
 */
typedef struct SeAlphabet SeAlphabet;

/*
 Opaque `length x alphabet_size` encoding matrix.
 */
typedef struct SeEncoding SeEncoding;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null if none.

 The pointer stays valid until the next failing call on the same thread.
 */
const char *se_last_error_message(void);

/*
 Looks up a preset alphabet (`"dna"` or `"protein"`).

 # Safety
 `name` must be a nul-terminated string and `out` a valid pointer.
 */
enum SeStatus se_alphabet_preset(const char *name, struct SeAlphabet **out);

/*
 Builds an alphabet from a string of distinct symbols.

 # Safety
 `symbols` must be a nul-terminated string and `out` a valid pointer.
 */
enum SeStatus se_alphabet_new(const char *symbols, struct SeAlphabet **out);

/*
 Number of symbols, or 0 for a null handle.

 # Safety
 `alphabet` must be null or a live handle.
 */
size_t se_alphabet_size(const struct SeAlphabet *alphabet);

/*
 # Safety
 `alphabet` must be null or a handle not yet freed.
 */
void se_alphabet_free(struct SeAlphabet *alphabet);

/*
 One-hot encodes `seq`.

 # Safety
 `alphabet` must be a live handle, `seq` a nul-terminated string and `out` a valid pointer.
 */
enum SeStatus se_encode(const struct SeAlphabet *alphabet,
                        const char *seq,
                        struct SeEncoding **out);

/*
 Copies a row-major `rows x alphabet_size` matrix whose rows are
 probability vectors.

 # Safety
 `data` must point to `rows * alphabet_size` doubles (may be null when
 `rows` is 0) and `out` must be a valid pointer.
 */
enum SeStatus se_encoding_from_matrix(const double *data,
                                      size_t rows,
                                      size_t alphabet_size,
                                      struct SeEncoding **out);

/*
 Number of rows, or 0 for a null handle.

 # Safety
 `x` must be null or a live handle.
 */
size_t se_encoding_len(const struct SeEncoding *x);

/*
 Row width, or 0 for a null handle.

 # Safety
 `x` must be null or a live handle.
 */
size_t se_encoding_alphabet_size(const struct SeEncoding *x);

/*
 # Safety
 `x` must be null or a handle not yet freed.
 */
void se_encoding_free(struct SeEncoding *x);

/*
 Soft edit distance at temperature `tau` (< 0); the unbiased variant
 when `unbiased` is nonzero.

 # Safety
 `x1`, `x2` must be live handles and `out` a valid pointer.
 */
enum SeStatus se_distance(const struct SeEncoding *x1,
                          const struct SeEncoding *x2,
                          double tau,
                          int32_t unbiased,
                          double *out);

/*
 Classic edit distance between two strings, counted in Unicode scalar values.

 # Safety
 `s1`, `s2` must be nul-terminated strings and `out` a valid pointer.
 */
enum SeStatus se_levenshtein(const char *s1, const char *s2, size_t *out);

/*
 Value and gradient of the distance with respect to both matrices.

 `d_x1` and `d_x2` receive row-major gradients and must hold at least
 `len * alphabet_size` doubles of the matching input; otherwise
 [`SeStatus::BufferTooSmall`] is returned and nothing is written.

 # Safety
 Handles must be live; buffers must be valid for the stated lengths.
 */
enum SeStatus se_gradient(const struct SeEncoding *x1,
                          const struct SeEncoding *x2,
                          double tau,
                          int32_t unbiased,
                          double *out_value,
                          double *d_x1,
                          size_t d_x1_len,
                          double *d_x2,
                          size_t d_x2_len);

/*
 Writes the most likely symbol of each row as a nul-terminated UTF-8 string.

 `out_needed` (if non-null) always receives the required buffer size in
 bytes including the terminator; [`SeStatus::BufferTooSmall`] is returned
 when `buf_len` is smaller.

 # Safety
 Handles must be live and `buf` valid for `buf_len` bytes.
 */
enum SeStatus se_decode(const struct SeEncoding *x,
                        const struct SeAlphabet *alphabet,
                        char *buf,
                        size_t buf_len,
                        size_t *out_needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOFT_EDIT_H */
