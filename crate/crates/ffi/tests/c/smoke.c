#include <math.h>
#include <stdio.h>
#include <string.h>

#include "soft_edit.h"

#define CHECK(cond)                                                    \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, \
              #cond);                                                  \
      return 1;                                                        \
    }                                                                  \
  } while (0)

int main(void) {
  SeAlphabet *dna = NULL;
  CHECK(se_alphabet_preset("dna", &dna) == SE_STATUS_OK);
  CHECK(se_alphabet_size(dna) == 4);

  SeEncoding *a = NULL, *c = NULL;
  CHECK(se_encode(dna, "A", &a) == SE_STATUS_OK);
  CHECK(se_encode(dna, "C", &c) == SE_STATUS_OK);

  double v = 0.0;
  CHECK(se_distance(a, c, -1.0, 0, &v) == SE_STATUS_OK);
  CHECK(fabs(v - 1.268941421) < 1e-6);
  CHECK(se_distance(a, c, -1.0, 1, &v) == SE_STATUS_OK);
  CHECK(fabs(v - 1.030535577) < 1e-6);

  double g1[4], g2[4];
  CHECK(se_gradient(a, c, -1.0, 0, &v, g1, 4, g2, 2) == SE_STATUS_BUFFER_TOO_SMALL);
  CHECK(se_gradient(a, c, -1.0, 0, &v, g1, 4, g2, 4) == SE_STATUS_OK);

  char buf[8];
  size_t needed = 0;
  CHECK(se_decode(c, dna, buf, sizeof buf, &needed) == SE_STATUS_OK);
  CHECK(needed == 2 && strcmp(buf, "C") == 0);

  SeEncoding *bad = NULL;
  CHECK(se_encode(dna, "AXG", &bad) == SE_STATUS_UNKNOWN_SYMBOL);
  CHECK(bad == NULL);
  CHECK(se_last_error_message() != NULL);

  size_t d = 0;
  CHECK(se_levenshtein("kitten", "sitting", &d) == SE_STATUS_OK);
  CHECK(d == 3);

  se_encoding_free(a);
  se_encoding_free(c);
  se_alphabet_free(dna);
  puts("ok");
  return 0;
}
