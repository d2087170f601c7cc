#ifndef THREADGAUGE_H
#define THREADGAUGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum {
  TgOk = 0,
  TgNullArgument = 1,
  TgUtf8Error = 2,
  TgIoError = 3,
  TgParseError = 4,
  TgInvalidInput = 5,
  TgNoConverge = 6,
} TgStatus;

/**
 * Reply interaction type.
 */
typedef enum {
  TgAdverse = 0,
  TgCorrective = 1,
  TgAffirmation = 2,
  TgNeutral = 3,
} TgLabel;

/**
 * Opaque directive-intensity lexicon handle.
 */
typedef struct TgLexicon TgLexicon;

/**
 * Opaque reply-classification rule-set handle.
 */
typedef struct TgRuleSet TgRuleSet;

/**
 * Directive-intensity score of one text.
 */
typedef struct {
  uint32_t matches_action;
  uint32_t matches_sensitive;
  uint32_t di;
} TgScore;

/**
 * Wilson score interval for a binomial proportion.
 */
typedef struct {
  uint64_t k;
  uint64_t n;
  double p_hat;
  double lo;
  double hi;
} TgWilson;

/**
 * Simple logistic regression fit of y on [1, x].
 */
typedef struct {
  double alpha;
  double beta;
  double se_beta;
  double loglik;
  uint32_t n_iter;
} TgLogisticFit;

/**
 * Percentile bootstrap interval.
 */
typedef struct {
  double point;
  double ci_lo;
  double ci_hi;
} TgBootstrap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tg_version(void);

/**
 * Load a lexicon from a CSV file with header `pattern_id,category,regex`.
 * On success writes a new handle to `out`; release with
 * [`tg_lexicon_free`].
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
TgStatus tg_lexicon_load_csv(const char *path, uint32_t cap, TgLexicon **out);

/**
 * Pattern counts per category.
 *
 * # Safety
 * `lexicon` must be a live handle; `action`/`sensitive` must be valid.
 */
TgStatus tg_lexicon_counts(const TgLexicon *lexicon, uint32_t *action, uint32_t *sensitive);

/**
 * Release a lexicon handle. NULL is ignored.
 *
 * # Safety
 * `lexicon` must have come from [`tg_lexicon_load_csv`] and not been
 * freed already.
 */
void tg_lexicon_free(TgLexicon *lexicon);

/**
 * Score one text. `count_occurrences = false` counts each pattern at
 * most once (the default scoring mode).
 *
 * # Safety
 * `lexicon` must be a live handle; `text` a valid NUL-terminated string.
 */
TgStatus tg_score_text(const TgLexicon *lexicon,
                       const char *text,
                       bool count_occurrences,
                       TgScore *out);

/**
 * Load reply-classification rules from a CSV file with header
 * `family,regex`. Release with [`tg_ruleset_free`].
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
TgStatus tg_ruleset_load_csv(const char *path, TgRuleSet **out);

/**
 * Release a rule-set handle. NULL is ignored.
 *
 * # Safety
 * `rules` must have come from [`tg_ruleset_load_csv`] and not been freed
 * already.
 */
void tg_ruleset_free(TgRuleSet *rules);

/**
 * Classify one comment body under the fixed precedence
 * Adverse > Corrective > Affirmation > Neutral.
 *
 * # Safety
 * `rules` must be a live handle; `body` a valid NUL-terminated string.
 */
TgStatus tg_classify_comment(const TgRuleSet *rules, const char *body, TgLabel *out);

/**
 * Wilson score interval for `k` successes in `n` trials at significance
 * `alpha`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
TgStatus tg_wilson_interval(uint64_t k, uint64_t n, double alpha, TgWilson *out);

/**
 * Maximum-likelihood logistic regression of a 0/1 outcome on one
 * predictor. `y` holds 0/1 bytes.
 *
 * # Safety
 * `x` and `y` must point to `n` readable elements; `out` must be valid.
 */
TgStatus tg_logistic_fit(const double *x, const uint8_t *y, uintptr_t n, TgLogisticFit *out);

/**
 * Seeded percentile bootstrap of the mean or median over `values`.
 *
 * # Safety
 * `values` must point to `n` readable elements; `out` must be valid.
 */
TgStatus tg_bootstrap_percentile(const double *values,
                                 uintptr_t n,
                                 bool use_median,
                                 uintptr_t n_resamples,
                                 double alpha,
                                 uint64_t seed,
                                 TgBootstrap *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THREADGAUGE_H */
