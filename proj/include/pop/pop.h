/*
 * pop - prototypical outlier proxy OOD detection.
 *
 * C interface to the pop core: label hierarchies, fixed prototype heads,
 * a small feature extractor, training, OOD scoring, synthetic data and the
 * 2-D toy experiment. All objects are opaque handles created and destroyed
 * through this API. Every fallible call returns a pop_status; on failure,
 * pop_last_error() describes what went wrong (the message is thread-local).
 */
#ifndef POP_POP_H
#define POP_POP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define POP_API __declspec(dllexport)
#else
#define POP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pop_status {
  POP_OK = 0,
  POP_ERR_INVALID_ARGUMENT = 1, /* bad inputs, failed preconditions */
  POP_ERR_CONSTRAINT = 2,       /* violated model constraints (e.g. d <= d_max) */
  POP_ERR_NOT_PSD = 3,          /* similarity matrix not positive semidefinite */
  POP_ERR_NUMERIC = 4,          /* non-finite values, failed decompositions */
  POP_ERR_IO = 5,               /* unreadable or malformed files */
  POP_ERR_INSUFFICIENT_DATA = 6,
  POP_ERR_INTERNAL = 7,
} pop_status;

typedef struct pop_tree pop_tree;
typedef struct pop_distmat pop_distmat;
typedef struct pop_simmat pop_simmat;
typedef struct pop_protos pop_protos;
typedef struct pop_net pop_net;
typedef struct pop_dataset pop_dataset;
typedef struct pop_trainlog pop_trainlog;
typedef struct pop_evalrun pop_evalrun;
typedef struct pop_toy pop_toy;

POP_API const char* pop_version(void);
POP_API const char* pop_last_error(void);

/* ---- label hierarchy ----------------------------------------------------
 * Tree text format: one `id parent height` line per node (root parent `-`),
 * closed by `leaves: id id ...` fixing the class order. */

POP_API pop_status pop_tree_parse(const char* text, pop_tree** out);
POP_API pop_status pop_tree_load(const char* path, pop_tree** out);
POP_API void pop_tree_free(pop_tree* tree);
POP_API pop_status pop_tree_num_leaves(const pop_tree* tree, int* out);
/* Pointer stays valid while the tree lives. */
POP_API pop_status pop_tree_leaf_id(const pop_tree* tree, int class_index, const char** out);
/* Height of the lowest common ancestor of two classes. */
POP_API pop_status pop_tree_lca_distance(const pop_tree* tree, int class_a, int class_b,
                                         long* out);

/* ---- distance / similarity matrices ------------------------------------ */

POP_API pop_status pop_distance_matrix_build(const pop_tree* tree, pop_distmat** out);
/* Appends num_proxies rows/columns at proxy_distance (> d_max, checked). */
POP_API pop_status pop_distmat_augment(const pop_distmat* dist, int num_proxies,
                                       double proxy_distance, pop_distmat** out);
POP_API pop_status pop_distmat_info(const pop_distmat* dist, int* size, int* num_id,
                                    int* num_proxies, double* d_max);
POP_API pop_status pop_distmat_get(const pop_distmat* dist, int row, int col, double* out);
POP_API pop_status pop_distmat_save(const pop_distmat* dist, const char* path);
POP_API void pop_distmat_free(pop_distmat* dist);

/* phi(d) = 1 / (d + 1) applied entrywise. */
POP_API pop_status pop_distmat_to_similarity(const pop_distmat* dist, pop_simmat** out);
POP_API pop_status pop_simmat_info(const pop_simmat* sim, int* size, int* num_id,
                                   int* num_proxies);
POP_API pop_status pop_simmat_get(const pop_simmat* sim, int row, int col, double* out);
POP_API pop_status pop_simmat_save(const pop_simmat* sim, const char* path);
POP_API void pop_simmat_free(pop_simmat* sim);

/* ---- prototype head ------------------------------------------------------
 * W = U P^(1/2) Q^T with S = Q P Q^T; unit columns, W^T W == S to 1e-8. */

/* rotation_random = 0 keeps U = identity; nonzero draws a seeded random
 * orthogonal U (the Gram matrix is unchanged either way). */
POP_API pop_status pop_factor_similarity(const pop_simmat* sim, int rotation_random,
                                         uint64_t rotation_seed, pop_protos** out);
/* Distance matrix -> proxy augmentation -> similarity -> factorization. */
POP_API pop_status pop_protos_build(const pop_tree* tree, int num_proxies, double proxy_distance,
                                    pop_protos** out);
/* Same pipeline without proxies. */
POP_API pop_status pop_protos_build_id(const pop_tree* tree, pop_protos** out);
POP_API pop_status pop_protos_info(const pop_protos* protos, int* dim, int* num_id,
                                   int* num_proxies);
POP_API pop_status pop_protos_weight(const pop_protos* protos, int row, int col, double* out);
POP_API pop_status pop_protos_similarity(const pop_protos* protos, int row, int col, double* out);
/* Cosine logits of a unit-norm feature (length dim); out_logits holds
 * num_id + num_proxies values. */
POP_API pop_status pop_protos_cosine_to(const pop_protos* protos, const double* feature,
                                        size_t feature_len, double* out_logits);
POP_API pop_status pop_protos_save(const pop_protos* protos, const char* path);
POP_API pop_status pop_protos_load(const char* path, pop_protos** out);
POP_API void pop_protos_free(pop_protos* protos);

/* ---- feature extractor --------------------------------------------------- */

POP_API pop_status pop_net_init(const int* layer_dims, size_t num_dims, uint64_t seed,
                                pop_net** out);
POP_API pop_status pop_net_info(const pop_net* net, int* input_dim, int* output_dim, int* epoch);
/* Any of the out pointers may be NULL. out_logits needs num_id + num_proxies
 * slots; out_unit_feature and out_raw_feature need the head dimension. */
POP_API pop_status pop_net_forward(const pop_net* net, const pop_protos* protos,
                                   const double* input, size_t input_len, double* out_logits,
                                   double* out_feature_norm, double* out_unit_feature,
                                   double* out_raw_feature);
POP_API pop_status pop_net_save(const pop_net* net, const char* path);
POP_API pop_status pop_net_load(const char* path, pop_net** out);
POP_API void pop_net_free(pop_net* net);

/* ---- losses --------------------------------------------------------------- */

typedef struct pop_loss_options {
  double beta;         /* scaling factor; <= 0 rejected */
  int variant;         /* 0 = cosine cross-entropy, 1 = HSBL */
  int denominator_all; /* HSBL only: nonzero adds the unmargined true-class term */
  int argmax_all;      /* nonzero widens the predicted-class argmax to proxies */
} pop_loss_options;

/* 10 for up to 10 ID classes, 5 above. */
POP_API pop_status pop_default_beta(int num_id, double* out);
/* similarity must cover all num_id + num_proxies classes; label must be an
 * ID class. out_grad (length = logits_len), out_predicted and out_margin may
 * be NULL. */
POP_API pop_status pop_loss_eval(const double* logits, size_t logits_len, int label,
                                 const pop_simmat* similarity, const pop_loss_options* options,
                                 double* out_value, double* out_grad, int* out_predicted,
                                 double* out_margin);

/* ---- datasets -------------------------------------------------------------
 * CSV: one sample per row, features then the label; OOD rows use label -1. */

enum { POP_ROLE_ID_TRAIN = 0, POP_ROLE_ID_TEST = 1, POP_ROLE_OOD = 2 };

typedef struct pop_synth_options {
  int input_dim;
  int train_per_class;
  int test_per_class;
  int ood_count;
  double stddev;
  double mean_separation;
  uint64_t seed;
  int ood_far;             /* nonzero = far mode, zero = near mode */
  double near_coeff;       /* interpolation between the two closest means */
  int ood_clusters;        /* far-mode cluster count */
  double far_radius_scale; /* multiple of the ID mean spread */
  const double* means;     /* optional num_leaves x input_dim row-major, NULL derives them */
} pop_synth_options;

/* Fills options with the library defaults. */
POP_API pop_status pop_synth_options_default(pop_synth_options* out);
POP_API pop_status pop_dataset_generate(const pop_tree* tree, const pop_synth_options* options,
                                        pop_dataset** out_train, pop_dataset** out_test,
                                        pop_dataset** out_ood);
POP_API pop_status pop_dataset_load(const char* path, int role, pop_dataset** out);
POP_API pop_status pop_dataset_save(const pop_dataset* data, const char* path);
POP_API pop_status pop_dataset_info(const pop_dataset* data, int* count, int* dim, int* role);
POP_API pop_status pop_dataset_sample(const pop_dataset* data, int index, double* out_input,
                                      int* out_label);
POP_API void pop_dataset_free(pop_dataset* data);

/* ---- training -------------------------------------------------------------- */

typedef struct pop_train_options {
  int epochs;
  int batch_size;
  double lr0;
  double momentum;
  double weight_decay;
  int cosine_schedule; /* nonzero = cosine decay over total steps, zero = constant */
  uint64_t seed;
  int shuffle;
  pop_loss_options loss;        /* margins use the head's own similarity matrix */
  int checkpoint_every;         /* epochs between checkpoints, 0 disables */
  const char* checkpoint_prefix; /* checkpoint path prefix, may be NULL */
} pop_train_options;

POP_API pop_status pop_train_options_default(pop_train_options* out);
/* Optimizes the net in place against the frozen head; out_log may be NULL. */
POP_API pop_status pop_train(pop_net* net, const pop_protos* protos, const pop_dataset* train_set,
                             const pop_train_options* options, pop_trainlog** out_log);
POP_API pop_status pop_trainlog_size(const pop_trainlog* log, int* out);
POP_API pop_status pop_trainlog_entry(const pop_trainlog* log, int epoch, double* mean_loss,
                                      double* train_acc, double* lr);
/* `epoch,mean_loss,train_acc,lr` CSV. */
POP_API pop_status pop_trainlog_save(const pop_trainlog* log, const char* path);
POP_API void pop_trainlog_free(pop_trainlog* log);

/* ---- OOD scoring and metrics ------------------------------------------------ */

enum {
  POP_SCORE_POP = 0,      /* feature norm x max logit */
  POP_SCORE_MSP = 1,      /* max softmax probability */
  POP_SCORE_ENERGY = 2,   /* T * logsumexp(z / T) */
  POP_SCORE_MAXLOGIT = 3, /* max logit */
};

/* id_limit > 0 restricts the max to the first id_limit logits. */
POP_API pop_status pop_pop_score(const double* logits, size_t logits_len, double feature_norm,
                                 int id_limit, double* out);
POP_API pop_status pop_baseline_score(const double* logits, size_t logits_len, int kind,
                                      double temperature, double* out);
/* Decision rule 1{score >= lambda}: out_is_id = 1 for ID. */
POP_API pop_status pop_decide(double score, double lambda, int* out_is_id);
/* FPR95 (lambda at 95% ID TPR, ties inclusive) and AUROC over raw scores.
 * is_id entries are 0/1. Any out pointer may be NULL. */
POP_API pop_status pop_compute_metrics(const double* scores, const int* is_id, size_t count,
                                       double* out_fpr95, double* out_auroc, double* out_lambda);

/* Scores an ID test set and an OOD set with all four kinds. */
POP_API pop_status pop_evaluate(const pop_net* net, const pop_protos* protos,
                                const pop_dataset* id_test, const pop_dataset* ood,
                                double temperature, int pop_id_only, pop_evalrun** out);
POP_API pop_status pop_evalrun_metrics(const pop_evalrun* run, int kind, double* out_fpr95,
                                       double* out_auroc, double* out_lambda, int* out_num_id,
                                       int* out_num_ood);
POP_API pop_status pop_evalrun_count(const pop_evalrun* run, int* out);
POP_API pop_status pop_evalrun_score(const pop_evalrun* run, int kind, int index,
                                     double* out_score, int* out_is_id);
/* `sample_id,is_id,score_kind,score` CSV, full precision. */
POP_API pop_status pop_evalrun_save_scores(const pop_evalrun* run, const char* path);
/* key=value lines per score kind. */
POP_API pop_status pop_evalrun_save_metrics(const pop_evalrun* run, const char* path);
POP_API void pop_evalrun_free(pop_evalrun* run);

/* ---- toy experiment ----------------------------------------------------------
 * Confidence grids over a square 2-D region for three configurations:
 * 0 = vanilla learnable head, 1 = fixed hierarchy head, 2 = fixed head with
 * outlier proxies. */

typedef struct pop_toy_options {
  pop_synth_options synth;
  pop_train_options train;
  int hidden_dim;
  int num_proxies;
  double proxy_distance;
  double grid_lo;
  double grid_hi;
  int resolution;
  int grid_direct; /* nonzero treats grid points as features, zero runs the net */
} pop_toy_options;

POP_API pop_status pop_toy_options_default(pop_toy_options* out);
POP_API pop_status pop_toy_run(const pop_tree* tree, const pop_toy_options* options,
                               pop_toy** out);
/* buf receives resolution x resolution values, row-major. */
POP_API pop_status pop_toy_grid_values(const pop_toy* toy, int config, double* buf);
/* Confidence at the three-class intersection point. */
POP_API pop_status pop_toy_confidence(const pop_toy* toy, int config, double* out);
POP_API pop_status pop_toy_intersection(const pop_toy* toy, double* out_x, double* out_y);
POP_API pop_status pop_toy_save_grid(const pop_toy* toy, int config, const char* path);
POP_API void pop_toy_free(pop_toy* toy);

/* Standalone confidence grid for a prototype head: max-ID softmax(beta * z)
 * over [lo, hi]^2. net may be NULL in direct mode. */
POP_API pop_status pop_confidence_grid(const pop_net* net, const pop_protos* protos, double lo,
                                       double hi, int resolution, double beta, int grid_direct,
                                       double* buf);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* POP_POP_H */
