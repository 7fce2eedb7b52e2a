#include "pop/pop.h"

#include <cstring>
#include <string>

#include "core/common.hpp"
#include "core/datagen.hpp"
#include "core/evaluator.hpp"
#include "core/hierarchy.hpp"
#include "core/io.hpp"
#include "core/losses.hpp"
#include "core/netcore.hpp"
#include "core/prototypes.hpp"
#include "core/toy.hpp"
#include "core/trainer.hpp"

struct pop_tree {
  pop::LabelTree impl;
};
struct pop_distmat {
  pop::DistanceMatrix impl;
};
struct pop_simmat {
  pop::SimilarityMatrix impl;
};
struct pop_protos {
  pop::PrototypeSet impl;
};
struct pop_net {
  pop::FeatureExtractor impl;
};
struct pop_dataset {
  pop::Dataset impl;
};
struct pop_trainlog {
  pop::TrainLog impl;
};
struct pop_evalrun {
  pop::EvalRun impl;
};
struct pop_toy {
  pop::ToyResult impl;
};

namespace {

thread_local std::string g_last_error;

pop_status status_of(pop::ErrorKind kind) {
  switch (kind) {
    case pop::ErrorKind::invalid_argument: return POP_ERR_INVALID_ARGUMENT;
    case pop::ErrorKind::constraint: return POP_ERR_CONSTRAINT;
    case pop::ErrorKind::not_psd: return POP_ERR_NOT_PSD;
    case pop::ErrorKind::numeric: return POP_ERR_NUMERIC;
    case pop::ErrorKind::io: return POP_ERR_IO;
    case pop::ErrorKind::insufficient_data: return POP_ERR_INSUFFICIENT_DATA;
  }
  return POP_ERR_INTERNAL;
}

template <typename Fn>
pop_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    return POP_OK;
  } catch (const pop::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return POP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return POP_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) pop::fail(pop::ErrorKind::invalid_argument, what);
}

pop::LossConfig loss_config(const pop_loss_options& opt, const pop::SimilarityMatrix& sim) {
  pop::LossConfig cfg;
  cfg.beta = opt.beta;
  cfg.similarity = sim;
  cfg.variant = opt.variant == 0 ? pop::LossVariant::cosine_ce : pop::LossVariant::hsbl;
  cfg.denominator =
      opt.denominator_all ? pop::HsblDenominator::all : pop::HsblDenominator::exclude_true;
  cfg.argmax_domain = opt.argmax_all ? pop::ArgmaxDomain::all_classes : pop::ArgmaxDomain::id_only;
  return cfg;
}

pop::SynthSpec synth_spec(const pop_synth_options& opt, int num_leaves) {
  pop::SynthSpec spec;
  spec.input_dim = opt.input_dim;
  spec.train_per_class = opt.train_per_class;
  spec.test_per_class = opt.test_per_class;
  spec.ood_count = opt.ood_count;
  spec.stddev = opt.stddev;
  spec.mean_separation = opt.mean_separation;
  spec.seed = opt.seed;
  spec.ood_mode = opt.ood_far ? pop::OodMode::far : pop::OodMode::near;
  spec.near_coeff = opt.near_coeff;
  spec.ood_clusters = opt.ood_clusters;
  spec.far_radius_scale = opt.far_radius_scale;
  if (opt.means != nullptr) {
    require(opt.input_dim > 0, "input_dim must be positive when passing explicit means");
    for (int c = 0; c < num_leaves; ++c) {
      Eigen::VectorXd m(opt.input_dim);
      for (int j = 0; j < opt.input_dim; ++j) m(j) = opt.means[c * opt.input_dim + j];
      spec.means.push_back(std::move(m));
    }
  }
  return spec;
}

pop::TrainConfig train_config(const pop_train_options& opt, const pop::PrototypeSet& protos) {
  pop::TrainConfig cfg;
  cfg.epochs = opt.epochs;
  cfg.batch_size = opt.batch_size;
  cfg.lr0 = opt.lr0;
  cfg.momentum = opt.momentum;
  cfg.weight_decay = opt.weight_decay;
  cfg.schedule = opt.cosine_schedule ? pop::LrSchedule::cosine : pop::LrSchedule::constant;
  cfg.seed = opt.seed;
  cfg.shuffle = opt.shuffle != 0;
  cfg.loss = loss_config(opt.loss, protos.source_similarity);
  cfg.checkpoint_every = opt.checkpoint_every;
  if (opt.checkpoint_prefix != nullptr) cfg.checkpoint_prefix = opt.checkpoint_prefix;
  return cfg;
}

const Eigen::MatrixXd& toy_grid_for(const pop::ToyResult& toy, int config) {
  switch (config) {
    case 0: return toy.grid_vanilla;
    case 1: return toy.grid_fixed;
    case 2: return toy.grid_pop;
  }
  pop::fail(pop::ErrorKind::invalid_argument, "toy config must be 0 (vanilla), 1 (fixed) or 2 (pop)");
}

}  // namespace

extern "C" {

const char* pop_version(void) { return "0.1.0"; }

const char* pop_last_error(void) { return g_last_error.c_str(); }

/* ---- tree ---- */

pop_status pop_tree_parse(const char* text, pop_tree** out) {
  return guarded([&] {
    require(text && out, "text and out must not be NULL");
    *out = new pop_tree{pop::LabelTree::parse(text)};
  });
}

pop_status pop_tree_load(const char* path, pop_tree** out) {
  return guarded([&] {
    require(path && out, "path and out must not be NULL");
    *out = new pop_tree{pop::LabelTree::load_file(path)};
  });
}

void pop_tree_free(pop_tree* tree) { delete tree; }

pop_status pop_tree_num_leaves(const pop_tree* tree, int* out) {
  return guarded([&] {
    require(tree && out, "tree and out must not be NULL");
    *out = tree->impl.num_leaves();
  });
}

pop_status pop_tree_leaf_id(const pop_tree* tree, int class_index, const char** out) {
  return guarded([&] {
    require(tree && out, "tree and out must not be NULL");
    *out = tree->impl.leaf_id(class_index).c_str();
  });
}

pop_status pop_tree_lca_distance(const pop_tree* tree, int class_a, int class_b, long* out) {
  return guarded([&] {
    require(tree && out, "tree and out must not be NULL");
    *out = tree->impl.lca_distance(class_a, class_b);
  });
}

/* ---- distance / similarity ---- */

pop_status pop_distance_matrix_build(const pop_tree* tree, pop_distmat** out) {
  return guarded([&] {
    require(tree && out, "tree and out must not be NULL");
    *out = new pop_distmat{pop::build_distance_matrix(tree->impl)};
  });
}

pop_status pop_distmat_augment(const pop_distmat* dist, int num_proxies, double proxy_distance,
                               pop_distmat** out) {
  return guarded([&] {
    require(dist && out, "dist and out must not be NULL");
    *out = new pop_distmat{pop::augment_with_proxies(dist->impl, num_proxies, proxy_distance)};
  });
}

pop_status pop_distmat_info(const pop_distmat* dist, int* size, int* num_id, int* num_proxies,
                            double* d_max) {
  return guarded([&] {
    require(dist, "dist must not be NULL");
    if (size) *size = dist->impl.size();
    if (num_id) *num_id = dist->impl.num_id;
    if (num_proxies) *num_proxies = dist->impl.num_proxies;
    if (d_max) *d_max = dist->impl.d_max;
  });
}

pop_status pop_distmat_get(const pop_distmat* dist, int row, int col, double* out) {
  return guarded([&] {
    require(dist && out, "dist and out must not be NULL");
    require(row >= 0 && row < dist->impl.size() && col >= 0 && col < dist->impl.size(),
            "matrix index out of range");
    *out = dist->impl.entries(row, col);
  });
}

pop_status pop_distmat_save(const pop_distmat* dist, const char* path) {
  return guarded([&] {
    require(dist && path, "dist and path must not be NULL");
    pop::save_distance_matrix(path, dist->impl);
  });
}

void pop_distmat_free(pop_distmat* dist) { delete dist; }

pop_status pop_distmat_to_similarity(const pop_distmat* dist, pop_simmat** out) {
  return guarded([&] {
    require(dist && out, "dist and out must not be NULL");
    *out = new pop_simmat{pop::distance_to_similarity(dist->impl)};
  });
}

pop_status pop_simmat_info(const pop_simmat* sim, int* size, int* num_id, int* num_proxies) {
  return guarded([&] {
    require(sim, "sim must not be NULL");
    if (size) *size = sim->impl.size();
    if (num_id) *num_id = sim->impl.num_id;
    if (num_proxies) *num_proxies = sim->impl.num_proxies;
  });
}

pop_status pop_simmat_get(const pop_simmat* sim, int row, int col, double* out) {
  return guarded([&] {
    require(sim && out, "sim and out must not be NULL");
    require(row >= 0 && row < sim->impl.size() && col >= 0 && col < sim->impl.size(),
            "matrix index out of range");
    *out = sim->impl.entries(row, col);
  });
}

pop_status pop_simmat_save(const pop_simmat* sim, const char* path) {
  return guarded([&] {
    require(sim && path, "sim and path must not be NULL");
    pop::save_similarity_matrix(path, sim->impl);
  });
}

void pop_simmat_free(pop_simmat* sim) { delete sim; }

/* ---- prototypes ---- */

pop_status pop_factor_similarity(const pop_simmat* sim, int rotation_random,
                                 uint64_t rotation_seed, pop_protos** out) {
  return guarded([&] {
    require(sim && out, "sim and out must not be NULL");
    *out = new pop_protos{pop::factor_similarity(
        sim->impl,
        rotation_random ? pop::RotationMode::random_orthogonal : pop::RotationMode::identity,
        rotation_seed)};
  });
}

pop_status pop_protos_build(const pop_tree* tree, int num_proxies, double proxy_distance,
                            pop_protos** out) {
  return guarded([&] {
    require(tree && out, "tree and out must not be NULL");
    *out = new pop_protos{pop::build_pop_classifier(tree->impl, num_proxies, proxy_distance)};
  });
}

pop_status pop_protos_build_id(const pop_tree* tree, pop_protos** out) {
  return guarded([&] {
    require(tree && out, "tree and out must not be NULL");
    *out = new pop_protos{pop::build_id_classifier(tree->impl)};
  });
}

pop_status pop_protos_info(const pop_protos* protos, int* dim, int* num_id, int* num_proxies) {
  return guarded([&] {
    require(protos, "protos must not be NULL");
    if (dim) *dim = protos->impl.dim();
    if (num_id) *num_id = protos->impl.num_id;
    if (num_proxies) *num_proxies = protos->impl.num_proxies;
  });
}

pop_status pop_protos_weight(const pop_protos* protos, int row, int col, double* out) {
  return guarded([&] {
    require(protos && out, "protos and out must not be NULL");
    require(row >= 0 && row < protos->impl.dim() && col >= 0 && col < protos->impl.num_classes(),
            "weight index out of range");
    *out = protos->impl.weights(row, col);
  });
}

pop_status pop_protos_similarity(const pop_protos* protos, int row, int col, double* out) {
  return guarded([&] {
    require(protos && out, "protos and out must not be NULL");
    const int n = protos->impl.num_classes();
    require(row >= 0 && row < n && col >= 0 && col < n, "similarity index out of range");
    *out = protos->impl.source_similarity.entries(row, col);
  });
}

pop_status pop_protos_cosine_to(const pop_protos* protos, const double* feature,
                                size_t feature_len, double* out_logits) {
  return guarded([&] {
    require(protos && feature && out_logits, "protos, feature and out_logits must not be NULL");
    Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(feature, feature_len);
    Eigen::VectorXd z = pop::cosine_to(protos->impl, f);
    std::memcpy(out_logits, z.data(), sizeof(double) * z.size());
  });
}

pop_status pop_protos_save(const pop_protos* protos, const char* path) {
  return guarded([&] {
    require(protos && path, "protos and path must not be NULL");
    pop::save_prototypes(path, protos->impl);
  });
}

pop_status pop_protos_load(const char* path, pop_protos** out) {
  return guarded([&] {
    require(path && out, "path and out must not be NULL");
    *out = new pop_protos{pop::load_prototypes(path)};
  });
}

void pop_protos_free(pop_protos* protos) { delete protos; }

/* ---- net ---- */

pop_status pop_net_init(const int* layer_dims, size_t num_dims, uint64_t seed, pop_net** out) {
  return guarded([&] {
    require(layer_dims && out, "layer_dims and out must not be NULL");
    std::vector<int> dims(layer_dims, layer_dims + num_dims);
    *out = new pop_net{pop::init_params(dims, seed)};
  });
}

pop_status pop_net_info(const pop_net* net, int* input_dim, int* output_dim, int* epoch) {
  return guarded([&] {
    require(net, "net must not be NULL");
    if (input_dim) *input_dim = net->impl.input_dim();
    if (output_dim) *output_dim = net->impl.output_dim();
    if (epoch) *epoch = net->impl.epoch;
  });
}

pop_status pop_net_forward(const pop_net* net, const pop_protos* protos, const double* input,
                           size_t input_len, double* out_logits, double* out_feature_norm,
                           double* out_unit_feature, double* out_raw_feature) {
  return guarded([&] {
    require(net && protos && input, "net, protos and input must not be NULL");
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(input, input_len);
    pop::ForwardRecord rec = pop::forward(net->impl, protos->impl, x);
    if (out_logits) std::memcpy(out_logits, rec.logits.data(), sizeof(double) * rec.logits.size());
    if (out_feature_norm) *out_feature_norm = rec.feature_norm;
    if (out_unit_feature)
      std::memcpy(out_unit_feature, rec.unit_feature.data(),
                  sizeof(double) * rec.unit_feature.size());
    if (out_raw_feature)
      std::memcpy(out_raw_feature, rec.raw_feature.data(),
                  sizeof(double) * rec.raw_feature.size());
  });
}

pop_status pop_net_save(const pop_net* net, const char* path) {
  return guarded([&] {
    require(net && path, "net and path must not be NULL");
    pop::save_checkpoint(path, net->impl);
  });
}

pop_status pop_net_load(const char* path, pop_net** out) {
  return guarded([&] {
    require(path && out, "path and out must not be NULL");
    *out = new pop_net{pop::load_checkpoint(path)};
  });
}

void pop_net_free(pop_net* net) { delete net; }

/* ---- losses ---- */

pop_status pop_default_beta(int num_id, double* out) {
  return guarded([&] {
    require(out, "out must not be NULL");
    require(num_id > 0, "num_id must be positive");
    *out = pop::default_beta(num_id);
  });
}

pop_status pop_loss_eval(const double* logits, size_t logits_len, int label,
                         const pop_simmat* similarity, const pop_loss_options* options,
                         double* out_value, double* out_grad, int* out_predicted,
                         double* out_margin) {
  return guarded([&] {
    require(logits && similarity && options, "logits, similarity and options must not be NULL");
    Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(logits, logits_len);
    pop::LossConfig cfg = loss_config(*options, similarity->impl);
    pop::LossResult res = pop::evaluate_loss(z, label, cfg);
    if (out_value) *out_value = res.value;
    if (out_grad) std::memcpy(out_grad, res.logit_grad.data(), sizeof(double) * logits_len);
    if (out_predicted) *out_predicted = res.predicted;
    if (out_margin) *out_margin = res.margin_applied;
  });
}

/* ---- datasets ---- */

pop_status pop_synth_options_default(pop_synth_options* out) {
  return guarded([&] {
    require(out, "out must not be NULL");
    pop::SynthSpec d;
    *out = pop_synth_options{};
    out->input_dim = d.input_dim;
    out->train_per_class = d.train_per_class;
    out->test_per_class = d.test_per_class;
    out->ood_count = d.ood_count;
    out->stddev = d.stddev;
    out->mean_separation = d.mean_separation;
    out->seed = d.seed;
    out->ood_far = d.ood_mode == pop::OodMode::far ? 1 : 0;
    out->near_coeff = d.near_coeff;
    out->ood_clusters = d.ood_clusters;
    out->far_radius_scale = d.far_radius_scale;
    out->means = nullptr;
  });
}

pop_status pop_dataset_generate(const pop_tree* tree, const pop_synth_options* options,
                                pop_dataset** out_train, pop_dataset** out_test,
                                pop_dataset** out_ood) {
  return guarded([&] {
    require(tree && options && out_train && out_test && out_ood,
            "tree, options and all three out pointers must not be NULL");
    pop::SynthData data =
        pop::generate(tree->impl, synth_spec(*options, tree->impl.num_leaves()));
    *out_train = new pop_dataset{std::move(data.train)};
    *out_test = new pop_dataset{std::move(data.test)};
    *out_ood = new pop_dataset{std::move(data.ood)};
  });
}

pop_status pop_dataset_load(const char* path, int role, pop_dataset** out) {
  return guarded([&] {
    require(path && out, "path and out must not be NULL");
    require(role >= POP_ROLE_ID_TRAIN && role <= POP_ROLE_OOD, "unknown dataset role");
    *out = new pop_dataset{pop::load_dataset(path, static_cast<pop::DataRole>(role))};
  });
}

pop_status pop_dataset_save(const pop_dataset* data, const char* path) {
  return guarded([&] {
    require(data && path, "data and path must not be NULL");
    pop::save_dataset(path, data->impl);
  });
}

pop_status pop_dataset_info(const pop_dataset* data, int* count, int* dim, int* role) {
  return guarded([&] {
    require(data, "data must not be NULL");
    if (count) *count = data->impl.size();
    if (dim) *dim = data->impl.dim();
    if (role) *role = static_cast<int>(data->impl.role);
  });
}

pop_status pop_dataset_sample(const pop_dataset* data, int index, double* out_input,
                              int* out_label) {
  return guarded([&] {
    require(data, "data must not be NULL");
    require(index >= 0 && index < data->impl.size(), "sample index out of range");
    if (out_input)
      std::memcpy(out_input, data->impl.inputs[index].data(),
                  sizeof(double) * data->impl.inputs[index].size());
    if (out_label) *out_label = data->impl.labels[index];
  });
}

void pop_dataset_free(pop_dataset* data) { delete data; }

/* ---- training ---- */

pop_status pop_train_options_default(pop_train_options* out) {
  return guarded([&] {
    require(out, "out must not be NULL");
    pop::TrainConfig d;
    *out = pop_train_options{};
    out->epochs = d.epochs;
    out->batch_size = d.batch_size;
    out->lr0 = d.lr0;
    out->momentum = d.momentum;
    out->weight_decay = d.weight_decay;
    out->cosine_schedule = d.schedule == pop::LrSchedule::cosine ? 1 : 0;
    out->seed = d.seed;
    out->shuffle = d.shuffle ? 1 : 0;
    out->loss.beta = d.loss.beta;
    out->loss.variant = d.loss.variant == pop::LossVariant::cosine_ce ? 0 : 1;
    out->loss.denominator_all = d.loss.denominator == pop::HsblDenominator::all ? 1 : 0;
    out->loss.argmax_all = d.loss.argmax_domain == pop::ArgmaxDomain::all_classes ? 1 : 0;
    out->checkpoint_every = 0;
    out->checkpoint_prefix = nullptr;
  });
}

pop_status pop_train(pop_net* net, const pop_protos* protos, const pop_dataset* train_set,
                     const pop_train_options* options, pop_trainlog** out_log) {
  return guarded([&] {
    require(net && protos && train_set && options,
            "net, protos, train_set and options must not be NULL");
    pop::TrainLog log =
        pop::train(net->impl, protos->impl, train_set->impl, train_config(*options, protos->impl));
    if (out_log) *out_log = new pop_trainlog{std::move(log)};
  });
}

pop_status pop_trainlog_size(const pop_trainlog* log, int* out) {
  return guarded([&] {
    require(log && out, "log and out must not be NULL");
    *out = static_cast<int>(log->impl.epochs.size());
  });
}

pop_status pop_trainlog_entry(const pop_trainlog* log, int epoch, double* mean_loss,
                              double* train_acc, double* lr) {
  return guarded([&] {
    require(log, "log must not be NULL");
    require(epoch >= 0 && epoch < static_cast<int>(log->impl.epochs.size()),
            "epoch index out of range");
    const pop::EpochStats& e = log->impl.epochs[epoch];
    if (mean_loss) *mean_loss = e.mean_loss;
    if (train_acc) *train_acc = e.train_acc;
    if (lr) *lr = e.lr;
  });
}

pop_status pop_trainlog_save(const pop_trainlog* log, const char* path) {
  return guarded([&] {
    require(log && path, "log and path must not be NULL");
    pop::write_train_log_csv(path, log->impl);
  });
}

void pop_trainlog_free(pop_trainlog* log) { delete log; }

/* ---- scoring and metrics ---- */

pop_status pop_pop_score(const double* logits, size_t logits_len, double feature_norm,
                         int id_limit, double* out) {
  return guarded([&] {
    require(logits && out, "logits and out must not be NULL");
    require(logits_len > 0, "logits must not be empty");
    pop::ForwardRecord rec;
    rec.logits = Eigen::Map<const Eigen::VectorXd>(logits, logits_len);
    rec.feature_norm = feature_norm;
    *out = pop::pop_score(rec, id_limit);
  });
}

pop_status pop_baseline_score(const double* logits, size_t logits_len, int kind,
                              double temperature, double* out) {
  return guarded([&] {
    require(logits && out, "logits and out must not be NULL");
    require(logits_len > 0, "logits must not be empty");
    require(kind >= POP_SCORE_POP && kind <= POP_SCORE_MAXLOGIT, "unknown score kind");
    require(kind != POP_SCORE_POP, "use pop_pop_score for the pop kind (needs the feature norm)");
    pop::ForwardRecord rec;
    rec.logits = Eigen::Map<const Eigen::VectorXd>(logits, logits_len);
    *out = pop::baseline_score(rec, static_cast<pop::ScoreKind>(kind), temperature);
  });
}

pop_status pop_decide(double score, double lambda, int* out_is_id) {
  return guarded([&] {
    require(out_is_id, "out_is_id must not be NULL");
    *out_is_id = pop::decide_id(score, lambda) ? 1 : 0;
  });
}

pop_status pop_compute_metrics(const double* scores, const int* is_id, size_t count,
                               double* out_fpr95, double* out_auroc, double* out_lambda) {
  return guarded([&] {
    require(scores && is_id, "scores and is_id must not be NULL");
    std::vector<pop::ScoredSample> samples(count);
    for (size_t i = 0; i < count; ++i)
      samples[i] = {scores[i], is_id[i] != 0, pop::ScoreKind::pop};
    pop::MetricReport r = pop::compute_metrics(samples);
    if (out_fpr95) *out_fpr95 = r.fpr95;
    if (out_auroc) *out_auroc = r.auroc;
    if (out_lambda) *out_lambda = r.threshold_lambda;
  });
}

pop_status pop_evaluate(const pop_net* net, const pop_protos* protos, const pop_dataset* id_test,
                        const pop_dataset* ood, double temperature, int pop_id_only,
                        pop_evalrun** out) {
  return guarded([&] {
    require(net && protos && id_test && ood && out,
            "net, protos, id_test, ood and out must not be NULL");
    pop::EvalOptions opt;
    opt.temperature = temperature;
    opt.pop_id_only = pop_id_only != 0;
    *out = new pop_evalrun{pop::evaluate_model(net->impl, protos->impl, id_test->impl.inputs,
                                               ood->impl.inputs, opt)};
  });
}

pop_status pop_evalrun_metrics(const pop_evalrun* run, int kind, double* out_fpr95,
                               double* out_auroc, double* out_lambda, int* out_num_id,
                               int* out_num_ood) {
  return guarded([&] {
    require(run, "run must not be NULL");
    require(kind >= 0 && kind < static_cast<int>(run->impl.reports.size()), "unknown score kind");
    const pop::MetricReport& r = run->impl.reports[kind];
    if (out_fpr95) *out_fpr95 = r.fpr95;
    if (out_auroc) *out_auroc = r.auroc;
    if (out_lambda) *out_lambda = r.threshold_lambda;
    if (out_num_id) *out_num_id = r.num_id;
    if (out_num_ood) *out_num_ood = r.num_ood;
  });
}

pop_status pop_evalrun_count(const pop_evalrun* run, int* out) {
  return guarded([&] {
    require(run && out, "run and out must not be NULL");
    *out = run->impl.samples.empty() ? 0 : static_cast<int>(run->impl.samples[0].size());
  });
}

pop_status pop_evalrun_score(const pop_evalrun* run, int kind, int index, double* out_score,
                             int* out_is_id) {
  return guarded([&] {
    require(run, "run must not be NULL");
    require(kind >= 0 && kind < static_cast<int>(run->impl.samples.size()), "unknown score kind");
    const auto& v = run->impl.samples[kind];
    require(index >= 0 && index < static_cast<int>(v.size()), "sample index out of range");
    if (out_score) *out_score = v[index].score;
    if (out_is_id) *out_is_id = v[index].is_id ? 1 : 0;
  });
}

pop_status pop_evalrun_save_scores(const pop_evalrun* run, const char* path) {
  return guarded([&] {
    require(run && path, "run and path must not be NULL");
    pop::write_scores_csv(path, run->impl);
  });
}

pop_status pop_evalrun_save_metrics(const pop_evalrun* run, const char* path) {
  return guarded([&] {
    require(run && path, "run and path must not be NULL");
    pop::write_metrics_txt(path, run->impl);
  });
}

void pop_evalrun_free(pop_evalrun* run) { delete run; }

/* ---- toy ---- */

pop_status pop_toy_options_default(pop_toy_options* out) {
  return guarded([&] {
    require(out, "out must not be NULL");
    pop::ToyConfig d;
    *out = pop_toy_options{};
    pop_synth_options_default(&out->synth);
    pop_train_options_default(&out->train);
    out->hidden_dim = d.hidden_dim;
    out->num_proxies = d.num_proxies;
    out->proxy_distance = d.proxy_distance;
    out->grid_lo = d.grid_lo;
    out->grid_hi = d.grid_hi;
    out->resolution = d.resolution;
    out->grid_direct = d.grid_mode == pop::GridMode::direct ? 1 : 0;
  });
}

pop_status pop_toy_run(const pop_tree* tree, const pop_toy_options* options, pop_toy** out) {
  return guarded([&] {
    require(tree && options && out, "tree, options and out must not be NULL");
    pop::ToyConfig cfg;
    cfg.synth = synth_spec(options->synth, tree->impl.num_leaves());
    cfg.train.epochs = options->train.epochs;
    cfg.train.batch_size = options->train.batch_size;
    cfg.train.lr0 = options->train.lr0;
    cfg.train.momentum = options->train.momentum;
    cfg.train.weight_decay = options->train.weight_decay;
    cfg.train.schedule =
        options->train.cosine_schedule ? pop::LrSchedule::cosine : pop::LrSchedule::constant;
    cfg.train.seed = options->train.seed;
    cfg.train.shuffle = options->train.shuffle != 0;
    cfg.train.loss = loss_config(options->train.loss, pop::SimilarityMatrix{});
    cfg.hidden_dim = options->hidden_dim;
    cfg.num_proxies = options->num_proxies;
    cfg.proxy_distance = options->proxy_distance;
    cfg.grid_lo = options->grid_lo;
    cfg.grid_hi = options->grid_hi;
    cfg.resolution = options->resolution;
    cfg.grid_mode = options->grid_direct ? pop::GridMode::direct : pop::GridMode::through_net;
    *out = new pop_toy{pop::run_toy(tree->impl, cfg)};
  });
}

pop_status pop_toy_grid_values(const pop_toy* toy, int config, double* buf) {
  return guarded([&] {
    require(toy && buf, "toy and buf must not be NULL");
    const Eigen::MatrixXd& g = toy_grid_for(toy->impl, config);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) buf[i * g.cols() + j] = g(i, j);
  });
}

pop_status pop_toy_confidence(const pop_toy* toy, int config, double* out) {
  return guarded([&] {
    require(toy && out, "toy and out must not be NULL");
    switch (config) {
      case 0: *out = toy->impl.conf_vanilla; return;
      case 1: *out = toy->impl.conf_fixed; return;
      case 2: *out = toy->impl.conf_pop; return;
    }
    pop::fail(pop::ErrorKind::invalid_argument, "toy config must be 0, 1 or 2");
  });
}

pop_status pop_toy_intersection(const pop_toy* toy, double* out_x, double* out_y) {
  return guarded([&] {
    require(toy, "toy must not be NULL");
    if (out_x) *out_x = toy->impl.intersection(0);
    if (out_y) *out_y = toy->impl.intersection(1);
  });
}

pop_status pop_toy_save_grid(const pop_toy* toy, int config, const char* path) {
  return guarded([&] {
    require(toy && path, "toy and path must not be NULL");
    const Eigen::MatrixXd& g = toy_grid_for(toy->impl, config);
    pop::save_matrix_csv(path, g, 0, 0);
  });
}

void pop_toy_free(pop_toy* toy) { delete toy; }

pop_status pop_confidence_grid(const pop_net* net, const pop_protos* protos, double lo, double hi,
                               int resolution, double beta, int grid_direct, double* buf) {
  return guarded([&] {
    require(protos && buf, "protos and buf must not be NULL");
    Eigen::MatrixXd g = pop::toy_grid(
        net ? &net->impl : nullptr, protos->impl, lo, hi, resolution, beta,
        grid_direct ? pop::GridMode::direct : pop::GridMode::through_net);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) buf[i * g.cols() + j] = g(i, j);
  });
}

} /* extern "C" */
