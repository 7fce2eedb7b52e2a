#pragma once

#include <string>
#include <vector>

#include "core/netcore.hpp"

namespace pop {

enum class ScoreKind { pop, msp, energy, maxlogit };

/// Higher score means more ID-like, for every kind.
struct ScoredSample {
  double score = 0.0;
  bool is_id = false;
  ScoreKind kind = ScoreKind::pop;
};

struct MetricReport {
  double fpr95 = 0.0;
  double auroc = 0.0;
  double threshold_lambda = 0.0;
  int num_id = 0;
  int num_ood = 0;
};

/// ||x~|| * max_j z_j. The max runs over all N+C logits unless id_limit > 0
/// restricts it to the first id_limit entries.
double pop_score(const ForwardRecord& record, int id_limit = 0);

/// msp = max softmax(z/T); energy = T * logsumexp(z/T); maxlogit = max z.
double baseline_score(const ForwardRecord& record, ScoreKind kind, double temperature = 1.0);

/// Algorithm decision rule: ID iff score >= lambda.
inline bool decide_id(double score, double lambda) { return score >= lambda; }

/// lambda is the ceil(0.05 * num_id)-th smallest ID score (ties inclusive on
/// the ID side), so ID-TPR >= 0.95. fpr95 counts OOD scores >= lambda. AUROC
/// is the Mann-Whitney statistic with the half-weight tie convention.
MetricReport compute_metrics(const std::vector<ScoredSample>& samples);

const char* score_kind_name(ScoreKind kind);

/// One model evaluated over an ID test set and an OOD set with all four
/// score kinds; sample order is ID set first, then OOD.
struct EvalRun {
  std::vector<std::vector<ScoredSample>> samples;  // indexed by ScoreKind
  std::vector<MetricReport> reports;               // indexed by ScoreKind
};

struct EvalOptions {
  double temperature = 1.0;
  bool pop_id_only = false;
};

EvalRun evaluate_model(const FeatureExtractor& net, const PrototypeSet& protos,
                       const std::vector<Eigen::VectorXd>& id_inputs,
                       const std::vector<Eigen::VectorXd>& ood_inputs,
                       const EvalOptions& options = {});

/// `sample_id,is_id,score_kind,score` rows, full precision.
void write_scores_csv(const std::string& path, const EvalRun& run);

/// key=value lines, one block per score kind (e.g. `pop.fpr95=...`).
void write_metrics_txt(const std::string& path, const EvalRun& run);

}  // namespace pop
