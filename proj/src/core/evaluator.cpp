#include "core/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "core/common.hpp"
#include "core/io.hpp"

namespace pop {

double pop_score(const ForwardRecord& record, int id_limit) {
  if (record.logits.size() == 0)
    fail(ErrorKind::invalid_argument, "forward record carries no logits");
  const int limit = id_limit > 0 ? std::min<int>(id_limit, record.logits.size())
                                 : static_cast<int>(record.logits.size());
  return record.feature_norm * record.logits.head(limit).maxCoeff();
}

double baseline_score(const ForwardRecord& record, ScoreKind kind, double temperature) {
  if (record.logits.size() == 0)
    fail(ErrorKind::invalid_argument, "forward record carries no logits");
  if (!(temperature > 0.0))
    fail(ErrorKind::invalid_argument,
         "temperature must be positive, got " + format_double(temperature));
  const Eigen::VectorXd& z = record.logits;
  switch (kind) {
    case ScoreKind::maxlogit:
      return z.maxCoeff();
    case ScoreKind::msp: {
      Eigen::VectorXd s = z / temperature;
      double shift = s.maxCoeff();
      Eigen::VectorXd expd = (s.array() - shift).exp();
      return expd.maxCoeff() / expd.sum();
    }
    case ScoreKind::energy: {
      Eigen::VectorXd s = z / temperature;
      double shift = s.maxCoeff();
      return temperature * (std::log((s.array() - shift).exp().sum()) + shift);
    }
    case ScoreKind::pop:
      return pop_score(record);
  }
  fail(ErrorKind::invalid_argument, "unknown score kind");
}

MetricReport compute_metrics(const std::vector<ScoredSample>& samples) {
  std::vector<double> id_scores, ood_scores;
  for (const ScoredSample& s : samples)
    (s.is_id ? id_scores : ood_scores).push_back(s.score);
  const int n_id = static_cast<int>(id_scores.size());
  const int n_ood = static_cast<int>(ood_scores.size());
  if (n_id == 0 || n_ood == 0)
    fail(ErrorKind::insufficient_data, "metrics need at least one ID and one OOD sample (got " +
                                           std::to_string(n_id) + " ID, " + std::to_string(n_ood) +
                                           " OOD)");

  MetricReport report;
  report.num_id = n_id;
  report.num_ood = n_ood;

  // FPR95: lambda at the ceil(0.05 n)-th smallest ID score keeps ID-TPR >= 95%
  // under the inclusive decision rule.
  std::vector<double> sorted_id = id_scores;
  std::sort(sorted_id.begin(), sorted_id.end());
  const int k = (5 * n_id + 99) / 100;  // ceil(0.05 * n_id), exact in integers
  report.threshold_lambda = sorted_id[k - 1];
  int false_positives = 0;
  for (double s : ood_scores)
    if (decide_id(s, report.threshold_lambda)) ++false_positives;
  report.fpr95 = static_cast<double>(false_positives) / n_ood;

  // AUROC via average ranks over the pooled sample (Mann-Whitney U).
  struct Tagged {
    double score;
    bool is_id;
  };
  std::vector<Tagged> pooled;
  pooled.reserve(samples.size());
  for (double s : id_scores) pooled.push_back({s, true});
  for (double s : ood_scores) pooled.push_back({s, false});
  std::sort(pooled.begin(), pooled.end(),
            [](const Tagged& a, const Tagged& b) { return a.score < b.score; });
  double id_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < pooled.size()) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].score == pooled[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t t = i; t < j; ++t)
      if (pooled[t].is_id) id_rank_sum += avg_rank;
    i = j;
  }
  report.auroc =
      (id_rank_sum - 0.5 * static_cast<double>(n_id) * (n_id + 1.0)) /
      (static_cast<double>(n_id) * static_cast<double>(n_ood));
  return report;
}

const char* score_kind_name(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::pop: return "pop";
    case ScoreKind::msp: return "msp";
    case ScoreKind::energy: return "energy";
    case ScoreKind::maxlogit: return "maxlogit";
  }
  return "?";
}

EvalRun evaluate_model(const FeatureExtractor& net, const PrototypeSet& protos,
                       const std::vector<Eigen::VectorXd>& id_inputs,
                       const std::vector<Eigen::VectorXd>& ood_inputs,
                       const EvalOptions& options) {
  const ScoreKind kinds[] = {ScoreKind::pop, ScoreKind::msp, ScoreKind::energy,
                             ScoreKind::maxlogit};
  EvalRun run;
  run.samples.resize(4);
  auto score_one = [&](const Eigen::VectorXd& input, bool is_id) {
    ForwardRecord rec = forward(net, protos, input);
    for (ScoreKind kind : kinds) {
      double s = kind == ScoreKind::pop
                     ? pop_score(rec, options.pop_id_only ? protos.num_id : 0)
                     : baseline_score(rec, kind, options.temperature);
      run.samples[static_cast<int>(kind)].push_back({s, is_id, kind});
    }
  };
  for (const auto& x : id_inputs) score_one(x, true);
  for (const auto& x : ood_inputs) score_one(x, false);
  for (ScoreKind kind : kinds)
    run.reports.push_back(compute_metrics(run.samples[static_cast<int>(kind)]));
  return run;
}

void write_scores_csv(const std::string& path, const EvalRun& run) {
  std::ostringstream os;
  os << "sample_id,is_id,score_kind,score\n";
  for (std::size_t k = 0; k < run.samples.size(); ++k)
    for (std::size_t i = 0; i < run.samples[k].size(); ++i) {
      const ScoredSample& s = run.samples[k][i];
      os << i << "," << (s.is_id ? 1 : 0) << "," << score_kind_name(s.kind) << ","
         << format_double(s.score) << "\n";
    }
  write_file(path, os.str());
}

void write_metrics_txt(const std::string& path, const EvalRun& run) {
  std::ostringstream os;
  for (std::size_t k = 0; k < run.reports.size(); ++k) {
    const char* name = score_kind_name(static_cast<ScoreKind>(k));
    const MetricReport& r = run.reports[k];
    os << name << ".fpr95=" << format_double(r.fpr95) << "\n";
    os << name << ".auroc=" << format_double(r.auroc) << "\n";
    os << name << ".lambda=" << format_double(r.threshold_lambda) << "\n";
    os << name << ".num_id=" << r.num_id << "\n";
    os << name << ".num_ood=" << r.num_ood << "\n";
  }
  write_file(path, os.str());
}

}  // namespace pop
