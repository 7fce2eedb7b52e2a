#pragma once

#include <Eigen/Core>

#include "core/hierarchy.hpp"

namespace pop {

enum class LossVariant { cosine_ce, hsbl };

// Eq-form switch for the HSBL denominator: the default keeps the true class
// out of the plain sum (it enters only through the margin term); `all` also
// adds the unmargined true-class term for comparison.
enum class HsblDenominator { exclude_true, all };

// Domain of the argmax that picks the predicted class; labels never point at
// proxies, so the margin lookup defaults to ID columns only.
enum class ArgmaxDomain { id_only, all_classes };

struct LossConfig {
  double beta = 10.0;
  SimilarityMatrix similarity;  // over all N+C classes
  LossVariant variant = LossVariant::hsbl;
  HsblDenominator denominator = HsblDenominator::exclude_true;
  ArgmaxDomain argmax_domain = ArgmaxDomain::id_only;
};

struct LossResult {
  double value = 0.0;
  Eigen::VectorXd logit_grad;
  int predicted = -1;
  double margin_applied = 0.0;
};

/// 10 for problems up to 10 ID classes, 5 above.
double default_beta(int num_id);

/// -log softmax_y(beta * z), sum over all N+C classes.
LossResult cosine_ce(const Eigen::VectorXd& logits, int label, const LossConfig& cfg);

/// Margin m = 0 if predicted == label else 1 - s(predicted, label); the true
/// class enters the softmax as beta*(z_y - m). The margin is a constant under
/// differentiation.
LossResult hsbl(const Eigen::VectorXd& logits, int label, const LossConfig& cfg);

/// HSBL with the predicted class pinned by the caller (margin studies, tests).
LossResult hsbl_with_predicted(const Eigen::VectorXd& logits, int label, int predicted,
                               const LossConfig& cfg);

LossResult evaluate_loss(const Eigen::VectorXd& logits, int label, const LossConfig& cfg);

}  // namespace pop
