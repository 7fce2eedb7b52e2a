#include "core/losses.hpp"

#include <cmath>

#include "core/common.hpp"
#include "core/io.hpp"

namespace pop {

namespace {

void check_inputs(const Eigen::VectorXd& logits, int label, const LossConfig& cfg) {
  const int classes = cfg.similarity.size();
  if (classes <= 0) fail(ErrorKind::invalid_argument, "loss config has no similarity matrix");
  if (logits.size() != classes)
    fail(ErrorKind::invalid_argument, "logit vector length " + std::to_string(logits.size()) +
                                          " does not match class count " + std::to_string(classes));
  if (!(cfg.beta > 0.0))
    fail(ErrorKind::invalid_argument, "beta must be positive, got " + format_double(cfg.beta));
  if (label < 0 || label >= cfg.similarity.num_id)
    fail(ErrorKind::invalid_argument,
         "label " + std::to_string(label) + " is not an ID class (num_id = " +
             std::to_string(cfg.similarity.num_id) + "); proxies receive no data");
}

int argmax_class(const Eigen::VectorXd& logits, const LossConfig& cfg) {
  const int limit = cfg.argmax_domain == ArgmaxDomain::id_only
                        ? cfg.similarity.num_id
                        : static_cast<int>(logits.size());
  int best = 0;
  for (int j = 1; j < limit; ++j)
    if (logits(j) > logits(best)) best = j;  // ties keep the lowest index
  return best;
}

}  // namespace

double default_beta(int num_id) { return num_id <= 10 ? 10.0 : 5.0; }

LossResult cosine_ce(const Eigen::VectorXd& logits, int label, const LossConfig& cfg) {
  check_inputs(logits, label, cfg);
  Eigen::VectorXd scaled = cfg.beta * logits;
  double shift = scaled.maxCoeff();
  Eigen::VectorXd expd = (scaled.array() - shift).exp();
  double denom = expd.sum();

  LossResult out;
  out.value = std::log(denom) - (scaled(label) - shift);
  out.logit_grad = cfg.beta * (expd / denom);
  out.logit_grad(label) -= cfg.beta;
  out.predicted = argmax_class(logits, cfg);
  out.margin_applied = 0.0;
  return out;
}

LossResult hsbl_with_predicted(const Eigen::VectorXd& logits, int label, int predicted,
                               const LossConfig& cfg) {
  check_inputs(logits, label, cfg);
  if (predicted < 0 || predicted >= static_cast<int>(logits.size()))
    fail(ErrorKind::invalid_argument, "predicted class out of range");

  const int K = static_cast<int>(logits.size());
  const double m =
      predicted == label ? 0.0 : 1.0 - cfg.similarity.entries(predicted, label);

  LossResult out;
  out.predicted = predicted;
  out.margin_applied = m;

  if (cfg.denominator == HsblDenominator::exclude_true) {
    // Softmax over K terms where the true class carries the margin.
    Eigen::VectorXd scaled = cfg.beta * logits;
    scaled(label) = cfg.beta * (logits(label) - m);
    double shift = scaled.maxCoeff();
    Eigen::VectorXd expd = (scaled.array() - shift).exp();
    double denom = expd.sum();
    out.value = std::log(denom) - (scaled(label) - shift);
    out.logit_grad = cfg.beta * (expd / denom);
    out.logit_grad(label) -= cfg.beta;
  } else {
    // K + 1 terms: the margined true-class term plus every unmargined logit.
    Eigen::VectorXd scaled(K + 1);
    for (int j = 0; j < K; ++j) scaled(j) = cfg.beta * logits(j);
    scaled(K) = cfg.beta * (logits(label) - m);
    double shift = scaled.maxCoeff();
    Eigen::VectorXd expd = (scaled.array() - shift).exp();
    double denom = expd.sum();
    out.value = std::log(denom) - (scaled(K) - shift);
    Eigen::VectorXd p = expd / denom;
    out.logit_grad = cfg.beta * p.head(K);
    out.logit_grad(label) += cfg.beta * (p(K) - 1.0);
  }
  return out;
}

LossResult hsbl(const Eigen::VectorXd& logits, int label, const LossConfig& cfg) {
  check_inputs(logits, label, cfg);
  return hsbl_with_predicted(logits, label, argmax_class(logits, cfg), cfg);
}

LossResult evaluate_loss(const Eigen::VectorXd& logits, int label, const LossConfig& cfg) {
  return cfg.variant == LossVariant::cosine_ce ? cosine_ce(logits, label, cfg)
                                               : hsbl(logits, label, cfg);
}

}  // namespace pop
