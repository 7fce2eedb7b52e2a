#include <cmath>
#include <random>

#include "core/common.hpp"
#include "core/losses.hpp"
#include "core/trainer.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace pop;

namespace {

LossConfig appendix_a_config(double beta = 10.0) {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  LossConfig cfg;
  cfg.beta = beta;
  cfg.similarity =
      distance_to_similarity(augment_with_proxies(build_distance_matrix(tree), 1, 4.0));
  return cfg;
}

Eigen::VectorXd random_logits(std::mt19937_64& gen, int n) {
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = 2.0 * uniform01(gen) - 1.0;
  return z;
}

// Unshifted long-double recomputation of the cosine cross-entropy.
void oracle_ce(const Eigen::VectorXd& logits, int label, double beta, double& value,
               Eigen::VectorXd& grad) {
  const int n = static_cast<int>(logits.size());
  long double denom = 0.0L;
  for (int j = 0; j < n; ++j) denom += std::exp(static_cast<long double>(beta) * logits(j));
  value = static_cast<double>(-std::log(std::exp(static_cast<long double>(beta) * logits(label)) / denom));
  grad.resize(n);
  for (int j = 0; j < n; ++j) {
    long double p = std::exp(static_cast<long double>(beta) * logits(j)) / denom;
    grad(j) = static_cast<double>(beta * (p - (j == label ? 1.0L : 0.0L)));
  }
}

}  // namespace

TEST_CASE("cosine cross-entropy basics") {
  LossConfig cfg = appendix_a_config(5.0);
  const int K = cfg.similarity.size();
  REQUIRE(K == 4);

  // Uniform logits give log K for any beta.
  LossResult uniform = cosine_ce(Eigen::VectorXd::Constant(K, 0.37), 1, cfg);
  CHECK(uniform.value == doctest::Approx(std::log(double(K))).epsilon(1e-12));

  // Saturated correct logits drive the loss to zero.
  LossConfig hot = appendix_a_config(20.0);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(K, -1.0);
  z(2) = 1.0;
  CHECK(cosine_ce(z, 2, hot).value < 1e-12);
  CHECK(cosine_ce(z, 2, hot).value >= 0.0);
}

TEST_CASE("cosine cross-entropy matches a long-double oracle") {
  std::mt19937_64 gen(23);
  LossConfig cfg = appendix_a_config(5.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd z = random_logits(gen, 4);
    int label = static_cast<int>(gen() % 3);
    LossResult res = cosine_ce(z, label, cfg);
    double want_value;
    Eigen::VectorXd want_grad;
    oracle_ce(z, label, cfg.beta, want_value, want_grad);
    CHECK(std::abs(res.value - want_value) < 1e-10);
    CHECK((res.logit_grad - want_grad).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(res.logit_grad.sum()) < 1e-12);
    CHECK(res.value >= 0.0);
  }
}

TEST_CASE("labels pointing at proxies are rejected") {
  LossConfig cfg = appendix_a_config();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
  try {
    cosine_ce(z, 3, cfg);  // class 3 is the proxy
    FAIL("expected a proxy-label error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_argument);
    CHECK(std::string(e.what()).find("prox") != std::string::npos);
  }
  CHECK_THROWS_AS(hsbl(z, -1, cfg), Error);
  CHECK_THROWS_AS(hsbl(z, 4, cfg), Error);
  CHECK_THROWS_AS(cosine_ce(Eigen::VectorXd::Zero(3), 0, cfg), Error);  // wrong length
  LossConfig bad = cfg;
  bad.beta = 0.0;
  CHECK_THROWS_AS(cosine_ce(z, 0, bad), Error);
}

TEST_CASE("hsbl equals cosine cross-entropy on correctly classified samples") {
  std::mt19937_64 gen(29);
  LossConfig cfg = appendix_a_config(10.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd z = random_logits(gen, 4);
    int label = static_cast<int>(gen() % 3);
    // Force the argmax onto the label.
    z(label) = z.maxCoeff() + 0.05;
    LossResult h = hsbl(z, label, cfg);
    LossResult c = cosine_ce(z, label, cfg);
    CHECK(h.predicted == label);
    CHECK(h.margin_applied == 0.0);
    CHECK(std::abs(h.value - c.value) < 1e-10);
    CHECK((h.logit_grad - c.logit_grad).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("hsbl margins follow the similarity table") {
  LossConfig cfg = appendix_a_config();
  // Similarities: deer-horse 0.5, deer-ship 0.25.
  Eigen::VectorXd z(4);

  // True deer, predicted horse: margin 1 - 0.5.
  z << 0.2, 0.6, -0.1, 0.0;
  LossResult mis_horse = hsbl(z, 0, cfg);
  CHECK(mis_horse.predicted == 1);
  CHECK(mis_horse.margin_applied == doctest::Approx(0.5).epsilon(1e-12));

  // True deer, predicted ship: margin 1 - 0.25, strictly larger.
  z << 0.2, 0.1, 0.6, 0.0;
  LossResult mis_ship = hsbl(z, 0, cfg);
  CHECK(mis_ship.predicted == 2);
  CHECK(mis_ship.margin_applied == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(mis_ship.margin_applied > mis_horse.margin_applied);
}

TEST_CASE("hsbl gradient matches central finite differences with the margin frozen") {
  std::mt19937_64 gen(31);
  const double step = 1e-6;
  for (int variant = 0; variant < 2; ++variant) {
    LossConfig cfg = appendix_a_config(7.0);
    cfg.denominator = variant == 0 ? HsblDenominator::exclude_true : HsblDenominator::all;
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd z = random_logits(gen, 4);
      int label = static_cast<int>(gen() % 3);
      int predicted = static_cast<int>(gen() % 3);
      LossResult res = hsbl_with_predicted(z, label, predicted, cfg);
      CHECK(std::abs(res.logit_grad.sum()) < 1e-12);
      for (int j = 0; j < 4; ++j) {
        Eigen::VectorXd zp = z, zm = z;
        zp(j) += step;
        zm(j) -= step;
        double fd = (hsbl_with_predicted(zp, label, predicted, cfg).value -
                     hsbl_with_predicted(zm, label, predicted, cfg).value) /
                    (2.0 * step);
        CHECK(std::abs(res.logit_grad(j) - fd) <=
              1e-6 * std::max({std::abs(fd), std::abs(res.logit_grad(j)), 1.0}));
      }
    }
  }
}

TEST_CASE("hsbl dominates cosine cross-entropy, with equality only at zero margin") {
  std::mt19937_64 gen(37);
  LossConfig cfg = appendix_a_config(10.0);
  for (int trial = 0; trial < 300; ++trial) {
    Eigen::VectorXd z = random_logits(gen, 4);
    int label = static_cast<int>(gen() % 3);
    LossResult h = hsbl(z, label, cfg);
    LossResult c = cosine_ce(z, label, cfg);
    CHECK(h.value >= c.value - 1e-12);
    if (h.margin_applied == 0.0)
      CHECK(std::abs(h.value - c.value) < 1e-10);
    else
      CHECK(h.value > c.value);
  }
}

TEST_CASE("a less similar predicted class never lowers the penalty") {
  std::mt19937_64 gen(41);
  LossConfig cfg = appendix_a_config(10.0);
  const auto& s = cfg.similarity.entries;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd z = random_logits(gen, 4);
    int label = static_cast<int>(gen() % 3);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        if (s(a, label) > s(b, label)) {
          double la = hsbl_with_predicted(z, label, a, cfg).value;
          double lb = hsbl_with_predicted(z, label, b, cfg).value;
          CHECK(lb >= la - 1e-12);
        }
      }
  }
}

TEST_CASE("uniform off-diagonal similarity collapses hsbl to a fixed-margin softmax") {
  SimilarityMatrix sim;
  sim.entries = Eigen::MatrixXd::Constant(5, 5, 0.3);
  sim.entries.diagonal().setOnes();
  sim.num_id = 4;
  sim.num_proxies = 1;
  LossConfig cfg;
  cfg.beta = 6.0;
  cfg.similarity = sim;

  std::mt19937_64 gen(43);
  Eigen::VectorXd z = random_logits(gen, 5);
  int label = 1;
  double margin = -1.0;
  for (int predicted = 0; predicted < 4; ++predicted) {
    if (predicted == label) continue;
    LossResult r = hsbl_with_predicted(z, label, predicted, cfg);
    CHECK(r.margin_applied == doctest::Approx(0.7).epsilon(1e-12));
    if (margin < 0)
      margin = r.value;
    else
      CHECK(r.value == doctest::Approx(margin).epsilon(1e-12));
  }
}

TEST_CASE("the denominator=all reading keeps the true class in the plain sum") {
  LossConfig cfg = appendix_a_config(4.0);
  cfg.denominator = HsblDenominator::all;
  Eigen::VectorXd z(4);
  z << 0.9, 0.1, -0.3, 0.05;
  // Correctly classified: with the extra unmargined true-class term the value
  // must exceed the plain cross-entropy.
  LossResult h = hsbl(z, 0, cfg);
  LossResult c = cosine_ce(z, 0, cfg);
  CHECK(h.margin_applied == 0.0);
  CHECK(h.value > c.value);
  CHECK(std::abs(h.logit_grad.sum()) < 1e-12);
}

TEST_CASE("argmax domain controls whether proxies can be predicted") {
  LossConfig cfg = appendix_a_config();
  Eigen::VectorXd z(4);
  z << 0.1, 0.2, 0.3, 0.9;  // proxy logit wins
  LossResult id_only = hsbl(z, 0, cfg);
  CHECK(id_only.predicted == 2);
  cfg.argmax_domain = ArgmaxDomain::all_classes;
  LossResult all = hsbl(z, 0, cfg);
  CHECK(all.predicted == 3);
  CHECK(all.margin_applied == doctest::Approx(1.0 - 0.2).epsilon(1e-12));
}

TEST_CASE("argmax ties resolve to the lowest index") {
  LossConfig cfg = appendix_a_config();
  Eigen::VectorXd z(4);
  z << 0.5, 0.5, 0.5, 0.0;
  CHECK(hsbl(z, 1, cfg).predicted == 0);
}

TEST_CASE("default beta follows the problem size") {
  CHECK(default_beta(3) == 10.0);
  CHECK(default_beta(10) == 10.0);
  CHECK(default_beta(11) == 5.0);
  CHECK(default_beta(100) == 5.0);
}
