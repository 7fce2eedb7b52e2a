#include <random>

#include "core/common.hpp"
#include "core/io.hpp"
#include "core/prototypes.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace pop;

namespace {

SimilarityMatrix appendix_a_similarity() {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  return distance_to_similarity(build_distance_matrix(tree));
}

SimilarityMatrix cifar_pop_similarity() {
  LabelTree tree = LabelTree::parse(helpers::kCifar10Tree);
  return distance_to_similarity(augment_with_proxies(build_distance_matrix(tree), 2, 4.0));
}

double max_gram_error(const PrototypeSet& p) {
  return (p.weights.transpose() * p.weights - p.source_similarity.entries).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("factoring the identity similarity gives an orthonormal head") {
  SimilarityMatrix sim;
  sim.entries = Eigen::MatrixXd::Identity(5, 5);
  sim.num_id = 5;
  PrototypeSet p = factor_similarity(sim);
  CHECK((p.weights.transpose() * p.weights - Eigen::MatrixXd::Identity(5, 5))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("factoring the three-class similarity reproduces its Gram matrix") {
  PrototypeSet p = factor_similarity(appendix_a_similarity());
  REQUIRE(p.dim() == 3);
  CHECK(max_gram_error(p) < 1e-8);
  // Cosine between the deer and horse prototypes, by explicit dot product.
  double cos_dh = p.weights.col(0).dot(p.weights.col(1));
  CHECK(cos_dh == doctest::Approx(0.5).epsilon(1e-9));
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(p.weights.col(j).norm() - 1.0) < 1e-8);
}

TEST_CASE("the 12-class proxy head has unit columns and phi(4) proxy cosines") {
  PrototypeSet p = factor_similarity(cifar_pop_similarity());
  REQUIRE(p.dim() == 12);
  REQUIRE(p.num_id == 10);
  REQUIRE(p.num_proxies == 2);
  CHECK(max_gram_error(p) < 1e-8);
  for (int j = 0; j < 12; ++j) CHECK(std::abs(p.weights.col(j).norm() - 1.0) < 1e-8);
  for (int i = 0; i < 10; ++i)
    for (int j = 10; j < 12; ++j)
      CHECK(p.weights.col(i).dot(p.weights.col(j)) == doctest::Approx(0.2).epsilon(1e-8));
}

TEST_CASE("reconstruction holds across random hierarchy similarities") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 15; ++trial) {
    const int n = 1 + static_cast<int>(gen() % 12);
    LabelTree tree = LabelTree::parse(helpers::random_tree(gen, std::max(n, 1)).text);
    DistanceMatrix d = build_distance_matrix(tree);
    if (trial % 2 == 1) d = augment_with_proxies(d, 1 + static_cast<int>(gen() % 4), d.d_max + 1.0);
    PrototypeSet p = factor_similarity(distance_to_similarity(d));
    CHECK(max_gram_error(p) < 1e-8);
    for (int j = 0; j < p.num_classes(); ++j)
      CHECK(std::abs(p.weights.col(j).norm() - 1.0) < 1e-8);
  }
}

TEST_CASE("random orthogonal rotations leave the Gram matrix unchanged") {
  SimilarityMatrix sim = cifar_pop_similarity();
  PrototypeSet base = factor_similarity(sim);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PrototypeSet rotated = factor_similarity(sim, RotationMode::random_orthogonal, seed);
    CHECK((rotated.weights.transpose() * rotated.weights -
           base.weights.transpose() * base.weights)
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    CHECK(max_gram_error(rotated) < 1e-8);
    // And the rotation actually moved the weights.
    CHECK((rotated.weights - base.weights).cwiseAbs().maxCoeff() > 1e-6);
  }
}

TEST_CASE("factorization is deterministic") {
  SimilarityMatrix sim = cifar_pop_similarity();
  PrototypeSet a = factor_similarity(sim);
  PrototypeSet b = factor_similarity(sim);
  CHECK(a.weights == b.weights);
  PrototypeSet r1 = factor_similarity(sim, RotationMode::random_orthogonal, 9);
  PrototypeSet r2 = factor_similarity(sim, RotationMode::random_orthogonal, 9);
  CHECK(r1.weights == r2.weights);
}

TEST_CASE("non-PSD similarity is rejected with the offending eigenvalue") {
  SimilarityMatrix sim;
  sim.entries.resize(3, 3);
  sim.entries << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
  sim.num_id = 3;
  try {
    factor_similarity(sim);
    FAIL("expected a not-PSD error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::not_psd);
    CHECK(std::string(e.what()).find("eigenvalue") != std::string::npos);
  }
}

TEST_CASE("rank-deficient but PSD similarity is clamped, not rejected") {
  SimilarityMatrix sim;
  sim.entries = Eigen::MatrixXd::Ones(4, 4);  // eigenvalues {4, 0, 0, 0}
  sim.num_id = 4;
  PrototypeSet p = factor_similarity(sim);
  CHECK(max_gram_error(p) < 1e-8);
}

TEST_CASE("factor_similarity validates shape and symmetry") {
  SimilarityMatrix sim;
  sim.entries.resize(2, 2);
  sim.entries << 1, 0.4, 0.5, 1;
  sim.num_id = 2;
  CHECK_THROWS_AS(factor_similarity(sim), Error);
  sim.entries << 0.9, 0.4, 0.4, 1;  // bad diagonal
  CHECK_THROWS_AS(factor_similarity(sim), Error);
}

TEST_CASE("cosine_to matches a plain dot-product loop") {
  std::mt19937_64 gen(11);
  LabelTree tree = LabelTree::parse(helpers::kBenchmark5Tree);
  PrototypeSet p = factor_similarity(distance_to_similarity(build_distance_matrix(tree)));
  REQUIRE(p.dim() == 5);

  Eigen::VectorXd f(5);
  for (int i = 0; i < 5; ++i) f(i) = gaussian(gen);
  f.normalize();
  Eigen::VectorXd z = cosine_to(p, f);
  for (int j = 0; j < 5; ++j) {
    double dot = 0.0;
    for (int i = 0; i < 5; ++i) dot += p.weights(i, j) * f(i);
    CHECK(z(j) == doctest::Approx(dot).epsilon(1e-12));
    CHECK(z(j) >= -1.0 - 1e-6);
    CHECK(z(j) <= 1.0 + 1e-6);
  }

  // Feature equal to a prototype: logits are that similarity column.
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd zk = cosine_to(p, p.weights.col(k));
    CHECK(zk(k) == doctest::Approx(1.0).epsilon(1e-9));
    for (int j = 0; j < 5; ++j)
      CHECK(zk(j) == doctest::Approx(p.source_similarity.entries(j, k)).epsilon(1e-9));
    Eigen::VectorXd zneg = cosine_to(p, -p.weights.col(k));
    CHECK(zneg(k) == doctest::Approx(-1.0).epsilon(1e-9));
  }

  CHECK_THROWS_AS(cosine_to(p, 2.0 * f), Error);
  CHECK_THROWS_AS(cosine_to(p, Eigen::VectorXd::Ones(4)), Error);
}

TEST_CASE("prototype CSV round-trip preserves the head") {
  helpers::TempDir tmp;
  PrototypeSet p = factor_similarity(cifar_pop_similarity());
  save_prototypes(tmp.file("protos.csv"), p);
  PrototypeSet back = load_prototypes(tmp.file("protos.csv"));
  CHECK(back.num_id == p.num_id);
  CHECK(back.num_proxies == p.num_proxies);
  CHECK(back.weights == p.weights);  // 17 significant digits round-trip exactly
  CHECK((back.source_similarity.entries - p.source_similarity.entries).cwiseAbs().maxCoeff() <
        1e-8);

  CHECK_THROWS_AS(load_prototypes(tmp.file("absent.csv")), Error);
  write_file(tmp.file("corrupt.csv"), "# 2 2 2 0\n# dim 2 num_id 2 num_proxies 0\n1,0\n");
  CHECK_THROWS_AS(load_prototypes(tmp.file("corrupt.csv")), Error);
}
