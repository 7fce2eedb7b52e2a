#include <algorithm>
#include <random>

#include "core/common.hpp"
#include "core/hierarchy.hpp"
#include "core/io.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace pop;

namespace {

int leaf_index(const LabelTree& tree, const std::string& id) {
  for (int i = 0; i < tree.num_leaves(); ++i)
    if (tree.leaf_id(i) == id) return i;
  return -1;
}

}  // namespace

TEST_CASE("lca distance on the CIFAR-10 hierarchy") {
  LabelTree tree = LabelTree::parse(helpers::kCifar10Tree);
  REQUIRE(tree.num_leaves() == 10);
  const int cat = leaf_index(tree, "cat");
  const int horse = leaf_index(tree, "horse");
  const int ship = leaf_index(tree, "ship");
  const int dog = leaf_index(tree, "dog");
  CHECK(tree.lca_distance(cat, horse) == 2);  // meet at 'animal'
  CHECK(tree.lca_distance(cat, dog) == 1);
  CHECK(tree.lca_distance(cat, ship) == 3);
  CHECK(tree.lca_distance(horse, cat) == 2);
  for (int k = 0; k < tree.num_leaves(); ++k) CHECK(tree.lca_distance(k, k) == 0);
}

TEST_CASE("lca distance rejects invalid class indices") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  CHECK_THROWS_AS(tree.lca_distance(-1, 0), Error);
  CHECK_THROWS_AS(tree.lca_distance(0, 3), Error);
  try {
    tree.lca_distance(0, 99);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_argument);
  }
}

TEST_CASE("depth-3 balanced binary tree matches the path-walk oracle on all 28 pairs") {
  // Heights 0/1/2/3 from the leaves up.
  std::string text;
  text += "root - 3\n";
  for (int i = 0; i < 2; ++i) text += "a" + std::to_string(i) + " root 2\n";
  for (int i = 0; i < 4; ++i) text += "b" + std::to_string(i) + " a" + std::to_string(i / 2) + " 1\n";
  for (int i = 0; i < 8; ++i) text += "l" + std::to_string(i) + " b" + std::to_string(i / 2) + " 0\n";
  text += "leaves: l0 l1 l2 l3 l4 l5 l6 l7\n";
  LabelTree tree = LabelTree::parse(text);

  auto oracle = [](int a, int b) {
    // Walk both leaves upward level by level; the meet level is the height.
    if (a == b) return 0;
    if (a / 2 == b / 2) return 1;
    if (a / 4 == b / 4) return 2;
    return 3;
  };
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b) CHECK(tree.lca_distance(a, b) == oracle(a, b));
}

TEST_CASE("lca distance is symmetric, zero only on the diagonal, ultrametric") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(gen() % 11);  // up to 12 leaves
    helpers::RandomTree spec = helpers::random_tree(gen, n);
    LabelTree tree = LabelTree::parse(spec.text);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        long d = tree.lca_distance(a, b);
        CHECK(d == tree.lca_distance(b, a));
        CHECK((d == 0) == (a == b));
        CHECK(d == helpers::oracle_lca_height(spec, a, b));
      }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          CHECK(tree.lca_distance(a, c) <=
                std::max(tree.lca_distance(a, b), tree.lca_distance(b, c)));
  }
}

TEST_CASE("tree parser rejects malformed input") {
  CHECK_THROWS_AS(LabelTree::parse(""), Error);
  CHECK_THROWS_AS(LabelTree::parse("root - 1\n"), Error);  // no leaves block
  CHECK_THROWS_AS(LabelTree::parse("a - 1\nb - 1\nleaves: a b\n"), Error);  // two roots
  CHECK_THROWS_AS(LabelTree::parse("a ghost 0\nleaves: a\n"), Error);      // unknown parent
  CHECK_THROWS_AS(LabelTree::parse("root - 1\na root 0\na root 0\nleaves: a\n"), Error);
  // Parent height must exceed child height.
  CHECK_THROWS_AS(LabelTree::parse("root - 1\nmid root 1\na mid 0\nleaves: a\n"), Error);
  // Leaves must have height zero.
  CHECK_THROWS_AS(LabelTree::parse("root - 2\na root 1\nleaves: a\n"), Error);
  // A listed leaf may not have children.
  CHECK_THROWS_AS(LabelTree::parse("root - 2\nmid root 1\na mid 0\nleaves: mid\n"), Error);
  // Cycle between non-root nodes.
  CHECK_THROWS_AS(LabelTree::parse("root - 3\nx y 2\ny x 1\na x 0\nleaves: a\n"), Error);
}

TEST_CASE("distance matrix of the three-class tree") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  DistanceMatrix d = build_distance_matrix(tree);
  REQUIRE(d.size() == 3);
  Eigen::MatrixXd expected(3, 3);
  expected << 0, 1, 3, 1, 0, 3, 3, 3, 0;
  CHECK(d.entries == expected);
  CHECK(d.num_id == 3);
  CHECK(d.num_proxies == 0);
  CHECK(d.d_max == 3.0);
  CHECK_FALSE(d.proxy_distance.has_value());
}

TEST_CASE("distance matrix corner cases") {
  LabelTree single = LabelTree::parse("root - 0\nleaves: root\n");
  DistanceMatrix d = build_distance_matrix(single);
  CHECK(d.size() == 1);
  CHECK(d.entries(0, 0) == 0.0);
  CHECK(d.d_max == 0.0);

  LabelTree cifar = LabelTree::parse(helpers::kCifar10Tree);
  CHECK(build_distance_matrix(cifar).d_max == 3.0);
}

TEST_CASE("proxy augmentation reproduces the printed 4x4 matrix") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  DistanceMatrix d = build_distance_matrix(tree);
  DistanceMatrix dpop = augment_with_proxies(d, 1, 4.0);
  Eigen::MatrixXd expected(4, 4);
  expected << 0, 1, 3, 4, 1, 0, 3, 4, 3, 3, 0, 4, 4, 4, 4, 0;
  CHECK(dpop.entries == expected);
  CHECK(dpop.num_id == 3);
  CHECK(dpop.num_proxies == 1);
  CHECK(dpop.proxy_distance == 4.0);
  CHECK(dpop.d_max == 3.0);
}

TEST_CASE("proxy augmentation keeps the ID block and stays symmetric") {
  LabelTree tree = LabelTree::parse(helpers::kCifar10Tree);
  DistanceMatrix d = build_distance_matrix(tree);
  DistanceMatrix dpop = augment_with_proxies(d, 2, 4.0);
  REQUIRE(dpop.size() == 12);
  CHECK(dpop.entries.topLeftCorner(10, 10) == d.entries);
  CHECK(dpop.entries == dpop.entries.transpose().eval());
  CHECK(dpop.entries.diagonal().isZero(0.0));
  // Bottom-right proxy block.
  Eigen::MatrixXd corner(2, 2);
  corner << 0, 4, 4, 0;
  CHECK(dpop.entries.bottomRightCorner(2, 2) == corner);
}

TEST_CASE("proxy augmentation validates its preconditions") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  DistanceMatrix d = build_distance_matrix(tree);
  try {
    augment_with_proxies(d, 1, 2.0);
    FAIL("expected a constraint error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::constraint);
    CHECK(std::string(e.what()).find("d_max") != std::string::npos);
  }
  CHECK_THROWS_AS(augment_with_proxies(d, 1, 3.0), Error);  // strict inequality
  CHECK_THROWS_AS(augment_with_proxies(d, 0, 4.0), Error);
  CHECK_THROWS_AS(augment_with_proxies(d, -2, 4.0), Error);
  DistanceMatrix dpop = augment_with_proxies(d, 1, 4.0);
  CHECK_THROWS_AS(augment_with_proxies(dpop, 1, 5.0), Error);  // no double augmentation
  // Non-integer proxy distances are fine.
  CHECK(augment_with_proxies(d, 1, 3.5).entries(0, 3) == 3.5);
}

TEST_CASE("similarity mapping phi") {
  CHECK(similarity_phi(0.0) == 1.0);
  CHECK(similarity_phi(1.0) == 0.5);
  CHECK(similarity_phi(3.0) == 0.25);
  CHECK(similarity_phi(4.0) == doctest::Approx(0.2).epsilon(1e-15));

  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  SimilarityMatrix s = distance_to_similarity(build_distance_matrix(tree));
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 0.5, 0.25, 0.5, 1, 0.25, 0.25, 0.25, 1;
  CHECK((s.entries - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(s.num_id == 3);
  CHECK(s.num_proxies == 0);
}

TEST_CASE("similarity preserves symmetry, unit diagonal and (0,1] range") {
  std::mt19937_64 gen(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(gen() % 11);
    LabelTree tree = LabelTree::parse(helpers::random_tree(gen, n).text);
    DistanceMatrix d = build_distance_matrix(tree);
    if (d.d_max > 0 && trial % 2 == 0) d = augment_with_proxies(d, 1 + trial % 3, d.d_max + 1.5);
    SimilarityMatrix s = distance_to_similarity(d);
    CHECK(s.entries == s.entries.transpose().eval());
    for (int i = 0; i < s.size(); ++i) {
      CHECK(s.entries(i, i) == 1.0);
      for (int j = 0; j < s.size(); ++j) {
        CHECK(s.entries(i, j) > 0.0);
        CHECK(s.entries(i, j) <= 1.0);
        if (i != j) CHECK(s.entries(i, j) < 1.0);
      }
    }
    // phi is strictly decreasing.
    for (int i = 0; i < s.size(); ++i)
      for (int j = 0; j < s.size(); ++j)
        for (int k = 0; k < s.size(); ++k)
          if (d.entries(i, j) < d.entries(i, k))
            CHECK(s.entries(i, j) > s.entries(i, k));
  }
}

TEST_CASE("matrix CSV round-trip") {
  helpers::TempDir tmp;
  LabelTree tree = LabelTree::parse(helpers::kCifar10Tree);
  DistanceMatrix d = augment_with_proxies(build_distance_matrix(tree), 2, 4.25);
  save_distance_matrix(tmp.file("d.csv"), d);
  LoadedMatrix back = load_matrix_csv(tmp.file("d.csv"));
  CHECK(back.entries == d.entries);
  CHECK(back.num_id == 10);
  CHECK(back.num_proxies == 2);

  CHECK_THROWS_AS(load_matrix_csv(tmp.file("missing.csv")), Error);
  write_file(tmp.file("bad.csv"), "no header\n1,2\n");
  try {
    load_matrix_csv(tmp.file("bad.csv"));
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
}
