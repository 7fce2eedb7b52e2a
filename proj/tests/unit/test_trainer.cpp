#include <cmath>
#include <random>

#include "core/common.hpp"
#include "core/trainer.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace pop;

namespace {

TrainConfig config_for(const PrototypeSet& protos) {
  TrainConfig cfg;
  cfg.loss.similarity = protos.source_similarity;
  cfg.loss.beta = default_beta(protos.num_id);
  return cfg;
}

Dataset three_cluster_data(const LabelTree& tree, std::uint64_t seed, int per_class = 60) {
  SynthSpec spec;
  spec.input_dim = 2;
  spec.train_per_class = per_class;
  spec.test_per_class = 2;
  spec.ood_count = 1;
  spec.stddev = 0.25;
  spec.mean_separation = 2.0;
  spec.seed = seed;
  return generate(tree, spec).train;
}

bool identical(const FeatureExtractor& a, const FeatureExtractor& b) {
  for (int l = 0; l < a.num_layers(); ++l)
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  return true;
}

}  // namespace

TEST_CASE("build_pop_classifier composes the full pipeline") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  PrototypeSet protos = build_pop_classifier(tree, 1, 4.0);
  REQUIRE(protos.dim() == 4);
  CHECK(protos.num_id == 3);
  CHECK(protos.num_proxies == 1);

  // The Gram matrix equals phi applied to the printed 4x4 distance matrix.
  Eigen::MatrixXd dpop(4, 4);
  dpop << 0, 1, 3, 4, 1, 0, 3, 4, 3, 3, 0, 4, 4, 4, 4, 0;
  Eigen::MatrixXd expected = dpop.unaryExpr([](double d) { return 1.0 / (d + 1.0); });
  CHECK((protos.weights.transpose() * protos.weights - expected).cwiseAbs().maxCoeff() < 1e-8);

  CHECK_THROWS_AS(build_pop_classifier(tree, 0, 4.0), Error);
  CHECK_THROWS_AS(build_pop_classifier(tree, 1, 3.0), Error);

  LabelTree cifar = LabelTree::parse(helpers::kCifar10Tree);
  CHECK(build_pop_classifier(cifar, 2, 4.0).num_classes() == 12);
}

TEST_CASE("zero learning rate leaves the parameters untouched") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  PrototypeSet protos = build_pop_classifier(tree, 1, 4.0);
  Dataset data = three_cluster_data(tree, 2, 10);
  FeatureExtractor net = init_params({2, 8, protos.dim()}, 5);
  FeatureExtractor before = net;
  TrainConfig cfg = config_for(protos);
  cfg.lr0 = 0.0;
  cfg.epochs = 3;
  cfg.weight_decay = 0.5;  // must also be inert at lr 0
  train(net, protos, data, cfg);
  CHECK(identical(net, before));
}

TEST_CASE("training is bit-deterministic given the seed") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  PrototypeSet protos = build_pop_classifier(tree, 1, 4.0);
  Dataset data = three_cluster_data(tree, 3, 20);
  TrainConfig cfg = config_for(protos);
  cfg.epochs = 5;

  FeatureExtractor a = init_params({2, 8, protos.dim()}, 9);
  FeatureExtractor b = init_params({2, 8, protos.dim()}, 9);
  TrainLog la = train(a, protos, data, cfg);
  TrainLog lb = train(b, protos, data, cfg);
  CHECK(identical(a, b));
  REQUIRE(la.epochs.size() == lb.epochs.size());
  for (std::size_t e = 0; e < la.epochs.size(); ++e) {
    CHECK(la.epochs[e].mean_loss == lb.epochs[e].mean_loss);
    CHECK(la.epochs[e].train_acc == lb.epochs[e].train_acc);
    CHECK(la.epochs[e].lr == lb.epochs[e].lr);
  }
  CHECK(a.epoch == 5);
}

TEST_CASE("the prototypes are frozen through training") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  PrototypeSet protos = build_pop_classifier(tree, 1, 4.0);
  Eigen::MatrixXd snapshot = protos.weights;
  Dataset data = three_cluster_data(tree, 4, 20);
  FeatureExtractor net = init_params({2, 8, protos.dim()}, 1);
  TrainConfig cfg = config_for(protos);
  cfg.epochs = 10;
  train(net, protos, data, cfg);
  CHECK(protos.weights == snapshot);
}

TEST_CASE("one sample trained with a constant rate converges monotonically") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  PrototypeSet protos = build_pop_classifier(tree, 1, 4.0);
  Dataset data;
  data.inputs = {Eigen::Vector2d(0.8, -0.4)};
  data.labels = {1};
  FeatureExtractor net = init_params({2, 16, protos.dim()}, 13);
  TrainConfig cfg = config_for(protos);
  cfg.epochs = 200;
  cfg.batch_size = 1;
  cfg.lr0 = 0.05;
  cfg.schedule = LrSchedule::constant;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  TrainLog log = train(net, protos, data, cfg);
  REQUIRE(log.epochs.size() == 200);
  for (std::size_t e = 10; e + 1 < log.epochs.size(); ++e)
    CHECK(log.epochs[e + 1].mean_loss <= log.epochs[e].mean_loss + 1e-12);
  CHECK(log.epochs.back().train_acc == 1.0);
}

TEST_CASE("sgd updates match a hand-stepped oracle") {
  // Tiny two-class problem so every parameter can be replayed by hand.
  LabelTree tree = LabelTree::parse("root - 1\na root 0\nb root 0\nleaves: a b\n");
  PrototypeSet protos = build_id_classifier(tree);
  REQUIRE(protos.dim() == 2);
  Dataset data;
  data.inputs = {Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0)};
  data.labels = {0, 1};

  for (double momentum : {0.0, 0.9}) {
    TrainConfig cfg = config_for(protos);
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.lr0 = 0.1;
    cfg.momentum = momentum;
    cfg.weight_decay = 0.01;
    cfg.schedule = LrSchedule::constant;
    cfg.shuffle = false;

    FeatureExtractor net = init_params({2, 2}, 3);
    FeatureExtractor mirror = net;

    // Oracle: replay the update rule with gradients from the public
    // forward/backward on the mirror parameters.
    Eigen::MatrixXd vw = Eigen::MatrixXd::Zero(2, 2);
    Eigen::VectorXd vb = Eigen::VectorXd::Zero(2);
    for (int stepi = 0; stepi < 3; ++stepi) {
      Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(2, 2);
      Eigen::VectorXd gb = Eigen::VectorXd::Zero(2);
      for (int i = 0; i < 2; ++i) {
        ForwardRecord rec = forward(mirror, protos, data.inputs[i]);
        LossResult loss = evaluate_loss(rec.logits, data.labels[i], cfg.loss);
        ParamGrads g = backward(mirror, protos, rec, loss.logit_grad);
        gw += g.weights[0];
        gb += g.biases[0];
      }
      vw = momentum * vw + 0.5 * gw + cfg.weight_decay * mirror.weights[0];
      vb = momentum * vb + 0.5 * gb + cfg.weight_decay * mirror.biases[0];
      mirror.weights[0] -= cfg.lr0 * vw;
      mirror.biases[0] -= cfg.lr0 * vb;
    }

    train(net, protos, data, cfg);
    CHECK((net.weights[0] - mirror.weights[0]).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((net.biases[0] - mirror.biases[0]).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("the learning-rate log follows the declared schedule exactly") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  PrototypeSet protos = build_pop_classifier(tree, 1, 4.0);
  Dataset data = three_cluster_data(tree, 6, 16);  // 48 samples
  TrainConfig cfg = config_for(protos);
  cfg.epochs = 8;
  cfg.batch_size = 20;  // 3 steps per epoch, last batch partial
  FeatureExtractor net = init_params({2, 8, protos.dim()}, 2);

  SUBCASE("cosine") {
    cfg.schedule = LrSchedule::cosine;
    TrainLog log = train(net, protos, data, cfg);
    const int steps_per_epoch = 3;
    const double total = 8.0 * steps_per_epoch;
    for (int e = 0; e < 8; ++e) {
      double expected = cfg.lr0 * 0.5 * (1.0 + std::cos(M_PI * (e * steps_per_epoch) / total));
      CHECK(log.epochs[e].lr == expected);
    }
  }
  SUBCASE("constant") {
    cfg.schedule = LrSchedule::constant;
    TrainLog log = train(net, protos, data, cfg);
    for (const auto& e : log.epochs) CHECK(e.lr == cfg.lr0);
  }
}

TEST_CASE("training reaches 99% accuracy on the separable three-cluster toy") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  PrototypeSet protos = build_pop_classifier(tree, 1, 4.0);
  Dataset data = three_cluster_data(tree, 11, 60);
  FeatureExtractor net = init_params({2, 16, protos.dim()}, 11);
  TrainConfig cfg = config_for(protos);
  cfg.epochs = 100;
  TrainLog log = train(net, protos, data, cfg);
  CHECK(log.epochs.back().train_acc >= 0.99);
}

TEST_CASE("bad labels and poisoned parameters abort with diagnostics") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  PrototypeSet protos = build_pop_classifier(tree, 1, 4.0);
  TrainConfig cfg = config_for(protos);
  cfg.epochs = 1;

  Dataset bad;
  bad.inputs = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)};
  bad.labels = {0, 3};  // 3 is the proxy column
  FeatureExtractor net = init_params({2, 8, protos.dim()}, 1);
  try {
    train(net, protos, bad, cfg);
    FAIL("expected a label error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_argument);
    CHECK(std::string(e.what()).find("sample 1") != std::string::npos);
  }

  Dataset ok;
  ok.inputs = {Eigen::Vector2d(0.5, 0.5)};
  ok.labels = {0};
  FeatureExtractor poisoned = init_params({2, 8, protos.dim()}, 1);
  poisoned.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train(poisoned, protos, ok, cfg);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("train validates its configuration") {
  LabelTree tree = LabelTree::parse(helpers::kAppendixATree);
  PrototypeSet protos = build_pop_classifier(tree, 1, 4.0);
  Dataset data = three_cluster_data(tree, 2, 4);
  FeatureExtractor net = init_params({2, 8, protos.dim()}, 1);

  TrainConfig cfg = config_for(protos);
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(train(net, protos, data, cfg), Error);
  cfg = config_for(protos);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(net, protos, data, cfg), Error);
  cfg = config_for(protos);
  cfg.lr0 = -0.1;
  CHECK_THROWS_AS(train(net, protos, data, cfg), Error);
  cfg = config_for(protos);
  cfg.loss.similarity = SimilarityMatrix{};
  CHECK_THROWS_AS(train(net, protos, data, cfg), Error);

  FeatureExtractor mismatched = init_params({2, 8, protos.dim() + 1}, 1);
  cfg = config_for(protos);
  CHECK_THROWS_AS(train(mismatched, protos, data, cfg), Error);
}
