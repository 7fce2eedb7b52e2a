#include "core/toy.hpp"

#include <cmath>

#include "core/common.hpp"

namespace pop {

namespace {

// Plain softmax cross-entropy on raw logits, the vanilla baseline.
struct VanillaHead {
  Eigen::MatrixXd weights;  // feature_dim x classes
};

double vanilla_ce(const Eigen::VectorXd& logits, int label, Eigen::VectorXd& grad) {
  double shift = logits.maxCoeff();
  Eigen::VectorXd expd = (logits.array() - shift).exp();
  double denom = expd.sum();
  grad = expd / denom;
  grad(label) -= 1.0;
  return std::log(denom) - (logits(label) - shift);
}

/// Jointly trains the extractor and a learnable linear head with the same
/// SGD settings the fixed configurations use.
VanillaHead train_vanilla(FeatureExtractor& net, const Dataset& data, int classes,
                          const TrainConfig& cfg) {
  const int n = data.size();
  const int feature_dim = net.output_dim();
  std::mt19937_64 gen(cfg.seed);

  VanillaHead head;
  head.weights.resize(feature_dim, classes);
  const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  for (int i = 0; i < feature_dim; ++i)
    for (int j = 0; j < classes; ++j) head.weights(i, j) = scale * gaussian(gen);

  std::vector<Eigen::MatrixXd> vel_w;
  std::vector<Eigen::VectorXd> vel_b;
  for (int l = 0; l < net.num_layers(); ++l) {
    vel_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    vel_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  Eigen::MatrixXd vel_head = Eigen::MatrixXd::Zero(feature_dim, classes);

  const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const long total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch;
  auto lr_at = [&](long step) {
    if (cfg.schedule == LrSchedule::constant) return cfg.lr0;
    return cfg.lr0 * 0.5 *
           (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total_steps)));
  };

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle)
      for (int i = n - 1; i > 0; --i) {
        std::size_t j = uniform_index(gen, static_cast<std::size_t>(i) + 1);
        std::swap(order[i], order[static_cast<int>(j)]);
      }
    for (int start = 0; start < n; start += cfg.batch_size, ++step) {
      const int count = std::min(cfg.batch_size, n - start);
      ParamGrads grads = zero_grads(net);
      Eigen::MatrixXd head_grad = Eigen::MatrixXd::Zero(feature_dim, classes);
      for (int b = 0; b < count; ++b) {
        const int idx = order[start + b];
        ForwardRecord rec = forward_features(net, data.inputs[idx]);
        Eigen::VectorXd logits = head.weights.transpose() * rec.raw_feature;
        Eigen::VectorXd lgrad;
        double value = vanilla_ce(logits, data.labels[idx], lgrad);
        if (!std::isfinite(value))
          fail(ErrorKind::numeric, "non-finite vanilla loss at step " + std::to_string(step));
        head_grad += rec.raw_feature * lgrad.transpose();
        ParamGrads g = backward_raw(net, rec, head.weights * lgrad);
        for (int l = 0; l < net.num_layers(); ++l) {
          grads.weights[l] += g.weights[l];
          grads.biases[l] += g.biases[l];
        }
      }
      const double lr = lr_at(step);
      const double inv = 1.0 / static_cast<double>(count);
      for (int l = 0; l < net.num_layers(); ++l) {
        vel_w[l] = cfg.momentum * vel_w[l] + inv * grads.weights[l] +
                   cfg.weight_decay * net.weights[l];
        vel_b[l] = cfg.momentum * vel_b[l] + inv * grads.biases[l] +
                   cfg.weight_decay * net.biases[l];
        net.weights[l] -= lr * vel_w[l];
        net.biases[l] -= lr * vel_b[l];
      }
      vel_head = cfg.momentum * vel_head + inv * head_grad + cfg.weight_decay * head.weights;
      head.weights -= lr * vel_head;
    }
  }
  return head;
}

double vanilla_confidence(const FeatureExtractor& net, const VanillaHead& head,
                          const Eigen::Vector2d& point, GridMode mode) {
  Eigen::VectorXd logits;
  if (mode == GridMode::direct) {
    Eigen::VectorXd feat = Eigen::VectorXd::Zero(head.weights.rows());
    feat(0) = point(0);
    feat(1) = point(1);
    logits = head.weights.transpose() * feat;
  } else {
    ForwardRecord rec = forward_features(net, point);
    logits = head.weights.transpose() * rec.raw_feature;
  }
  double shift = logits.maxCoeff();
  Eigen::VectorXd expd = (logits.array() - shift).exp();
  return expd.maxCoeff() / expd.sum();
}

Eigen::MatrixXd vanilla_grid(const FeatureExtractor& net, const VanillaHead& head, double lo,
                             double hi, int resolution, GridMode mode) {
  Eigen::MatrixXd grid(resolution, resolution);
  const double step = (hi - lo) / static_cast<double>(resolution - 1);
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j)
      grid(i, j) = vanilla_confidence(net, head, {lo + step * j, lo + step * i}, mode);
  return grid;
}

}  // namespace

ToyResult run_toy(const LabelTree& tree, const ToyConfig& cfg) {
  const int n = tree.num_leaves();
  if (cfg.synth.input_dim != 2)
    fail(ErrorKind::invalid_argument, "the toy experiment works on 2-D inputs");
  SynthData data = generate(tree, cfg.synth);

  ToyResult result;
  for (const auto& m : data.means) result.intersection += Eigen::Vector2d(m(0), m(1));
  result.intersection /= static_cast<double>(n);

  // Vanilla: learnable head on raw features.
  FeatureExtractor net_vanilla = init_params({2, cfg.hidden_dim, n}, cfg.train.seed);
  VanillaHead head = train_vanilla(net_vanilla, data.train, n, cfg.train);
  result.grid_vanilla =
      vanilla_grid(net_vanilla, head, cfg.grid_lo, cfg.grid_hi, cfg.resolution, cfg.grid_mode);
  result.conf_vanilla = vanilla_confidence(net_vanilla, head, result.intersection, cfg.grid_mode);

  // Fixed hierarchy head, no proxies.
  PrototypeSet fixed = build_id_classifier(tree);
  TrainConfig fixed_cfg = cfg.train;
  fixed_cfg.loss.similarity = fixed.source_similarity;
  FeatureExtractor net_fixed = init_params({2, cfg.hidden_dim, fixed.dim()}, cfg.train.seed);
  train(net_fixed, fixed, data.train, fixed_cfg);
  result.grid_fixed = toy_grid(&net_fixed, fixed, cfg.grid_lo, cfg.grid_hi, cfg.resolution,
                               fixed_cfg.loss.beta, cfg.grid_mode);
  result.conf_fixed =
      toy_confidence(&net_fixed, fixed, result.intersection, fixed_cfg.loss.beta, cfg.grid_mode);

  // Fixed head plus outlier proxies.
  PrototypeSet pop = build_pop_classifier(tree, cfg.num_proxies, cfg.proxy_distance);
  TrainConfig pop_cfg = cfg.train;
  pop_cfg.loss.similarity = pop.source_similarity;
  FeatureExtractor net_pop = init_params({2, cfg.hidden_dim, pop.dim()}, cfg.train.seed);
  train(net_pop, pop, data.train, pop_cfg);
  result.grid_pop = toy_grid(&net_pop, pop, cfg.grid_lo, cfg.grid_hi, cfg.resolution,
                             pop_cfg.loss.beta, cfg.grid_mode);
  result.conf_pop =
      toy_confidence(&net_pop, pop, result.intersection, pop_cfg.loss.beta, cfg.grid_mode);

  return result;
}

}  // namespace pop
