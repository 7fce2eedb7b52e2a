#include "core/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "core/common.hpp"
#include "core/io.hpp"

namespace pop {

PrototypeSet build_pop_classifier(const LabelTree& tree, int num_proxies, double proxy_distance,
                                  RotationMode rotation, std::uint64_t rotation_seed) {
  DistanceMatrix dist = build_distance_matrix(tree);
  DistanceMatrix dist_pop = augment_with_proxies(dist, num_proxies, proxy_distance);
  return factor_similarity(distance_to_similarity(dist_pop), rotation, rotation_seed);
}

PrototypeSet build_id_classifier(const LabelTree& tree, RotationMode rotation,
                                 std::uint64_t rotation_seed) {
  return factor_similarity(distance_to_similarity(build_distance_matrix(tree)), rotation,
                           rotation_seed);
}

namespace {

void validate_config(const TrainConfig& cfg, const FeatureExtractor& net,
                     const PrototypeSet& protos) {
  if (cfg.epochs < 0) fail(ErrorKind::invalid_argument, "epochs must be non-negative");
  if (cfg.batch_size < 1) fail(ErrorKind::invalid_argument, "batch_size must be positive");
  if (!(cfg.lr0 >= 0.0) || !std::isfinite(cfg.lr0))
    fail(ErrorKind::invalid_argument, "lr0 must be a finite non-negative number");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    fail(ErrorKind::invalid_argument, "momentum must lie in [0, 1)");
  if (!(cfg.weight_decay >= 0.0))
    fail(ErrorKind::invalid_argument, "weight_decay must be non-negative");
  if (net.output_dim() != protos.dim())
    fail(ErrorKind::invalid_argument, "net output dimension does not match the prototype head");
  if (cfg.loss.similarity.size() != protos.num_classes())
    fail(ErrorKind::invalid_argument,
         "loss similarity matrix size does not match the prototype head");
}

struct Momentum {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

}  // namespace

TrainLog train(FeatureExtractor& net, const PrototypeSet& protos, const Dataset& data,
               const TrainConfig& cfg) {
  validate_config(cfg, net, protos);
  const int n = data.size();
  if (n == 0) fail(ErrorKind::invalid_argument, "training set is empty");
  for (int i = 0; i < n; ++i)
    if (data.labels[i] < 0 || data.labels[i] >= protos.num_id)
      fail(ErrorKind::invalid_argument, "sample " + std::to_string(i) + " has label " +
                                            std::to_string(data.labels[i]) +
                                            ", outside the ID range [0, " +
                                            std::to_string(protos.num_id) + ")");
  if (data.dim() != net.input_dim())
    fail(ErrorKind::invalid_argument, "dataset dimension does not match the net input");

  const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const long total_steps = static_cast<long>(cfg.epochs) * steps_per_epoch;

  Momentum vel;
  for (int l = 0; l < net.num_layers(); ++l) {
    vel.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    vel.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }

  std::mt19937_64 gen(cfg.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  auto lr_at = [&](long step) {
    if (cfg.schedule == LrSchedule::constant) return cfg.lr0;
    return cfg.lr0 * 0.5 *
           (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total_steps)));
  };

  TrainLog log;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      // Explicit Fisher-Yates; std::shuffle's draw sequence is implementation-defined.
      for (int i = n - 1; i > 0; --i) {
        std::size_t j = uniform_index(gen, static_cast<std::size_t>(i) + 1);
        std::swap(order[i], order[static_cast<int>(j)]);
      }
    }

    EpochStats stats;
    stats.lr = lr_at(step);
    double loss_sum = 0.0;
    int correct = 0;

    for (int start = 0; start < n; start += cfg.batch_size, ++step) {
      const int count = std::min(cfg.batch_size, n - start);
      ParamGrads grads = zero_grads(net);
      for (int b = 0; b < count; ++b) {
        const int idx = order[start + b];
        ForwardRecord rec = forward(net, protos, data.inputs[idx]);
        LossResult loss = evaluate_loss(rec.logits, data.labels[idx], cfg.loss);
        if (!std::isfinite(loss.value))
          fail(ErrorKind::numeric, "non-finite loss " + format_double(loss.value) + " at step " +
                                       std::to_string(step) + " (lr " + format_double(lr_at(step)) +
                                       ", sample " + std::to_string(idx) + ")");
        loss_sum += loss.value;
        if (loss.predicted == data.labels[idx]) ++correct;
        ParamGrads g = backward(net, protos, rec, loss.logit_grad);
        for (int l = 0; l < net.num_layers(); ++l) {
          grads.weights[l] += g.weights[l];
          grads.biases[l] += g.biases[l];
        }
      }

      const double lr = lr_at(step);
      const double inv = 1.0 / static_cast<double>(count);
      for (int l = 0; l < net.num_layers(); ++l) {
        vel.weights[l] = cfg.momentum * vel.weights[l] + inv * grads.weights[l] +
                         cfg.weight_decay * net.weights[l];
        vel.biases[l] =
            cfg.momentum * vel.biases[l] + inv * grads.biases[l] + cfg.weight_decay * net.biases[l];
        net.weights[l] -= lr * vel.weights[l];
        net.biases[l] -= lr * vel.biases[l];
      }
    }

    stats.mean_loss = loss_sum / static_cast<double>(n);
    stats.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    log.epochs.push_back(stats);

    net.epoch = epoch + 1;
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_prefix.empty() &&
        (epoch + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(cfg.checkpoint_prefix + "_epoch" + std::to_string(epoch + 1) + ".txt", net);
  }

  return log;
}

void write_train_log_csv(const std::string& path, const TrainLog& log) {
  std::ostringstream os;
  os << "epoch,mean_loss,train_acc,lr\n";
  for (std::size_t e = 0; e < log.epochs.size(); ++e)
    os << e << "," << format_double(log.epochs[e].mean_loss) << ","
       << format_double(log.epochs[e].train_acc) << "," << format_double(log.epochs[e].lr) << "\n";
  write_file(path, os.str());
}

}  // namespace pop
