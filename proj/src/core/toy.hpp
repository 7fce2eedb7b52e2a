#pragma once

#include <Eigen/Core>

#include "core/datagen.hpp"
#include "core/trainer.hpp"

namespace pop {

/// The 2-D toy experiment: the same synthetic 3-class data trained under a
/// vanilla learnable head, the fixed hierarchy head, and the fixed head with
/// outlier proxies, each rendered as a confidence grid.
struct ToyConfig {
  SynthSpec synth;
  TrainConfig train;
  int hidden_dim = 16;
  int num_proxies = 1;
  double proxy_distance = 4.0;
  double grid_lo = -3.0;
  double grid_hi = 3.0;
  int resolution = 61;
  GridMode grid_mode = GridMode::through_net;

  // Training defaults follow the toy protocol (30 epochs, lr 0.1, weight
  // decay 5e-4). Seed 13 is the shipped fixture: it shows the confidence
  // collapse at the class intersection clearly.
  ToyConfig() {
    synth.seed = 13;
    train.seed = 13;
    train.epochs = 30;
    train.lr0 = 0.1;
    train.weight_decay = 5e-4;
    train.loss.beta = 10.0;
  }
};

struct ToyResult {
  Eigen::MatrixXd grid_vanilla, grid_fixed, grid_pop;
  // Max-ID-softmax confidence of each configuration at the intersection
  // point of the three class regions.
  double conf_vanilla = 0.0, conf_fixed = 0.0, conf_pop = 0.0;
  Eigen::Vector2d intersection = Eigen::Vector2d::Zero();
};

ToyResult run_toy(const LabelTree& tree, const ToyConfig& cfg);

}  // namespace pop
