#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/datagen.hpp"
#include "core/losses.hpp"
#include "core/netcore.hpp"
#include "core/prototypes.hpp"

namespace pop {

enum class LrSchedule { cosine, constant };

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double lr0 = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  LrSchedule schedule = LrSchedule::cosine;
  LossConfig loss;
  std::uint64_t seed = 1;
  bool shuffle = true;
  int checkpoint_every = 0;       // epochs between checkpoints, 0 disables
  std::string checkpoint_prefix;  // files land at <prefix>_epoch<N>.txt
};

struct EpochStats {
  double mean_loss = 0.0;
  double train_acc = 0.0;
  double lr = 0.0;  // learning rate at the first step of the epoch
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

/// Algorithm steps 1-3: distance matrix -> proxy augmentation -> similarity
/// -> factorization, as one frozen head.
PrototypeSet build_pop_classifier(const LabelTree& tree, int num_proxies, double proxy_distance,
                                  RotationMode rotation = RotationMode::identity,
                                  std::uint64_t rotation_seed = 0);

/// The proxy-free head of the same construction (augmentation skipped).
PrototypeSet build_id_classifier(const LabelTree& tree,
                                 RotationMode rotation = RotationMode::identity,
                                 std::uint64_t rotation_seed = 0);

/// SGD with momentum and weight decay under the configured schedule:
///   v <- momentum * v + g + weight_decay * theta;  theta <- theta - lr * v
/// with lr(t) = lr0 * 0.5 * (1 + cos(pi * t / T)) over the T total steps when
/// the schedule is cosine. Batches are seeded-shuffle deterministic; the
/// prototypes are never touched.
TrainLog train(FeatureExtractor& net, const PrototypeSet& protos, const Dataset& data,
               const TrainConfig& cfg);

void write_train_log_csv(const std::string& path, const TrainLog& log);

}  // namespace pop
