#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "core/hierarchy.hpp"
#include "core/netcore.hpp"

namespace pop {

enum class DataRole { id_train, id_test, ood };

struct Dataset {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<int> labels;  // -1 for OOD samples
  DataRole role = DataRole::id_train;

  int size() const { return static_cast<int>(inputs.size()); }
  int dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs[0].size()); }
};

enum class OodMode { far, near };

struct SynthSpec {
  int input_dim = 2;
  int train_per_class = 200;
  int test_per_class = 100;
  int ood_count = 500;
  double stddev = 0.35;
  double mean_separation = 2.0;  // unit LCA distance maps to this input-space distance
  std::uint64_t seed = 1;
  OodMode ood_mode = OodMode::far;
  double near_coeff = 0.5;        // interpolation point between the two closest means
  int ood_clusters = 8;           // far mode scatters OOD over this many clusters
  double far_radius_scale = 3.0;  // OOD cluster radius as a multiple of the ID mean spread
  std::vector<Eigen::VectorXd> means;  // one per leaf; empty derives them from the tree
};

struct SynthData {
  Dataset train, test, ood;
  std::vector<Eigen::VectorXd> means;
};

/// Class means placed by classical multidimensional scaling of the LCA
/// distance matrix, so mean separation is proportional to hierarchical
/// distance (exact whenever input_dim covers the embedding rank).
std::vector<Eigen::VectorXd> hierarchy_means(const LabelTree& tree, int input_dim,
                                             double separation);

/// Gaussian clusters per leaf plus an unlabeled OOD set, deterministic from
/// the seed.
SynthData generate(const LabelTree& tree, const SynthSpec& spec);

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path, DataRole role);

enum class GridMode {
  direct,       // grid points are features: zero-padded into the head's space
  through_net,  // grid points are 2-D inputs passed through the extractor
};

/// resolution x resolution map of max-ID-softmax confidence over the square
/// [lo, hi]^2; entry (i, j) is the point (x_j, y_i).
Eigen::MatrixXd toy_grid(const FeatureExtractor* net, const PrototypeSet& protos, double lo,
                         double hi, int resolution, double beta,
                         GridMode mode = GridMode::direct);

/// Confidence of a single 2-D point under the same conventions as toy_grid.
double toy_confidence(const FeatureExtractor* net, const PrototypeSet& protos,
                      const Eigen::Vector2d& point, double beta, GridMode mode);

}  // namespace pop
