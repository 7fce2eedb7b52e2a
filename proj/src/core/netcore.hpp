#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "core/prototypes.hpp"

namespace pop {

/// Fully-connected feature extractor with tanh hidden layers and a linear
/// output layer. Forward and backward passes are hand-written; all math is
/// in 64-bit floats.
struct FeatureExtractor {
  std::vector<int> layer_dims;             // [input, hidden..., output]
  std::vector<Eigen::MatrixXd> weights;    // layer l: dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;     // layer l: dims[l+1]
  std::uint64_t seed = 0;
  int epoch = 0;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t param_count() const;
};

/// Everything one forward pass produces, including the per-layer activations
/// the backward pass needs. `raw_feature` is the pre-normalization output
/// x~; `unit_feature` is x~/||x~|| (or e_1 under the degenerate guard).
struct ForwardRecord {
  std::vector<Eigen::VectorXd> activations;  // [0]=input, then post-tanh hidden outputs
  Eigen::VectorXd raw_feature;
  double feature_norm = 0.0;
  Eigen::VectorXd unit_feature;
  Eigen::VectorXd logits;  // empty when produced by forward_features
  bool degenerate = false;
};

struct ParamGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Raw-feature norms below this are treated as degenerate: unit_feature
// becomes e_1, feature_norm 0, and the normalization gradient is zeroed.
constexpr double kDegenerateNormGuard = 1e-12;

/// Deterministic init from seed: every weight ~ N(0,1)/sqrt(fan_in), biases 0.
FeatureExtractor init_params(const std::vector<int>& layer_dims, std::uint64_t seed);

/// Extractor only: activations, raw feature, norm, unit feature (no logits).
ForwardRecord forward_features(const FeatureExtractor& net, const Eigen::VectorXd& input);

/// Full pass: forward_features plus cosine logits against the fixed head.
ForwardRecord forward(const FeatureExtractor& net, const PrototypeSet& protos,
                      const Eigen::VectorXd& input);

/// dLoss/dtheta from dLoss/dlogits, chained through the head W, the
/// normalization Jacobian (I - x x^T)/||x~||, and every layer.
ParamGrads backward(const FeatureExtractor& net, const PrototypeSet& protos,
                    const ForwardRecord& record, const Eigen::VectorXd& logit_grad);

/// dLoss/dtheta from dLoss/draw_feature (skips head and normalization).
ParamGrads backward_raw(const FeatureExtractor& net, const ForwardRecord& record,
                        const Eigen::VectorXd& raw_grad);

ParamGrads zero_grads(const FeatureExtractor& net);

void save_checkpoint(const std::string& path, const FeatureExtractor& net);
FeatureExtractor load_checkpoint(const std::string& path);

}  // namespace pop
