#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "core/hierarchy.hpp"

namespace pop {

enum class RotationMode { identity, random_orthogonal };

/// Frozen classifier head: unit-norm prototype columns whose Gram matrix
/// reproduces the similarity matrix they were factored from. Columns
/// 0..num_id-1 are ID prototypes, the rest outlier proxies.
struct PrototypeSet {
  Eigen::MatrixXd weights;  // dim x (num_id + num_proxies), one prototype per column
  int num_id = 0;
  int num_proxies = 0;
  SimilarityMatrix source_similarity;

  int dim() const { return static_cast<int>(weights.rows()); }
  int num_classes() const { return num_id + num_proxies; }
};

/// W = U P^{1/2} Q^T from the symmetric eigendecomposition S = Q P Q^T.
/// Eigenvalues are sorted descending and eigenvector signs fixed, so the
/// result is reproducible bit for bit. Eigenvalues in [-1e-8, 0) are clamped
/// to zero; anything below raises a not-PSD error naming the value. U is the
/// identity unless a seeded random orthogonal rotation is requested (any
/// orthogonal U leaves the Gram matrix unchanged).
PrototypeSet factor_similarity(const SimilarityMatrix& sim,
                               RotationMode rotation = RotationMode::identity,
                               std::uint64_t rotation_seed = 0);

/// Cosine logits w_j . feature for a unit-norm feature (checked to 1e-6).
Eigen::VectorXd cosine_to(const PrototypeSet& protos, const Eigen::VectorXd& feature);

void save_prototypes(const std::string& path, const PrototypeSet& protos);

/// Reload; source_similarity is recomputed as W^T W. Validates unit columns.
PrototypeSet load_prototypes(const std::string& path);

}  // namespace pop
