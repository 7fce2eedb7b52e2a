#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace pop {

/// Weighted label hierarchy. Leaves carry the class indices; the distance
/// between two classes is the height of their lowest common ancestor.
///
/// Text format, one node per line (`id parent height`, root parent `-`),
/// terminated by an ordered leaf list fixing the class order:
///
///     root - 3
///     ungulate root 1
///     deer ungulate 0
///     horse ungulate 0
///     ship root 0
///     leaves: deer horse ship
class LabelTree {
 public:
  struct Node {
    std::string id;
    int parent = -1;  // node index, -1 for the root
    long height = 0;
    std::vector<int> children;
  };

  static LabelTree parse(const std::string& text);
  static LabelTree load_file(const std::string& path);

  int num_leaves() const { return static_cast<int>(leaves_.size()); }

  /// H(LCA(leaf_a, leaf_b)); 0 iff class_a == class_b.
  long lca_distance(int class_a, int class_b) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::string& leaf_id(int class_index) const;

 private:
  std::vector<Node> nodes_;
  std::vector<int> leaves_;  // node index per class index
  void validate() const;
  int leaf_node(int class_index) const;
};

/// Pairwise class distances; square block of ID classes optionally augmented
/// with outlier-proxy rows/columns at a fixed distance.
struct DistanceMatrix {
  Eigen::MatrixXd entries;
  int num_id = 0;
  int num_proxies = 0;
  double d_max = 0.0;  // max entry of the ID block
  std::optional<double> proxy_distance;

  int size() const { return static_cast<int>(entries.rows()); }
};

/// Entrywise φ image of a DistanceMatrix; symmetric with unit diagonal.
struct SimilarityMatrix {
  Eigen::MatrixXd entries;
  int num_id = 0;
  int num_proxies = 0;

  int size() const { return static_cast<int>(entries.rows()); }
};

DistanceMatrix build_distance_matrix(const LabelTree& tree);

/// Appends `num_proxies` rows/columns at `proxy_distance` from everything.
/// Requires an unaugmented matrix and proxy_distance strictly above d_max.
DistanceMatrix augment_with_proxies(const DistanceMatrix& dist, int num_proxies,
                                    double proxy_distance);

/// φ(d) = 1 / (d + 1), applied entrywise.
double similarity_phi(double distance);
SimilarityMatrix distance_to_similarity(const DistanceMatrix& dist);

void save_distance_matrix(const std::string& path, const DistanceMatrix& dist);
void save_similarity_matrix(const std::string& path, const SimilarityMatrix& sim);

}  // namespace pop
