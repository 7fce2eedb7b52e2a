#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "core/hierarchy.hpp"

namespace helpers {

inline const char* kAppendixATree = R"(root - 3
ungulate root 1
deer ungulate 0
horse ungulate 0
ship root 0
leaves: deer horse ship
)";

inline const char* kCifar10Tree = R"(root - 3
animal root 2
tools root 2
carnivore animal 1
amphibian animal 1
ungulate animal 1
vertebrate animal 1
sky tools 1
land tools 1
water tools 1
airplane sky 0
automobile land 0
bird vertebrate 0
cat carnivore 0
deer ungulate 0
dog carnivore 0
frog amphibian 0
horse ungulate 0
ship water 0
truck land 0
leaves: airplane automobile bird cat deer dog frog horse ship truck
)";

inline const char* kBenchmark5Tree = R"(root - 2
animals root 1
vehicles root 1
cat animals 0
dog animals 0
bird animals 0
car vehicles 0
truck vehicles 0
leaves: cat dog bird car truck
)";

/// Random ultrametric dendrogram plus a test-side mirror of its structure,
/// so LCA answers can be checked against an independent walk.
struct RandomTree {
  std::string text;
  std::vector<int> parent;  // node index -> parent node index, -1 at the root
  std::vector<long> height;
  std::vector<int> leaf_nodes;  // class index -> node index
};

inline RandomTree random_tree(std::mt19937_64& gen, int num_leaves) {
  RandomTree t;
  struct Cluster {
    int node;
    long height;
  };
  std::vector<Cluster> open;
  std::vector<std::string> names;
  for (int i = 0; i < num_leaves; ++i) {
    int node = static_cast<int>(names.size());
    names.push_back("l" + std::to_string(i));
    t.parent.push_back(-1);
    t.height.push_back(0);
    t.leaf_nodes.push_back(node);
    open.push_back({node, 0});
  }
  int internal = 0;
  while (open.size() > 1) {
    std::size_t a = gen() % open.size();
    std::size_t b = gen() % (open.size() - 1);
    if (b >= a) ++b;
    if (a > b) std::swap(a, b);
    int node = static_cast<int>(names.size());
    names.push_back("m" + std::to_string(internal++));
    long h = std::max(open[a].height, open[b].height) + 1 + static_cast<long>(gen() % 3);
    t.parent.push_back(-1);
    t.height.push_back(h);
    t.parent[open[a].node] = node;
    t.parent[open[b].node] = node;
    open.erase(open.begin() + b);
    open[a] = {node, h};
  }
  std::string text;
  for (std::size_t n = 0; n < names.size(); ++n) {
    text += names[n] + " " + (t.parent[n] < 0 ? "-" : names[t.parent[n]]) + " " +
            std::to_string(t.height[n]) + "\n";
  }
  text += "leaves:";
  for (int leaf : t.leaf_nodes) text += " " + names[leaf];
  text += "\n";
  t.text = std::move(text);
  return t;
}

/// Independent LCA-height oracle: intersect the ancestor chains.
inline long oracle_lca_height(const RandomTree& t, int class_a, int class_b) {
  std::vector<int> chain_a;
  for (int n = t.leaf_nodes[class_a]; n >= 0; n = t.parent[n]) chain_a.push_back(n);
  for (int n = t.leaf_nodes[class_b]; n >= 0; n = t.parent[n])
    for (int m : chain_a)
      if (m == n) return t.height[n];
  return -1;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path_ = base / ("pop_test_" + std::to_string(counter++) + "_" +
                    std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace helpers
