#include "core/hierarchy.hpp"

#include <algorithm>
#include <sstream>

#include "core/common.hpp"
#include "core/io.hpp"

namespace pop {

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

}  // namespace

LabelTree LabelTree::parse(const std::string& text) {
  LabelTree tree;
  std::unordered_map<std::string, int> index;
  std::vector<std::pair<std::string, std::string>> parent_of;  // (id, parent-id)
  std::vector<std::string> leaf_ids;

  std::istringstream is(text);
  std::string raw;
  bool saw_leaves = false;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("leaves:", 0) == 0) {
      if (saw_leaves) fail(ErrorKind::io, "line " + std::to_string(lineno) + ": duplicate leaves block");
      saw_leaves = true;
      leaf_ids = tokens(line.substr(7));
      continue;
    }
    if (saw_leaves)
      fail(ErrorKind::io, "line " + std::to_string(lineno) + ": node lines after the leaves block");
    auto t = tokens(line);
    if (t.size() != 3)
      fail(ErrorKind::io, "line " + std::to_string(lineno) + ": expected 'id parent height', got '" + line + "'");
    const std::string& id = t[0];
    if (index.count(id)) fail(ErrorKind::invalid_argument, "duplicate node id '" + id + "'");
    long height = parse_long(t[2], "height of node '" + id + "'");
    if (height < 0) fail(ErrorKind::io, "node '" + id + "' has negative height");
    index[id] = static_cast<int>(tree.nodes_.size());
    Node node;
    node.id = id;
    node.height = height;
    tree.nodes_.push_back(std::move(node));
    parent_of.emplace_back(id, t[1]);
  }

  if (tree.nodes_.empty()) fail(ErrorKind::io, "tree has no nodes");
  if (!saw_leaves || leaf_ids.empty()) fail(ErrorKind::io, "missing or empty 'leaves:' block");

  int root = -1;
  for (auto& [id, parent] : parent_of) {
    int ni = index.at(id);
    if (parent == "-") {
      if (root >= 0)
        fail(ErrorKind::invalid_argument, "multiple roots: '" + tree.nodes_[root].id + "' and '" + id + "'");
      root = ni;
      continue;
    }
    auto it = index.find(parent);
    if (it == index.end()) fail(ErrorKind::invalid_argument, "node '" + id + "' names unknown parent '" + parent + "'");
    tree.nodes_[ni].parent = it->second;
    tree.nodes_[it->second].children.push_back(ni);
  }
  if (root < 0) fail(ErrorKind::invalid_argument, "no root node (parent '-')");

  for (const std::string& id : leaf_ids) {
    auto it = index.find(id);
    if (it == index.end()) fail(ErrorKind::invalid_argument, "leaves block names unknown node '" + id + "'");
    if (std::find(tree.leaves_.begin(), tree.leaves_.end(), it->second) != tree.leaves_.end())
      fail(ErrorKind::invalid_argument, "leaves block repeats '" + id + "'");
    tree.leaves_.push_back(it->second);
  }

  tree.validate();
  return tree;
}

LabelTree LabelTree::load_file(const std::string& path) {
  try {
    return parse(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

void LabelTree::validate() const {
  // Reachability from the root doubles as the cycle check: every node names one
  // parent, so visited-count == node-count rules out any cycle.
  int root = -1;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].parent < 0) root = static_cast<int>(i);
  std::vector<int> stack{root};
  std::size_t visited = 0;
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    ++visited;
    for (int c : nodes_[n].children) {
      if (nodes_[c].height >= nodes_[n].height)
        fail(ErrorKind::invalid_argument, "node '" + nodes_[n].id + "' (height " + std::to_string(nodes_[n].height) +
                                ") must be strictly higher than child '" + nodes_[c].id + "' (height " +
                                std::to_string(nodes_[c].height) + ")");
      stack.push_back(c);
    }
  }
  if (visited != nodes_.size())
    fail(ErrorKind::invalid_argument, "tree is not connected (cycle or orphan subtree)");

  for (const Node& n : nodes_)
    if (n.children.empty() && n.height != 0)
      fail(ErrorKind::invalid_argument, "leaf node '" + n.id + "' must have height 0, has " + std::to_string(n.height));
  for (int leaf : leaves_)
    if (!nodes_[leaf].children.empty())
      fail(ErrorKind::invalid_argument, "leaves block entry '" + nodes_[leaf].id + "' is not a leaf");
}

int LabelTree::leaf_node(int class_index) const {
  if (class_index < 0 || class_index >= num_leaves())
    fail(ErrorKind::invalid_argument, "invalid class index " + std::to_string(class_index) +
                                          " (tree has " + std::to_string(num_leaves()) + " classes)");
  return leaves_[class_index];
}

const std::string& LabelTree::leaf_id(int class_index) const {
  return nodes_[leaf_node(class_index)].id;
}

long LabelTree::lca_distance(int class_a, int class_b) const {
  int a = leaf_node(class_a);
  int b = leaf_node(class_b);
  if (a == b) return 0;
  std::vector<bool> on_path(nodes_.size(), false);
  for (int n = a; n >= 0; n = nodes_[n].parent) on_path[n] = true;
  for (int n = b; n >= 0; n = nodes_[n].parent)
    if (on_path[n]) return nodes_[n].height;
  fail(ErrorKind::numeric, "no common ancestor found (corrupt tree)");
}

DistanceMatrix build_distance_matrix(const LabelTree& tree) {
  const int n = tree.num_leaves();
  DistanceMatrix out;
  out.entries = Eigen::MatrixXd::Zero(n, n);
  out.num_id = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double d = static_cast<double>(tree.lca_distance(i, j));
      out.entries(i, j) = d;
      out.entries(j, i) = d;
      out.d_max = std::max(out.d_max, d);
    }
  return out;
}

DistanceMatrix augment_with_proxies(const DistanceMatrix& dist, int num_proxies,
                                    double proxy_distance) {
  if (dist.num_proxies != 0)
    fail(ErrorKind::invalid_argument, "distance matrix is already augmented with proxies");
  if (num_proxies <= 0)
    fail(ErrorKind::invalid_argument, "num_proxies must be positive, got " + std::to_string(num_proxies));
  if (!(proxy_distance > dist.d_max))
    fail(ErrorKind::constraint, "proxy distance " + format_double(proxy_distance) +
                                    " must be strictly greater than d_max = " + format_double(dist.d_max));

  const int n = dist.size();
  const int m = n + num_proxies;
  DistanceMatrix out;
  out.entries = Eigen::MatrixXd::Constant(m, m, proxy_distance);
  out.entries.topLeftCorner(n, n) = dist.entries;
  for (int i = n; i < m; ++i) out.entries(i, i) = 0.0;
  out.num_id = dist.num_id;
  out.num_proxies = num_proxies;
  out.d_max = dist.d_max;
  out.proxy_distance = proxy_distance;
  return out;
}

double similarity_phi(double distance) { return 1.0 / (distance + 1.0); }

SimilarityMatrix distance_to_similarity(const DistanceMatrix& dist) {
  SimilarityMatrix out;
  out.entries = dist.entries.unaryExpr([](double d) { return similarity_phi(d); });
  out.num_id = dist.num_id;
  out.num_proxies = dist.num_proxies;
  return out;
}

void save_distance_matrix(const std::string& path, const DistanceMatrix& dist) {
  save_matrix_csv(path, dist.entries, dist.num_id, dist.num_proxies);
}

void save_similarity_matrix(const std::string& path, const SimilarityMatrix& sim) {
  save_matrix_csv(path, sim.entries, sim.num_id, sim.num_proxies);
}

}  // namespace pop
