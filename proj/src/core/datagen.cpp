#include "core/datagen.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "core/common.hpp"
#include "core/io.hpp"

namespace pop {

std::vector<Eigen::VectorXd> hierarchy_means(const LabelTree& tree, int input_dim,
                                             double separation) {
  if (input_dim <= 0) fail(ErrorKind::invalid_argument, "input_dim must be positive");
  if (!(separation > 0.0)) fail(ErrorKind::invalid_argument, "mean separation must be positive");
  const int n = tree.num_leaves();
  DistanceMatrix dist = build_distance_matrix(tree);

  // Classical MDS: B = -1/2 J D^2 J, coordinates from the top eigenpairs.
  Eigen::MatrixXd d2 = dist.entries.cwiseProduct(dist.entries);
  Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) -
                      Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd b = -0.5 * j * d2 * j;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) fail(ErrorKind::numeric, "MDS eigendecomposition failed");
  Eigen::VectorXd values = solver.eigenvalues().reverse();
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

  std::vector<Eigen::VectorXd> means(n, Eigen::VectorXd::Zero(input_dim));
  const int rank = std::min(input_dim, n);
  for (int k = 0; k < rank; ++k) {
    if (values(k) <= 1e-12) break;
    const double scale = std::sqrt(values(k));
    for (int i = 0; i < n; ++i) means[i](k) = separation * scale * vectors(i, k);
  }

  for (int a = 0; a < n; ++a)
    for (int c = a + 1; c < n; ++c)
      if ((means[a] - means[c]).norm() < 1e-9)
        fail(ErrorKind::constraint, "derived class means for '" + tree.leaf_id(a) + "' and '" +
                                        tree.leaf_id(c) +
                                        "' coincide; increase input_dim to cover the hierarchy");
  return means;
}

namespace {

Eigen::VectorXd gaussian_vector(std::mt19937_64& gen, int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = gaussian(gen);
  return v;
}

}  // namespace

SynthData generate(const LabelTree& tree, const SynthSpec& spec) {
  const int n = tree.num_leaves();
  if (spec.input_dim <= 0) fail(ErrorKind::invalid_argument, "input_dim must be positive");
  if (spec.train_per_class < 2 || spec.test_per_class < 2)
    fail(ErrorKind::invalid_argument, "per-class sample counts must be at least 2");
  if (spec.ood_count < 1) fail(ErrorKind::invalid_argument, "ood_count must be at least 1");
  if (!(spec.stddev > 0.0)) fail(ErrorKind::invalid_argument, "stddev must be positive");
  if (spec.ood_clusters < 1) fail(ErrorKind::invalid_argument, "ood_clusters must be at least 1");
  if (!(spec.near_coeff > 0.0 && spec.near_coeff < 1.0))
    fail(ErrorKind::invalid_argument, "near_coeff must lie in (0, 1)");

  SynthData out;
  if (spec.means.empty()) {
    out.means = hierarchy_means(tree, spec.input_dim, spec.mean_separation);
  } else {
    if (static_cast<int>(spec.means.size()) != n)
      fail(ErrorKind::invalid_argument, "explicit means must supply one vector per leaf");
    for (const auto& m : spec.means)
      if (m.size() != spec.input_dim)
        fail(ErrorKind::invalid_argument, "explicit mean dimension does not match input_dim");
    for (int a = 0; a < n; ++a)
      for (int c = a + 1; c < n; ++c)
        if ((spec.means[a] - spec.means[c]).norm() == 0.0)
          fail(ErrorKind::invalid_argument, "explicit class means must be pairwise distinct");
    out.means = spec.means;
  }

  std::mt19937_64 gen(spec.seed);
  auto fill_id = [&](Dataset& ds, DataRole role, int per_class) {
    ds.role = role;
    for (int c = 0; c < n; ++c)
      for (int s = 0; s < per_class; ++s) {
        ds.inputs.push_back(out.means[c] + spec.stddev * gaussian_vector(gen, spec.input_dim));
        ds.labels.push_back(c);
      }
  };
  fill_id(out.train, DataRole::id_train, spec.train_per_class);
  fill_id(out.test, DataRole::id_test, spec.test_per_class);

  std::vector<Eigen::VectorXd> ood_centers;
  if (spec.ood_mode == OodMode::far) {
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(spec.input_dim);
    for (const auto& m : out.means) centroid += m;
    centroid /= static_cast<double>(n);
    double spread = 0.0;
    for (const auto& m : out.means) spread = std::max(spread, (m - centroid).norm());
    const double radius = spec.far_radius_scale * std::max(spread, spec.stddev);
    for (int k = 0; k < spec.ood_clusters; ++k) {
      Eigen::VectorXd dir = gaussian_vector(gen, spec.input_dim);
      double norm = dir.norm();
      if (norm < 1e-12) dir = Eigen::VectorXd::Unit(spec.input_dim, 0), norm = 1.0;
      ood_centers.push_back(centroid + radius * dir / norm);
    }
  } else {
    // Nearest pair of ID means, lowest indices on ties.
    int best_a = 0, best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        double d = (out.means[a] - out.means[b]).norm();
        if (d < best) best = d, best_a = a, best_b = b;
      }
    if (n < 2) fail(ErrorKind::invalid_argument, "near-OOD mode needs at least two ID classes");
    ood_centers.push_back((1.0 - spec.near_coeff) * out.means[best_a] +
                          spec.near_coeff * out.means[best_b]);
  }

  out.ood.role = DataRole::ood;
  for (int s = 0; s < spec.ood_count; ++s) {
    const Eigen::VectorXd& center = ood_centers[s % ood_centers.size()];
    out.ood.inputs.push_back(center + spec.stddev * gaussian_vector(gen, spec.input_dim));
    out.ood.labels.push_back(-1);
  }
  return out;
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ostringstream os;
  for (int i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.inputs[i].size(); ++j) os << format_double(data.inputs[i](j)) << ",";
    os << data.labels[i] << "\n";
  }
  write_file(path, os.str());
}

Dataset load_dataset(const std::string& path, DataRole role) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open dataset: " + path);
  Dataset out;
  out.role = role;
  std::string line;
  int lineno = 0;
  int dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() < 2)
      fail(ErrorKind::io, path + ": line " + std::to_string(lineno) + " needs features and a label");
    const int d = static_cast<int>(fields.size()) - 1;
    if (dim < 0)
      dim = d;
    else if (d != dim)
      fail(ErrorKind::io, path + ": line " + std::to_string(lineno) + " has " + std::to_string(d) +
                              " features, expected " + std::to_string(dim));
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j)
      x(j) = parse_double(fields[j], path + " line " + std::to_string(lineno));
    const int label =
        static_cast<int>(parse_long(fields.back(), path + " line " + std::to_string(lineno)));
    if (role == DataRole::ood && label != -1)
      fail(ErrorKind::io, path + ": line " + std::to_string(lineno) + " carries label " +
                              std::to_string(label) + " in an OOD set");
    if (role != DataRole::ood && label < 0)
      fail(ErrorKind::io, path + ": line " + std::to_string(lineno) + " lacks an ID label");
    out.inputs.push_back(std::move(x));
    out.labels.push_back(label);
  }
  if (out.inputs.empty()) fail(ErrorKind::io, path + ": dataset is empty");
  return out;
}

namespace {

double max_id_softmax(const Eigen::VectorXd& logits, int num_id, double beta) {
  Eigen::VectorXd scaled = beta * logits;
  double shift = scaled.maxCoeff();
  Eigen::VectorXd expd = (scaled.array() - shift).exp();
  return expd.head(num_id).maxCoeff() / expd.sum();
}

}  // namespace

double toy_confidence(const FeatureExtractor* net, const PrototypeSet& protos,
                      const Eigen::Vector2d& point, double beta, GridMode mode) {
  if (!(beta > 0.0)) fail(ErrorKind::invalid_argument, "beta must be positive");
  Eigen::VectorXd logits;
  if (mode == GridMode::direct) {
    // The grid plane is the span of the head's first two coordinate axes
    // (the top two spectral axes when U is the identity).
    Eigen::VectorXd feat = Eigen::VectorXd::Zero(protos.dim());
    if (protos.dim() < 2)
      fail(ErrorKind::invalid_argument, "direct grid mode needs a head of dimension >= 2");
    feat(0) = point(0);
    feat(1) = point(1);
    double norm = feat.norm();
    if (norm < kDegenerateNormGuard)
      logits = Eigen::VectorXd::Zero(protos.num_classes());
    else
      logits = protos.weights.transpose() * (feat / norm);
  } else {
    if (net == nullptr) fail(ErrorKind::invalid_argument, "through-net grid mode needs a net");
    if (net->input_dim() != 2)
      fail(ErrorKind::invalid_argument, "toy grids need a net with input dimension 2");
    logits = forward(*net, protos, point).logits;
  }
  return max_id_softmax(logits, protos.num_id, beta);
}

Eigen::MatrixXd toy_grid(const FeatureExtractor* net, const PrototypeSet& protos, double lo,
                         double hi, int resolution, double beta, GridMode mode) {
  if (resolution < 2) fail(ErrorKind::invalid_argument, "grid resolution must be at least 2");
  if (!(hi > lo)) fail(ErrorKind::invalid_argument, "grid bounds must satisfy hi > lo");
  Eigen::MatrixXd grid(resolution, resolution);
  const double step = (hi - lo) / static_cast<double>(resolution - 1);
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      Eigen::Vector2d p(lo + step * j, lo + step * i);
      grid(i, j) = toy_confidence(net, protos, p, beta, mode);
    }
  return grid;
}

}  // namespace pop
