#include "core/prototypes.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

#include "core/common.hpp"
#include "core/io.hpp"

namespace pop {

namespace {

constexpr double kPsdTolerance = 1e-8;
constexpr double kGramTolerance = 1e-8;

// Fix each eigenvector's sign so its component of largest magnitude (first
// such index on ties) is positive.
void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index best = 0;
    double best_mag = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      double mag = std::abs(vectors(r, c));
      if (mag > best_mag) {
        best_mag = mag;
        best = r;
      }
    }
    if (vectors(best, c) < 0.0) vectors.col(c) = -vectors.col(c);
  }
}

Eigen::MatrixXd random_orthogonal(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = gaussian(gen);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  return q;
}

}  // namespace

PrototypeSet factor_similarity(const SimilarityMatrix& sim, RotationMode rotation,
                               std::uint64_t rotation_seed) {
  const int n = sim.size();
  if (n <= 0) fail(ErrorKind::invalid_argument, "similarity matrix is empty");
  if (sim.entries.cols() != n) fail(ErrorKind::invalid_argument, "similarity matrix is not square");
  if (sim.num_id + sim.num_proxies != n)
    fail(ErrorKind::invalid_argument, "similarity metadata does not match its size");
  for (int i = 0; i < n; ++i) {
    if (std::abs(sim.entries(i, i) - 1.0) > 1e-12)
      fail(ErrorKind::invalid_argument, "similarity diagonal entry " + std::to_string(i) +
                                            " is " + format_double(sim.entries(i, i)) + ", expected 1");
    for (int j = i + 1; j < n; ++j)
      if (std::abs(sim.entries(i, j) - sim.entries(j, i)) > 1e-12)
        fail(ErrorKind::invalid_argument, "similarity matrix is not symmetric at (" +
                                              std::to_string(i) + "," + std::to_string(j) + ")");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sim.entries);
  if (solver.info() != Eigen::Success)
    fail(ErrorKind::numeric, "eigendecomposition failed to converge");

  // Eigen returns ascending order; flip to descending.
  Eigen::VectorXd values = solver.eigenvalues().reverse();
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  fix_signs(vectors);

  Eigen::VectorXd sqrt_values(n);
  for (int i = 0; i < n; ++i) {
    double v = values(i);
    if (v < -kPsdTolerance)
      fail(ErrorKind::not_psd,
           "similarity matrix is not positive semidefinite: eigenvalue " + format_double(v));
    sqrt_values(i) = std::sqrt(std::max(v, 0.0));
  }

  Eigen::MatrixXd w = sqrt_values.asDiagonal() * vectors.transpose();
  if (rotation == RotationMode::random_orthogonal)
    w = random_orthogonal(n, rotation_seed) * w;

  double gram_err = (w.transpose() * w - sim.entries).cwiseAbs().maxCoeff();
  if (gram_err > kGramTolerance)
    fail(ErrorKind::numeric,
         "factorization failed to reproduce the similarity matrix (max error " +
             format_double(gram_err) + ")");

  PrototypeSet out;
  out.weights = std::move(w);
  out.num_id = sim.num_id;
  out.num_proxies = sim.num_proxies;
  out.source_similarity = sim;
  return out;
}

Eigen::VectorXd cosine_to(const PrototypeSet& protos, const Eigen::VectorXd& feature) {
  if (feature.size() != protos.dim())
    fail(ErrorKind::invalid_argument, "feature length " + std::to_string(feature.size()) +
                                          " does not match prototype dimension " +
                                          std::to_string(protos.dim()));
  double norm = feature.norm();
  if (std::abs(norm - 1.0) > 1e-6)
    fail(ErrorKind::invalid_argument,
         "feature must be unit-norm, got norm " + format_double(norm));
  return protos.weights.transpose() * feature;
}

void save_prototypes(const std::string& path, const PrototypeSet& protos) {
  std::ostringstream os;
  os << "# " << protos.weights.rows() << " " << protos.weights.cols() << " " << protos.num_id
     << " " << protos.num_proxies << "\n";
  os << "# dim " << protos.dim() << " num_id " << protos.num_id << " num_proxies "
     << protos.num_proxies << "\n";
  for (Eigen::Index i = 0; i < protos.weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < protos.weights.cols(); ++j) {
      if (j) os << ",";
      os << format_double(protos.weights(i, j));
    }
    os << "\n";
  }
  write_file(path, os.str());
}

PrototypeSet load_prototypes(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open prototype file: " + path);
  std::string header, meta;
  if (!std::getline(in, header) || header.empty() || header[0] != '#')
    fail(ErrorKind::io, path + ": missing matrix header");
  if (!std::getline(in, meta) || meta.rfind("# dim", 0) != 0)
    fail(ErrorKind::io, path + ": missing '# dim num_id num_proxies' metadata line");
  std::istringstream hs(header.substr(1));
  long rows = 0, cols = 0;
  int num_id = 0, num_proxies = 0;
  if (!(hs >> rows >> cols >> num_id >> num_proxies) || rows <= 0 || cols <= 0)
    fail(ErrorKind::io, path + ": malformed header '" + header + "'");
  if (cols != num_id + num_proxies)
    fail(ErrorKind::io, path + ": column count does not match num_id + num_proxies");

  PrototypeSet out;
  out.weights.resize(rows, cols);
  out.num_id = num_id;
  out.num_proxies = num_proxies;
  std::string line;
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) fail(ErrorKind::io, path + ": truncated weight matrix");
    auto fields = split(line, ',');
    if (static_cast<long>(fields.size()) != cols)
      fail(ErrorKind::io, path + ": row " + std::to_string(i) + " has wrong field count");
    for (long j = 0; j < cols; ++j)
      out.weights(i, j) = parse_double(fields[j], path + " row " + std::to_string(i));
  }

  for (long j = 0; j < cols; ++j) {
    double norm = out.weights.col(j).norm();
    if (std::abs(norm - 1.0) > 1e-8)
      fail(ErrorKind::constraint, path + ": prototype column " + std::to_string(j) +
                                      " has norm " + format_double(norm) + ", expected 1");
  }

  out.source_similarity.entries = out.weights.transpose() * out.weights;
  out.source_similarity.num_id = num_id;
  out.source_similarity.num_proxies = num_proxies;
  return out;
}

}  // namespace pop
