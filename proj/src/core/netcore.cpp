#include "core/netcore.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "core/common.hpp"
#include "core/io.hpp"

namespace pop {

std::size_t FeatureExtractor::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l < num_layers(); ++l)
    n += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
  return n;
}

FeatureExtractor init_params(const std::vector<int>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2)
    fail(ErrorKind::invalid_argument, "layer_dims needs at least an input and an output dimension");
  for (int d : layer_dims)
    if (d <= 0) fail(ErrorKind::invalid_argument, "layer dimensions must be positive");

  FeatureExtractor net;
  net.layer_dims = layer_dims;
  net.seed = seed;
  std::mt19937_64 gen(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    Eigen::MatrixXd w(fan_out, fan_in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) w(i, j) = scale * gaussian(gen);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

ForwardRecord forward_features(const FeatureExtractor& net, const Eigen::VectorXd& input) {
  if (input.size() != net.input_dim())
    fail(ErrorKind::invalid_argument, "input length " + std::to_string(input.size()) +
                                          " does not match net input dimension " +
                                          std::to_string(net.input_dim()));
  ForwardRecord rec;
  rec.activations.reserve(net.num_layers());
  rec.activations.push_back(input);
  Eigen::VectorXd a = input;
  const int layers = net.num_layers();
  for (int l = 0; l < layers; ++l) {
    Eigen::VectorXd z = net.weights[l] * a + net.biases[l];
    if (l + 1 < layers) {
      a = z.array().tanh();
      rec.activations.push_back(a);
    } else {
      rec.raw_feature = std::move(z);
    }
  }
  rec.feature_norm = rec.raw_feature.norm();
  if (rec.feature_norm < kDegenerateNormGuard) {
    rec.degenerate = true;
    rec.feature_norm = 0.0;
    rec.unit_feature = Eigen::VectorXd::Zero(rec.raw_feature.size());
    rec.unit_feature(0) = 1.0;
  } else {
    rec.unit_feature = rec.raw_feature / rec.feature_norm;
  }
  return rec;
}

ForwardRecord forward(const FeatureExtractor& net, const PrototypeSet& protos,
                      const Eigen::VectorXd& input) {
  if (net.output_dim() != protos.dim())
    fail(ErrorKind::invalid_argument, "net output dimension " + std::to_string(net.output_dim()) +
                                          " does not match prototype dimension " +
                                          std::to_string(protos.dim()));
  ForwardRecord rec = forward_features(net, input);
  rec.logits = protos.weights.transpose() * rec.unit_feature;
  return rec;
}

ParamGrads zero_grads(const FeatureExtractor& net) {
  ParamGrads g;
  for (int l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

ParamGrads backward_raw(const FeatureExtractor& net, const ForwardRecord& record,
                        const Eigen::VectorXd& raw_grad) {
  const int layers = net.num_layers();
  if (static_cast<int>(record.activations.size()) != layers)
    fail(ErrorKind::invalid_argument, "forward record does not match this net");
  if (raw_grad.size() != net.output_dim())
    fail(ErrorKind::invalid_argument, "raw gradient length does not match net output");
  for (int l = 0; l < layers; ++l)
    if (record.activations[l].size() != net.layer_dims[l])
      fail(ErrorKind::invalid_argument, "forward record does not match this net");

  ParamGrads grads = zero_grads(net);
  Eigen::VectorXd gz = raw_grad;  // gradient wrt the linear output of layer l
  for (int l = layers - 1; l >= 0; --l) {
    grads.weights[l] = gz * record.activations[l].transpose();
    grads.biases[l] = gz;
    if (l > 0) {
      Eigen::VectorXd ga = net.weights[l].transpose() * gz;
      // tanh'(z) = 1 - a^2 with a the stored post-activation
      gz = ga.cwiseProduct(
          (1.0 - record.activations[l].array().square()).matrix());
    }
  }
  return grads;
}

ParamGrads backward(const FeatureExtractor& net, const PrototypeSet& protos,
                    const ForwardRecord& record, const Eigen::VectorXd& logit_grad) {
  if (logit_grad.size() != protos.num_classes())
    fail(ErrorKind::invalid_argument, "logit gradient length " + std::to_string(logit_grad.size()) +
                                          " does not match class count " +
                                          std::to_string(protos.num_classes()));
  if (record.unit_feature.size() != protos.dim())
    fail(ErrorKind::invalid_argument, "forward record does not match these prototypes");

  Eigen::VectorXd g_unit = protos.weights * logit_grad;
  Eigen::VectorXd g_raw;
  if (record.degenerate) {
    g_raw = Eigen::VectorXd::Zero(record.raw_feature.size());
  } else {
    // (I - x x^T) / ||x~|| applied to g_unit
    g_raw = (g_unit - record.unit_feature * (record.unit_feature.dot(g_unit))) /
            record.feature_norm;
  }
  return backward_raw(net, record, g_raw);
}

void save_checkpoint(const std::string& path, const FeatureExtractor& net) {
  std::ostringstream os;
  os << "pop-net v1\n";
  os << "layer_dims";
  for (int d : net.layer_dims) os << "," << d;
  os << "\n";
  os << "seed," << net.seed << "\n";
  os << "epoch," << net.epoch << "\n";
  for (int l = 0; l < net.num_layers(); ++l) {
    os << "W" << l << "," << net.weights[l].rows() << "," << net.weights[l].cols() << "\n";
    for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < net.weights[l].cols(); ++j) {
        if (j) os << ",";
        os << format_double(net.weights[l](i, j));
      }
      os << "\n";
    }
    os << "b" << l << "," << net.biases[l].size() << "\n";
    for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) {
      if (i) os << ",";
      os << format_double(net.biases[l](i));
    }
    os << "\n";
  }
  write_file(path, os.str());
}

FeatureExtractor load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "pop-net v1")
    fail(ErrorKind::io, path + ": not a pop-net v1 checkpoint");

  auto next_fields = [&](const std::string& what) {
    if (!std::getline(in, line)) fail(ErrorKind::io, path + ": truncated before " + what);
    return split(line, ',');
  };

  FeatureExtractor net;
  auto dims = next_fields("layer_dims");
  if (dims.empty() || dims[0] != "layer_dims" || dims.size() < 3)
    fail(ErrorKind::io, path + ": malformed layer_dims line");
  for (std::size_t i = 1; i < dims.size(); ++i)
    net.layer_dims.push_back(static_cast<int>(parse_long(dims[i], path + " layer_dims")));

  auto seed_fields = next_fields("seed");
  if (seed_fields.size() != 2 || seed_fields[0] != "seed")
    fail(ErrorKind::io, path + ": malformed seed line");
  net.seed = static_cast<std::uint64_t>(std::strtoull(seed_fields[1].c_str(), nullptr, 10));

  auto epoch_fields = next_fields("epoch");
  if (epoch_fields.size() != 2 || epoch_fields[0] != "epoch")
    fail(ErrorKind::io, path + ": malformed epoch line");
  net.epoch = static_cast<int>(parse_long(epoch_fields[1], path + " epoch"));

  for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
    auto wh = next_fields("W" + std::to_string(l));
    if (wh.size() != 3 || wh[0] != "W" + std::to_string(l))
      fail(ErrorKind::io, path + ": malformed weight block header for layer " + std::to_string(l));
    long rows = parse_long(wh[1], path), cols = parse_long(wh[2], path);
    if (rows != net.layer_dims[l + 1] || cols != net.layer_dims[l])
      fail(ErrorKind::io, path + ": weight shape disagrees with layer_dims at layer " +
                              std::to_string(l));
    Eigen::MatrixXd w(rows, cols);
    for (long i = 0; i < rows; ++i) {
      auto row = next_fields("weight row");
      if (static_cast<long>(row.size()) != cols)
        fail(ErrorKind::io, path + ": bad weight row width at layer " + std::to_string(l));
      for (long j = 0; j < cols; ++j) w(i, j) = parse_double(row[j], path);
    }
    net.weights.push_back(std::move(w));

    auto bh = next_fields("b" + std::to_string(l));
    if (bh.size() != 2 || bh[0] != "b" + std::to_string(l) || parse_long(bh[1], path) != rows)
      fail(ErrorKind::io, path + ": malformed bias block header for layer " + std::to_string(l));
    auto brow = next_fields("bias row");
    if (static_cast<long>(brow.size()) != rows)
      fail(ErrorKind::io, path + ": bad bias row width at layer " + std::to_string(l));
    Eigen::VectorXd b(rows);
    for (long i = 0; i < rows; ++i) b(i) = parse_double(brow[i], path);
    net.biases.push_back(std::move(b));
  }
  return net;
}

}  // namespace pop
