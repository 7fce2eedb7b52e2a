// pop command-line front end: prototype building, synthetic data generation,
// training, OOD evaluation and the 2-D toy experiment, all through the C API
// in pop/pop.h. Runs are reproducible: flags override config-file values and
// the fully-resolved configuration is written next to the outputs. The only
// timestamps live in the run.log sidecar.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pop/pop.h"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Exit codes: 0 success, 2 config/validation, 3 numerical failure, 4 I/O.
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

int exit_code_for(pop_status status) {
  switch (status) {
    case POP_OK: return 0;
    case POP_ERR_INVALID_ARGUMENT:
    case POP_ERR_CONSTRAINT:
    case POP_ERR_INSUFFICIENT_DATA: return kExitValidation;
    case POP_ERR_NOT_PSD:
    case POP_ERR_NUMERIC:
    case POP_ERR_INTERNAL: return kExitNumeric;
    case POP_ERR_IO: return kExitIo;
  }
  return kExitNumeric;
}

struct CliError {
  int code;
  std::string message;
};

void check(pop_status status, const std::string& what) {
  if (status != POP_OK)
    throw CliError{exit_code_for(status), what + ": " + pop_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  explicit Handle(T* p) : ptr(p) {}
  ~Handle() { reset(); }
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& other) noexcept : ptr(other.ptr) { other.ptr = nullptr; }
  Handle& operator=(Handle&& other) noexcept {
    if (this != &other) {
      reset(other.ptr);
      other.ptr = nullptr;
    }
    return *this;
  }
  void reset(T* p = nullptr) {
    if (ptr) Free(ptr);
    ptr = p;
  }
  T** out() {
    reset();
    return &ptr;
  }
  T* get() const { return ptr; }
};

using TreeHandle = Handle<pop_tree, pop_tree_free>;
using ProtosHandle = Handle<pop_protos, pop_protos_free>;
using NetHandle = Handle<pop_net, pop_net_free>;
using DatasetHandle = Handle<pop_dataset, pop_dataset_free>;
using TrainlogHandle = Handle<pop_trainlog, pop_trainlog_free>;
using EvalHandle = Handle<pop_evalrun, pop_evalrun_free>;
using ToyHandle = Handle<pop_toy, pop_toy_free>;

// Every accepted configuration key, with the defaults resolved per run.
struct Config {
  std::string tree_file;
  std::string out_dir;
  std::uint64_t seed = 1;

  int proxies = 2;
  double distance = 3.0;
  std::string rotation = "identity";  // identity | random
  std::uint64_t rotation_seed = 0;
  std::string protos_file;

  int input_dim = 4;
  int train_per_class = 200;
  int test_per_class = 100;
  int ood_count = 500;
  double stddev = 0.35;
  double mean_separation = 2.0;
  std::string ood_mode = "far";  // far | near
  double near_coeff = 0.5;
  int ood_clusters = 8;
  double far_radius_scale = 3.0;

  std::vector<int> hidden_dims = {32};
  int epochs = 100;
  int batch_size = 32;
  double lr0 = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::string schedule = "cosine";  // cosine | constant
  double beta = 0.0;                // 0 resolves to the class-count default
  std::string loss = "hsbl";        // hsbl | cosine-ce
  std::string denominator = "exclude-true";  // exclude-true | all
  std::string argmax_domain = "id";          // id | all
  bool shuffle = true;
  int checkpoint_every = 0;

  std::string train_file;
  std::string test_file;
  std::string ood_file;
  std::string net_file;

  double temperature = 1.0;
  bool pop_id_only = false;

  int toy_hidden = 16;
  int toy_proxies = 1;
  double toy_distance = 4.0;
  double grid_lo = -3.0;
  double grid_hi = 3.0;
  int resolution = 61;
  std::string grid_mode = "net";  // net | direct
};

Config toy_profile() {
  // The toy experiment ships its own training protocol and pinned seed.
  Config cfg;
  cfg.seed = 13;
  cfg.epochs = 30;
  cfg.lr0 = 0.1;
  cfg.weight_decay = 5e-4;
  cfg.beta = 10.0;
  return cfg;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "version",        "tree_file",        "out_dir",        "seed",
      "proxies",        "distance",         "rotation",       "rotation_seed",
      "protos_file",    "input_dim",        "train_per_class", "test_per_class",
      "ood_count",      "stddev",           "mean_separation", "ood_mode",
      "near_coeff",     "ood_clusters",     "far_radius_scale", "hidden_dims",
      "epochs",         "batch_size",       "lr0",            "momentum",
      "weight_decay",   "schedule",         "beta",           "loss",
      "denominator",    "argmax_domain",    "shuffle",        "checkpoint_every",
      "train_file",     "test_file",        "ood_file",       "net_file",
      "temperature",    "pop_id_only",      "toy_hidden",     "toy_proxies",
      "toy_distance",   "grid_lo",          "grid_hi",        "resolution",
      "grid_mode",
  };
  return keys;
}

void apply_config_file(Config& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError{kExitIo, "cannot open config file: " + path};
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw CliError{kExitValidation, path + ": invalid JSON: " + e.what()};
  }
  if (!doc.is_object()) throw CliError{kExitValidation, path + ": config must be a JSON object"};
  if (!doc.contains("version"))
    throw CliError{kExitValidation, path + ": missing required 'version' field"};

  const auto& keys = known_keys();
  for (const auto& [key, value] : doc.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw CliError{kExitValidation, path + ": unknown config key '" + key + "'"};
    (void)value;
  }

  try {
    if (doc.at("version").get<int>() != 1)
      throw CliError{kExitValidation, path + ": unsupported config version"};
    auto get = [&doc](const char* key, auto& field) {
      if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("tree_file", cfg.tree_file);
    get("out_dir", cfg.out_dir);
    get("seed", cfg.seed);
    get("proxies", cfg.proxies);
    get("distance", cfg.distance);
    get("rotation", cfg.rotation);
    get("rotation_seed", cfg.rotation_seed);
    get("protos_file", cfg.protos_file);
    get("input_dim", cfg.input_dim);
    get("train_per_class", cfg.train_per_class);
    get("test_per_class", cfg.test_per_class);
    get("ood_count", cfg.ood_count);
    get("stddev", cfg.stddev);
    get("mean_separation", cfg.mean_separation);
    get("ood_mode", cfg.ood_mode);
    get("near_coeff", cfg.near_coeff);
    get("ood_clusters", cfg.ood_clusters);
    get("far_radius_scale", cfg.far_radius_scale);
    get("hidden_dims", cfg.hidden_dims);
    get("epochs", cfg.epochs);
    get("batch_size", cfg.batch_size);
    get("lr0", cfg.lr0);
    get("momentum", cfg.momentum);
    get("weight_decay", cfg.weight_decay);
    get("schedule", cfg.schedule);
    get("beta", cfg.beta);
    get("loss", cfg.loss);
    get("denominator", cfg.denominator);
    get("argmax_domain", cfg.argmax_domain);
    get("shuffle", cfg.shuffle);
    get("checkpoint_every", cfg.checkpoint_every);
    get("train_file", cfg.train_file);
    get("test_file", cfg.test_file);
    get("ood_file", cfg.ood_file);
    get("net_file", cfg.net_file);
    get("temperature", cfg.temperature);
    get("pop_id_only", cfg.pop_id_only);
    get("toy_hidden", cfg.toy_hidden);
    get("toy_proxies", cfg.toy_proxies);
    get("toy_distance", cfg.toy_distance);
    get("grid_lo", cfg.grid_lo);
    get("grid_hi", cfg.grid_hi);
    get("resolution", cfg.resolution);
    get("grid_mode", cfg.grid_mode);
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& e) {
    throw CliError{kExitValidation, path + ": bad config value: " + e.what()};
  }
}

ordered_json resolved_json(const Config& cfg, const std::string& command) {
  ordered_json j;
  j["version"] = 1;
  j["command"] = command;
  j["tree_file"] = cfg.tree_file;
  j["out_dir"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  j["proxies"] = cfg.proxies;
  j["distance"] = cfg.distance;
  j["rotation"] = cfg.rotation;
  j["rotation_seed"] = cfg.rotation_seed;
  j["protos_file"] = cfg.protos_file;
  j["input_dim"] = cfg.input_dim;
  j["train_per_class"] = cfg.train_per_class;
  j["test_per_class"] = cfg.test_per_class;
  j["ood_count"] = cfg.ood_count;
  j["stddev"] = cfg.stddev;
  j["mean_separation"] = cfg.mean_separation;
  j["ood_mode"] = cfg.ood_mode;
  j["near_coeff"] = cfg.near_coeff;
  j["ood_clusters"] = cfg.ood_clusters;
  j["far_radius_scale"] = cfg.far_radius_scale;
  j["hidden_dims"] = cfg.hidden_dims;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr0"] = cfg.lr0;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["schedule"] = cfg.schedule;
  j["beta"] = cfg.beta;
  j["loss"] = cfg.loss;
  j["denominator"] = cfg.denominator;
  j["argmax_domain"] = cfg.argmax_domain;
  j["shuffle"] = cfg.shuffle;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["train_file"] = cfg.train_file;
  j["test_file"] = cfg.test_file;
  j["ood_file"] = cfg.ood_file;
  j["net_file"] = cfg.net_file;
  j["temperature"] = cfg.temperature;
  j["pop_id_only"] = cfg.pop_id_only;
  j["toy_hidden"] = cfg.toy_hidden;
  j["toy_proxies"] = cfg.toy_proxies;
  j["toy_distance"] = cfg.toy_distance;
  j["grid_lo"] = cfg.grid_lo;
  j["grid_hi"] = cfg.grid_hi;
  j["resolution"] = cfg.resolution;
  j["grid_mode"] = cfg.grid_mode;
  return j;
}

struct RunDir {
  fs::path dir;
  explicit RunDir(const Config& cfg, const std::string& command) : dir(cfg.out_dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw CliError{kExitIo, "cannot create output directory " + dir.string()};
    std::ofstream out(dir / "resolved.json");
    out << resolved_json(cfg, command).dump(2) << "\n";
    if (!out) throw CliError{kExitIo, "cannot write resolved config"};
  }
  std::string file(const std::string& name) const { return (dir / name).string(); }
  void log(const std::string& message) const {
    std::ofstream out(dir / "run.log", std::ios::app);
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    out << stamp << "Z " << message << "\n";
  }
};

void validate_enums(const Config& cfg) {
  auto one_of = [](const std::string& v, std::initializer_list<const char*> allowed,
                   const char* what) {
    for (const char* a : allowed)
      if (v == a) return;
    throw CliError{kExitValidation, std::string("invalid ") + what + " '" + v + "'"};
  };
  one_of(cfg.rotation, {"identity", "random"}, "rotation");
  one_of(cfg.ood_mode, {"far", "near"}, "ood_mode");
  one_of(cfg.schedule, {"cosine", "constant"}, "schedule");
  one_of(cfg.loss, {"hsbl", "cosine-ce"}, "loss");
  one_of(cfg.denominator, {"exclude-true", "all"}, "denominator");
  one_of(cfg.argmax_domain, {"id", "all"}, "argmax_domain");
  one_of(cfg.grid_mode, {"net", "direct"}, "grid_mode");
}

pop_synth_options synth_options(const Config& cfg) {
  pop_synth_options opt;
  check(pop_synth_options_default(&opt), "synth defaults");
  opt.input_dim = cfg.input_dim;
  opt.train_per_class = cfg.train_per_class;
  opt.test_per_class = cfg.test_per_class;
  opt.ood_count = cfg.ood_count;
  opt.stddev = cfg.stddev;
  opt.mean_separation = cfg.mean_separation;
  opt.seed = cfg.seed;
  opt.ood_far = cfg.ood_mode == "far" ? 1 : 0;
  opt.near_coeff = cfg.near_coeff;
  opt.ood_clusters = cfg.ood_clusters;
  opt.far_radius_scale = cfg.far_radius_scale;
  return opt;
}

double resolve_beta(const Config& cfg, const pop_protos* protos) {
  if (cfg.beta > 0.0) return cfg.beta;
  int num_id = 0;
  check(pop_protos_info(protos, nullptr, &num_id, nullptr), "prototype info");
  double beta = 0.0;
  check(pop_default_beta(num_id, &beta), "default beta");
  return beta;
}

pop_train_options train_options(const Config& cfg, double beta, const std::string& ckpt_prefix) {
  pop_train_options opt;
  check(pop_train_options_default(&opt), "train defaults");
  opt.epochs = cfg.epochs;
  opt.batch_size = cfg.batch_size;
  opt.lr0 = cfg.lr0;
  opt.momentum = cfg.momentum;
  opt.weight_decay = cfg.weight_decay;
  opt.cosine_schedule = cfg.schedule == "cosine" ? 1 : 0;
  opt.seed = cfg.seed;
  opt.shuffle = cfg.shuffle ? 1 : 0;
  opt.loss.beta = beta;
  opt.loss.variant = cfg.loss == "hsbl" ? 1 : 0;
  opt.loss.denominator_all = cfg.denominator == "all" ? 1 : 0;
  opt.loss.argmax_all = cfg.argmax_domain == "all" ? 1 : 0;
  opt.checkpoint_every = cfg.checkpoint_every;
  // The prefix string must outlive the call; caller keeps it alive.
  opt.checkpoint_prefix = ckpt_prefix.empty() ? nullptr : ckpt_prefix.c_str();
  return opt;
}

void require_file(const std::string& value, const char* what) {
  if (value.empty())
    throw CliError{kExitValidation, std::string("missing required ") + what +
                                        " (flag or config key)"};
}

ProtosHandle obtain_protos(const Config& cfg, const RunDir& run) {
  ProtosHandle protos;
  if (!cfg.protos_file.empty()) {
    check(pop_protos_load(cfg.protos_file.c_str(), protos.out()), "load prototypes");
    run.log("loaded prototypes from " + cfg.protos_file);
  } else {
    require_file(cfg.tree_file, "tree_file");
    TreeHandle tree;
    check(pop_tree_load(cfg.tree_file.c_str(), tree.out()), "load tree");
    check(pop_protos_build(tree.get(), cfg.proxies, cfg.distance, protos.out()),
          "build prototypes");
    run.log("built prototypes from " + cfg.tree_file);
  }
  return protos;
}

int cmd_build_prototypes(const Config& cfg) {
  require_file(cfg.tree_file, "tree_file");
  RunDir run(cfg, "build-prototypes");
  run.log("build-prototypes start");
  TreeHandle tree;
  check(pop_tree_load(cfg.tree_file.c_str(), tree.out()), "load tree");
  ProtosHandle protos;
  if (cfg.rotation == "random") {
    // Distance pipeline with a seeded random orthogonal rotation.
    pop_distmat* dist_raw = nullptr;
    check(pop_distance_matrix_build(tree.get(), &dist_raw), "distance matrix");
    Handle<pop_distmat, pop_distmat_free> dist(dist_raw);
    pop_distmat* pop_raw = nullptr;
    check(pop_distmat_augment(dist.get(), cfg.proxies, cfg.distance, &pop_raw),
          "proxy augmentation");
    Handle<pop_distmat, pop_distmat_free> dist_pop(pop_raw);
    pop_simmat* sim_raw = nullptr;
    check(pop_distmat_to_similarity(dist_pop.get(), &sim_raw), "similarity");
    Handle<pop_simmat, pop_simmat_free> sim(sim_raw);
    check(pop_factor_similarity(sim.get(), 1, cfg.rotation_seed, protos.out()), "factorization");
  } else {
    check(pop_protos_build(tree.get(), cfg.proxies, cfg.distance, protos.out()),
          "build prototypes");
  }
  check(pop_protos_save(protos.get(), run.file("protos.csv").c_str()), "save prototypes");
  int dim = 0, num_id = 0, num_proxies = 0;
  check(pop_protos_info(protos.get(), &dim, &num_id, &num_proxies), "prototype info");
  std::cout << "wrote " << run.file("protos.csv") << " (dim " << dim << ", " << num_id
            << " ID classes, " << num_proxies << " proxies)\n";
  run.log("build-prototypes done");
  return 0;
}

int cmd_gen_data(const Config& cfg) {
  require_file(cfg.tree_file, "tree_file");
  RunDir run(cfg, "gen-data");
  run.log("gen-data start");
  TreeHandle tree;
  check(pop_tree_load(cfg.tree_file.c_str(), tree.out()), "load tree");
  pop_synth_options opt = synth_options(cfg);
  DatasetHandle train, test, ood;
  check(pop_dataset_generate(tree.get(), &opt, train.out(), test.out(), ood.out()),
        "generate data");
  check(pop_dataset_save(train.get(), run.file("train.csv").c_str()), "save train set");
  check(pop_dataset_save(test.get(), run.file("test.csv").c_str()), "save test set");
  check(pop_dataset_save(ood.get(), run.file("ood.csv").c_str()), "save ood set");
  int n_train = 0, n_test = 0, n_ood = 0, dim = 0;
  check(pop_dataset_info(train.get(), &n_train, &dim, nullptr), "dataset info");
  check(pop_dataset_info(test.get(), &n_test, nullptr, nullptr), "dataset info");
  check(pop_dataset_info(ood.get(), &n_ood, nullptr, nullptr), "dataset info");
  std::cout << "wrote " << n_train << " train / " << n_test << " test / " << n_ood
            << " ood samples of dimension " << dim << " to " << cfg.out_dir << "\n";
  run.log("gen-data done");
  return 0;
}

int cmd_train(const Config& cfg) {
  require_file(cfg.train_file, "train_file");
  RunDir run(cfg, "train");
  run.log("train start");
  ProtosHandle protos = obtain_protos(cfg, run);

  DatasetHandle train_set;
  check(pop_dataset_load(cfg.train_file.c_str(), POP_ROLE_ID_TRAIN, train_set.out()),
        "load train set");
  int count = 0, data_dim = 0;
  check(pop_dataset_info(train_set.get(), &count, &data_dim, nullptr), "dataset info");

  int head_dim = 0;
  check(pop_protos_info(protos.get(), &head_dim, nullptr, nullptr), "prototype info");
  std::vector<int> dims;
  dims.push_back(data_dim);
  for (int h : cfg.hidden_dims) dims.push_back(h);
  dims.push_back(head_dim);
  NetHandle net;
  check(pop_net_init(dims.data(), dims.size(), cfg.seed, net.out()), "init net");

  const double beta = resolve_beta(cfg, protos.get());
  const std::string ckpt_prefix = cfg.checkpoint_every > 0 ? run.file("net") : std::string();
  pop_train_options opt = train_options(cfg, beta, ckpt_prefix);
  TrainlogHandle log;
  check(pop_train(net.get(), protos.get(), train_set.get(), &opt, log.out()), "train");

  check(pop_net_save(net.get(), run.file("net.txt").c_str()), "save checkpoint");
  check(pop_trainlog_save(log.get(), run.file("trainlog.csv").c_str()), "save train log");
  check(pop_protos_save(protos.get(), run.file("protos.csv").c_str()), "save prototypes");

  int rows = 0;
  check(pop_trainlog_size(log.get(), &rows), "train log size");
  double loss = 0, acc = 0, lr = 0;
  if (rows > 0) check(pop_trainlog_entry(log.get(), rows - 1, &loss, &acc, &lr), "train log row");
  std::cout << "trained " << rows << " epochs on " << count << " samples (beta " << beta
            << "); final loss " << loss << ", accuracy " << acc << "\n";
  run.log("train done");
  return 0;
}

int cmd_eval(const Config& cfg) {
  require_file(cfg.net_file, "net_file");
  require_file(cfg.protos_file, "protos_file");
  require_file(cfg.test_file, "test_file");
  require_file(cfg.ood_file, "ood_file");
  RunDir run(cfg, "eval");
  run.log("eval start");

  NetHandle net;
  check(pop_net_load(cfg.net_file.c_str(), net.out()), "load checkpoint");
  ProtosHandle protos;
  check(pop_protos_load(cfg.protos_file.c_str(), protos.out()), "load prototypes");
  DatasetHandle test_set, ood_set;
  check(pop_dataset_load(cfg.test_file.c_str(), POP_ROLE_ID_TEST, test_set.out()),
        "load test set");
  check(pop_dataset_load(cfg.ood_file.c_str(), POP_ROLE_OOD, ood_set.out()), "load ood set");

  EvalHandle eval;
  check(pop_evaluate(net.get(), protos.get(), test_set.get(), ood_set.get(), cfg.temperature,
                     cfg.pop_id_only ? 1 : 0, eval.out()),
        "evaluate");
  check(pop_evalrun_save_scores(eval.get(), run.file("scores.csv").c_str()), "save scores");
  check(pop_evalrun_save_metrics(eval.get(), run.file("metrics.txt").c_str()), "save metrics");

  const char* kinds[] = {"pop", "msp", "energy", "maxlogit"};
  ordered_json mj;
  for (int kind = 0; kind < 4; ++kind) {
    double fpr95 = 0, auroc = 0, lambda = 0;
    int n_id = 0, n_ood = 0;
    check(pop_evalrun_metrics(eval.get(), kind, &fpr95, &auroc, &lambda, &n_id, &n_ood),
          "metrics");
    mj[kinds[kind]] = {{"fpr95", fpr95},
                       {"auroc", auroc},
                       {"lambda", lambda},
                       {"num_id", n_id},
                       {"num_ood", n_ood}};
    std::cout << kinds[kind] << ": fpr95 " << fpr95 << ", auroc " << auroc << "\n";
  }
  std::ofstream mout(run.file("metrics.json"));
  mout << mj.dump(2) << "\n";
  if (!mout) throw CliError{kExitIo, "cannot write metrics.json"};
  run.log("eval done");
  return 0;
}

int cmd_toy(const Config& cfg) {
  require_file(cfg.tree_file, "tree_file");
  RunDir run(cfg, "toy");
  run.log("toy start");
  TreeHandle tree;
  check(pop_tree_load(cfg.tree_file.c_str(), tree.out()), "load tree");

  pop_toy_options opt;
  check(pop_toy_options_default(&opt), "toy defaults");
  opt.synth = synth_options(cfg);
  opt.synth.input_dim = 2;  // the toy is a 2-D experiment by construction
  double beta = cfg.beta > 0.0 ? cfg.beta : 10.0;
  opt.train = train_options(cfg, beta, std::string());
  opt.hidden_dim = cfg.toy_hidden;
  opt.num_proxies = cfg.toy_proxies;
  opt.proxy_distance = cfg.toy_distance;
  opt.grid_lo = cfg.grid_lo;
  opt.grid_hi = cfg.grid_hi;
  opt.resolution = cfg.resolution;
  opt.grid_direct = cfg.grid_mode == "direct" ? 1 : 0;

  ToyHandle toy;
  check(pop_toy_run(tree.get(), &opt, toy.out()), "toy run");
  check(pop_toy_save_grid(toy.get(), 0, run.file("grid_vanilla.csv").c_str()), "save grid");
  check(pop_toy_save_grid(toy.get(), 1, run.file("grid_fixed.csv").c_str()), "save grid");
  check(pop_toy_save_grid(toy.get(), 2, run.file("grid_pop.csv").c_str()), "save grid");

  double cv = 0, cf = 0, cp = 0, ix = 0, iy = 0;
  check(pop_toy_confidence(toy.get(), 0, &cv), "toy summary");
  check(pop_toy_confidence(toy.get(), 1, &cf), "toy summary");
  check(pop_toy_confidence(toy.get(), 2, &cp), "toy summary");
  check(pop_toy_intersection(toy.get(), &ix, &iy), "toy summary");
  {
    std::ofstream s(run.file("toy_summary.txt"));
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "intersection_x=%.17g\nintersection_y=%.17g\n"
                  "confidence_vanilla=%.17g\nconfidence_fixed=%.17g\nconfidence_pop=%.17g\n",
                  ix, iy, cv, cf, cp);
    s << buf;
    if (!s) throw CliError{kExitIo, "cannot write toy summary"};
  }
  std::cout << "confidence at the class intersection: vanilla " << cv << ", fixed " << cf
            << ", with proxy " << cp << "\n";
  run.log("toy done");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pop: prototypical outlier proxy OOD detection"};
  app.require_subcommand(1);

  struct Common {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
  };

  const char* env_out = std::getenv("POP_OUT_DIR");
  const std::string default_out = env_out && *env_out ? env_out : "pop_out";

  // Each subcommand stages flag values; after the config file is applied,
  // flags that were actually passed override it.
  auto add_common = [&](CLI::App* sub, Common& common) {
    sub->add_option("--config", common.config, "JSON config file (flags override it)");
    sub->add_option("--seed", common.seed, "Master seed for data, init and shuffling")
        ->default_val(1);
    sub->add_option("--out", common.out, "Output directory")->default_val(default_out);
  };

  Config staged;
  Common common;

  auto* build = app.add_subcommand("build-prototypes", "Build a fixed prototype head");
  add_common(build, common);
  build->add_option("--tree", staged.tree_file, "Label tree file");
  build->add_option("--proxies", staged.proxies, "Number of outlier proxies C")->default_val(2);
  build->add_option("--distance", staged.distance, "OOD distance d (must exceed d_max)")
      ->default_val(3.0);
  build->add_option("--rotation", staged.rotation, "Rotation U: identity or random")
      ->default_val("identity");
  build->add_option("--rotation-seed", staged.rotation_seed, "Seed for the random rotation")
      ->default_val(0);

  auto* gen = app.add_subcommand("gen-data", "Generate synthetic ID/OOD datasets");
  add_common(gen, common);
  gen->add_option("--tree", staged.tree_file, "Label tree file");
  gen->add_option("--input-dim", staged.input_dim, "Input dimension")->default_val(4);
  gen->add_option("--train-per-class", staged.train_per_class, "Training samples per class")
      ->default_val(200);
  gen->add_option("--test-per-class", staged.test_per_class, "Test samples per class")
      ->default_val(100);
  gen->add_option("--ood-count", staged.ood_count, "OOD sample count")->default_val(500);
  gen->add_option("--stddev", staged.stddev, "Cluster standard deviation")->default_val(0.35);
  gen->add_option("--mean-separation", staged.mean_separation,
                  "Input-space distance per unit LCA distance")
      ->default_val(2.0);
  gen->add_option("--ood-mode", staged.ood_mode, "far or near")->default_val("far");
  gen->add_option("--near-coeff", staged.near_coeff, "Near-mode interpolation coefficient")
      ->default_val(0.5);
  gen->add_option("--ood-clusters", staged.ood_clusters, "Far-mode cluster count")
      ->default_val(8);
  gen->add_option("--far-radius-scale", staged.far_radius_scale,
                  "Far-mode radius as a multiple of the ID mean spread")
      ->default_val(3.0);

  auto* train = app.add_subcommand("train", "Train the feature extractor against a fixed head");
  add_common(train, common);
  train->add_option("--tree", staged.tree_file, "Label tree file (to build the head)");
  train->add_option("--protos-file", staged.protos_file, "Prototype file (instead of --tree)");
  train->add_option("--proxies", staged.proxies, "Number of outlier proxies C")->default_val(2);
  train->add_option("--distance", staged.distance, "OOD distance d")->default_val(3.0);
  train->add_option("--train-file", staged.train_file, "Training dataset CSV");
  train->add_option("--hidden", staged.hidden_dims, "Hidden layer widths")
      ->default_str("[32]");
  train->add_option("--epochs", staged.epochs, "Training epochs")->default_val(100);
  train->add_option("--batch-size", staged.batch_size, "Batch size")->default_val(32);
  train->add_option("--lr0", staged.lr0, "Initial learning rate")->default_val(0.05);
  train->add_option("--momentum", staged.momentum, "SGD momentum")->default_val(0.9);
  train->add_option("--weight-decay", staged.weight_decay, "Weight decay")->default_val(1e-4);
  train->add_option("--schedule", staged.schedule, "cosine or constant")->default_val("cosine");
  train->add_option("--beta", staged.beta, "Loss scaling factor (0 = auto by class count)")
      ->default_val(0.0);
  train->add_option("--loss", staged.loss, "hsbl or cosine-ce")->default_val("hsbl");
  train->add_option("--denominator", staged.denominator,
                    "HSBL denominator: exclude-true or all")
      ->default_val("exclude-true");
  train->add_option("--argmax-domain", staged.argmax_domain,
                    "Predicted-class argmax domain: id or all")
      ->default_val("id");
  train->add_flag("--no-shuffle", "Disable per-epoch shuffling");
  train->add_option("--checkpoint-every", staged.checkpoint_every,
                    "Epochs between interval checkpoints (0 disables)")
      ->default_val(0);

  auto* eval = app.add_subcommand("eval", "Score an ID test set and an OOD set");
  add_common(eval, common);
  eval->add_option("--net-file", staged.net_file, "Trained checkpoint");
  eval->add_option("--protos-file", staged.protos_file, "Prototype file");
  eval->add_option("--test-file", staged.test_file, "ID test dataset CSV");
  eval->add_option("--ood-file", staged.ood_file, "OOD dataset CSV");
  eval->add_option("--temperature", staged.temperature, "Baseline score temperature")
      ->default_val(1.0);
  eval->add_flag("--pop-id-only", "Restrict the pop score max to ID logits");

  auto* toy = app.add_subcommand("toy", "2-D toy experiment: three heads, confidence grids");
  add_common(toy, common);
  toy->add_option("--tree", staged.tree_file, "Label tree file (3 classes)");
  toy->add_option("--train-per-class", staged.train_per_class, "Training samples per class")
      ->default_val(200);
  toy->add_option("--stddev", staged.stddev, "Cluster standard deviation")->default_val(0.35);
  toy->add_option("--epochs", staged.epochs, "Training epochs")->default_val(30);
  toy->add_option("--lr0", staged.lr0, "Initial learning rate")->default_val(0.1);
  toy->add_option("--weight-decay", staged.weight_decay, "Weight decay")->default_val(5e-4);
  toy->add_option("--beta", staged.beta, "Loss and confidence scaling factor")
      ->default_val(10.0);
  toy->add_option("--hidden", staged.toy_hidden, "Hidden layer width")->default_val(16);
  toy->add_option("--toy-proxies", staged.toy_proxies, "Proxies in the third configuration")
      ->default_val(1);
  toy->add_option("--toy-distance", staged.toy_distance, "Proxy OOD distance")->default_val(4.0);
  toy->add_option("--grid-lo", staged.grid_lo, "Grid lower bound")->default_val(-3.0);
  toy->add_option("--grid-hi", staged.grid_hi, "Grid upper bound")->default_val(3.0);
  toy->add_option("--resolution", staged.resolution, "Grid points per axis")->default_val(61);
  toy->add_option("--grid-mode", staged.grid_mode, "net or direct")->default_val("net");

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  try {
    Config cfg = command == "toy" ? toy_profile() : Config{};
    cfg.out_dir = default_out;
    if (sub->count("--config")) apply_config_file(cfg, common.config);

    // Flags passed on the command line override the config file.
    auto override_if = [&](const char* flag, auto& into, const auto& from) {
      const CLI::Option* opt = sub->get_option_no_throw(flag);
      if (opt && opt->count() > 0) into = from;
    };
    override_if("--seed", cfg.seed, common.seed);
    override_if("--out", cfg.out_dir, common.out);
    override_if("--tree", cfg.tree_file, staged.tree_file);
    override_if("--proxies", cfg.proxies, staged.proxies);
    override_if("--distance", cfg.distance, staged.distance);
    override_if("--rotation", cfg.rotation, staged.rotation);
    override_if("--rotation-seed", cfg.rotation_seed, staged.rotation_seed);
    override_if("--protos-file", cfg.protos_file, staged.protos_file);
    override_if("--input-dim", cfg.input_dim, staged.input_dim);
    override_if("--train-per-class", cfg.train_per_class, staged.train_per_class);
    override_if("--test-per-class", cfg.test_per_class, staged.test_per_class);
    override_if("--ood-count", cfg.ood_count, staged.ood_count);
    override_if("--stddev", cfg.stddev, staged.stddev);
    override_if("--mean-separation", cfg.mean_separation, staged.mean_separation);
    override_if("--ood-mode", cfg.ood_mode, staged.ood_mode);
    override_if("--near-coeff", cfg.near_coeff, staged.near_coeff);
    override_if("--ood-clusters", cfg.ood_clusters, staged.ood_clusters);
    override_if("--far-radius-scale", cfg.far_radius_scale, staged.far_radius_scale);
    override_if("--train-file", cfg.train_file, staged.train_file);
    override_if("--hidden", cfg.hidden_dims, staged.hidden_dims);
    override_if("--epochs", cfg.epochs, staged.epochs);
    override_if("--batch-size", cfg.batch_size, staged.batch_size);
    override_if("--lr0", cfg.lr0, staged.lr0);
    override_if("--momentum", cfg.momentum, staged.momentum);
    override_if("--weight-decay", cfg.weight_decay, staged.weight_decay);
    override_if("--schedule", cfg.schedule, staged.schedule);
    override_if("--beta", cfg.beta, staged.beta);
    override_if("--loss", cfg.loss, staged.loss);
    override_if("--denominator", cfg.denominator, staged.denominator);
    override_if("--argmax-domain", cfg.argmax_domain, staged.argmax_domain);
    override_if("--checkpoint-every", cfg.checkpoint_every, staged.checkpoint_every);
    override_if("--net-file", cfg.net_file, staged.net_file);
    override_if("--test-file", cfg.test_file, staged.test_file);
    override_if("--ood-file", cfg.ood_file, staged.ood_file);
    override_if("--temperature", cfg.temperature, staged.temperature);
    {
      const CLI::Option* o = sub->get_option_no_throw("--no-shuffle");
      if (o && o->count() > 0) cfg.shuffle = false;
      o = sub->get_option_no_throw("--pop-id-only");
      if (o && o->count() > 0) cfg.pop_id_only = true;
    }
    if (command == "toy") {
      override_if("--hidden", cfg.toy_hidden, staged.toy_hidden);
      override_if("--toy-proxies", cfg.toy_proxies, staged.toy_proxies);
      override_if("--toy-distance", cfg.toy_distance, staged.toy_distance);
      override_if("--grid-lo", cfg.grid_lo, staged.grid_lo);
      override_if("--grid-hi", cfg.grid_hi, staged.grid_hi);
      override_if("--resolution", cfg.resolution, staged.resolution);
      override_if("--grid-mode", cfg.grid_mode, staged.grid_mode);
    }
    validate_enums(cfg);

    if (command == "build-prototypes") return cmd_build_prototypes(cfg);
    if (command == "gen-data") return cmd_gen_data(cfg);
    if (command == "train") return cmd_train(cfg);
    if (command == "eval") return cmd_eval(cfg);
    if (command == "toy") return cmd_toy(cfg);
    throw CliError{kExitValidation, "unknown command " + command};
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
