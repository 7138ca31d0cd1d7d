#include "mashup/task.hpp"

#include "mashup/errors.hpp"
#include "mashup/rng.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace mashup {

using nlohmann::json;

namespace {

// Teachers get hotter hidden weights than trained models would have, so the
// induced labels are not linearly separable and one epoch cannot saturate.
constexpr double kTeacherScale = 2.0;

// Pool logits carry a fixed gain in the label rule so the shared structure
// dominates labels: without it, checkpoints from sibling tasks disagree with
// the target often enough that their zero-shot loss never beats an untrained
// model and nothing transfers.
constexpr double kPoolGain = 3.5;

}  // namespace

int TaskSuite::distractor_index() const {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& mix = specs[i].mixture;
    if (mix.size() == 1 && mix[0].meta_id >= n_meta) return static_cast<int>(i);
  }
  return -1;
}

const TaskSpec& TaskSuite::spec(const std::string& name) const {
  for (const auto& s : specs) {
    if (s.name == name) return s;
  }
  throw SetupError("suite has no task named '" + name + "'");
}

NamedParamSet meta_teacher_params(const ModelArch& arch, std::uint64_t suite_seed, int id) {
  Rng rng(derive_seed(suite_seed, {fnv1a64("meta-teacher"), static_cast<std::uint64_t>(id)}));
  NamedParamSet out;
  for (const auto& l : arch.layers()) {
    const double std_dev = kTeacherScale / std::sqrt(static_cast<double>(l.in));
    Eigen::VectorXf w(static_cast<Eigen::Index>(l.out) * l.in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = static_cast<float>(rng.normal() * std_dev);
    out.add(TensorSpec{l.name + ".weight", {l.out, l.in}}, std::move(w));
    out.add(TensorSpec{l.name + ".bias", {l.out}}, Eigen::VectorXf::Zero(l.out));
  }
  return out;
}

TaskSuite generate_suite(int n_tasks, int n_meta, double overlap, std::uint64_t suite_seed) {
  if (n_tasks < 2) throw std::invalid_argument("generate_suite: n_tasks must be >= 2");
  if (n_meta < 2) throw std::invalid_argument("generate_suite: n_meta must be >= 2");
  if (!(overlap >= 0.0 && overlap <= 1.0)) {
    throw std::invalid_argument("generate_suite: overlap must lie in [0, 1]");
  }

  TaskSuite suite;
  suite.suite_seed = suite_seed;
  suite.n_meta = n_meta;
  suite.overlap = overlap;

  // One pool mixture for the whole suite; tasks share it, scaled by overlap.
  Rng pool_rng(derive_seed(suite_seed, {fnv1a64("pool")}));
  std::vector<double> pool(static_cast<std::size_t>(n_meta));
  double pool_sum = 0.0;
  for (double& w : pool) {
    w = 0.5 + pool_rng.uniform();
    pool_sum += w;
  }
  for (double& w : pool) w /= pool_sum;

  const int distractor = n_tasks - 1;
  for (int i = 0; i < n_tasks; ++i) {
    TaskSpec spec;
    spec.name = "t" + std::to_string(i);
    spec.suite_seed = suite_seed;
    spec.pool_size = n_meta;
    spec.seed = derive_seed(suite_seed, {fnv1a64("task"), static_cast<std::uint64_t>(i)});
    const int private_id = n_meta + i;
    if (i == distractor || overlap == 0.0) {
      spec.mixture = {MixtureComponent{private_id, 1.0}};
    } else {
      for (int m = 0; m < n_meta; ++m) {
        const double w = overlap * pool[static_cast<std::size_t>(m)];
        if (w > 0.0) spec.mixture.push_back(MixtureComponent{m, w});
      }
      if (overlap < 1.0) spec.mixture.push_back(MixtureComponent{private_id, 1.0 - overlap});
    }
    suite.specs.push_back(std::move(spec));
  }
  return suite;
}

TaskData realize_task(const TaskSpec& spec) {
  if (spec.mixture.empty()) throw std::invalid_argument("realize_task: empty mixture");
  if (spec.train_size <= 0 || spec.val_size <= 0) {
    throw std::invalid_argument("realize_task: sizes must be positive");
  }
  if (!(spec.noise_rate >= 0.0 && spec.noise_rate <= 1.0)) {
    throw std::invalid_argument("realize_task: noise_rate out of [0, 1]");
  }

  const ModelArch arch = default_arch(spec.input_dim, spec.n_classes);
  const int n = spec.train_size + spec.val_size;

  Rng rng(derive_seed(spec.seed, {fnv1a64("data")}));
  Eigen::MatrixXd x(n, spec.input_dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < spec.input_dim; ++j) x(i, j) = rng.normal();
  }

  Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(n, spec.n_classes);
  for (const auto& comp : spec.mixture) {
    const NamedParamSet teacher = meta_teacher_params(arch, spec.suite_seed, comp.meta_id);
    const Model m = init_model(arch, TrainMode::full, FromParams{&teacher});
    const double gain = comp.meta_id < spec.pool_size ? kPoolGain : 1.0;
    mixed += comp.weight * gain * forward_logits(m, x);
  }

  Eigen::VectorXi labels(n);
  for (int i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < spec.n_classes; ++c) {
      if (mixed(i, c) > mixed(i, best)) best = c;
    }
    labels[i] = static_cast<int>(best);
  }
  for (int i = 0; i < n; ++i) {
    if (rng.uniform() < spec.noise_rate) {
      labels[i] = static_cast<int>(rng.below(static_cast<std::size_t>(spec.n_classes)));
    }
  }

  TaskData data;
  data.train.features = x.topRows(spec.train_size);
  data.train.labels = labels.head(spec.train_size);
  data.val.features = x.bottomRows(spec.val_size);
  data.val.labels = labels.tail(spec.val_size);
  return data;
}

Dataset sample_eval_subset(const TaskData& data, int n, std::uint64_t seed) {
  const int train_size = static_cast<int>(data.train.size());
  if (n < 1 || n > train_size) {
    throw std::invalid_argument("sample_eval_subset: n " + std::to_string(n) +
                                " out of [1, " + std::to_string(train_size) + "]");
  }
  std::vector<int> idx(static_cast<std::size_t>(train_size));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, {fnv1a64("eval-subset")}));
  for (int i = 0; i < n; ++i) {
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(i) + rng.below(static_cast<std::size_t>(train_size - i))]);
  }
  idx.resize(static_cast<std::size_t>(n));
  return data.train.gather(idx);
}

json suite_to_json(const TaskSuite& suite) {
  json specs = json::array();
  for (const auto& s : suite.specs) {
    json mixture = json::array();
    for (const auto& c : s.mixture) {
      mixture.push_back(json{{"meta_id", c.meta_id}, {"weight", c.weight}});
    }
    specs.push_back(json{{"name", s.name},
                         {"mixture", mixture},
                         {"input_dim", s.input_dim},
                         {"n_classes", s.n_classes},
                         {"noise_rate", s.noise_rate},
                         {"train_size", s.train_size},
                         {"val_size", s.val_size},
                         {"seed", s.seed},
                         {"suite_seed", s.suite_seed},
                         {"pool_size", s.pool_size}});
  }
  return json{{"suite_seed", suite.suite_seed},
              {"n_meta", suite.n_meta},
              {"overlap", suite.overlap},
              {"specs", specs}};
}

TaskSuite suite_from_json(const json& j) {
  TaskSuite suite;
  suite.suite_seed = j.at("suite_seed").get<std::uint64_t>();
  suite.n_meta = j.at("n_meta").get<int>();
  suite.overlap = j.at("overlap").get<double>();
  for (const auto& js : j.at("specs")) {
    TaskSpec s;
    s.name = js.at("name").get<std::string>();
    for (const auto& jc : js.at("mixture")) {
      s.mixture.push_back(
          MixtureComponent{jc.at("meta_id").get<int>(), jc.at("weight").get<double>()});
    }
    s.input_dim = js.at("input_dim").get<int>();
    s.n_classes = js.at("n_classes").get<int>();
    s.noise_rate = js.at("noise_rate").get<double>();
    s.train_size = js.at("train_size").get<int>();
    s.val_size = js.at("val_size").get<int>();
    s.seed = js.at("seed").get<std::uint64_t>();
    s.suite_seed = js.at("suite_seed").get<std::uint64_t>();
    s.pool_size = js.value("pool_size", 0);
    suite.specs.push_back(std::move(s));
  }
  return suite;
}

void save_suite(const TaskSuite& suite, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << suite_to_json(suite).dump(2) << "\n";
}

TaskSuite load_suite(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError("suite parse error: " + std::string(e.what()));
  }
  return suite_from_json(j);
}

}  // namespace mashup
