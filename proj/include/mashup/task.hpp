#pragma once

#include "mashup/data.hpp"
#include "mashup/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mashup {

struct MixtureComponent {
  int meta_id = 0;
  double weight = 0.0;

  bool operator==(const MixtureComponent&) const = default;
};

// A synthetic classification task: inputs are standard normal, labels come
// from the argmax of a mixture of fixed random teacher networks.
struct TaskSpec {
  std::string name;
  std::vector<MixtureComponent> mixture;  // weights >= 0, summing to 1
  int input_dim = 32;
  int n_classes = 8;
  double noise_rate = 0.05;
  int train_size = 4096;
  int val_size = 512;
  std::uint64_t seed = 0;
  std::uint64_t suite_seed = 0;  // teachers are shared across the suite
  int pool_size = 0;             // meta ids below this belong to the shared pool

  bool operator==(const TaskSpec&) const = default;
};

struct TaskData {
  Dataset train;
  Dataset val;
};

struct TaskSuite {
  std::uint64_t suite_seed = 0;
  int n_meta = 4;
  double overlap = 0.6;
  std::vector<TaskSpec> specs;

  // The unique task whose mixture is fully private (no pool mass).
  int distractor_index() const;
  const TaskSpec& spec(const std::string& name) const;
};

// Fixed random network shared by every task that references this id.
// Hidden weights are scaled up to make the decision boundary non-linear.
NamedParamSet meta_teacher_params(const ModelArch& arch, std::uint64_t suite_seed, int id);

// n_tasks tasks over a pool of n_meta shared teachers. Every non-distractor
// task puts mass `overlap` on one suite-wide pool mixture and the remainder
// on its own private teacher; the last task is the distractor and is fully
// private regardless of overlap.
TaskSuite generate_suite(int n_tasks, int n_meta, double overlap, std::uint64_t suite_seed);

// i.i.d. standard normal inputs; label = argmax of the mixture-weighted sum
// of teacher logits, resampled uniformly with probability noise_rate.
TaskData realize_task(const TaskSpec& spec);

// Uniform sample without replacement from the train split only.
Dataset sample_eval_subset(const TaskData& data, int n, std::uint64_t seed);

nlohmann::json suite_to_json(const TaskSuite& suite);
TaskSuite suite_from_json(const nlohmann::json& j);
void save_suite(const TaskSuite& suite, const std::filesystem::path& path);
TaskSuite load_suite(const std::filesystem::path& path);

}  // namespace mashup
