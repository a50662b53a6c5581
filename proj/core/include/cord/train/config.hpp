#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cord/align/token_align.hpp"
#include "cord/autodiff/optim.hpp"
#include "cord/model/config.hpp"
#include "cord/task/dataset.hpp"

namespace cord::train {

struct KeyInfo {
  std::string key;
  std::string default_value;
  std::string doc;
};

// Every accepted key with its default, in documentation order.
const std::vector<KeyInfo>& config_keys();

// Flat key=value settings. Values are validated when read; keys are checked
// on every assignment, so a typo fails before any work starts.
class Config {
 public:
  Config();  // all defaults

  static Config from_file(const std::filesystem::path& path);
  // "key = value" lines; '#' starts a comment. `origin` names the source in errors.
  static Config parse(const std::string& text, const std::string& origin = "<string>");

  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply_override(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  std::string get_string(const std::string& key) const { return get(key); }
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  // Sorted key = value text of every key; parses back to an equal Config.
  std::string resolved() const;
  void write_resolved(const std::filesystem::path& path) const;

  bool operator==(const Config& other) const { return values_ == other.values_; }

 private:
  std::map<std::string, std::string> values_;
};

enum class Method : std::uint8_t { kCord, kOpd, kGrpo, kSft, kFkl };
Method parse_method(const std::string& name);
const char* method_name(Method m);

enum class TeacherRefresh : std::uint8_t { kPerEpoch, kOnce };

struct PretrainSettings {
  std::size_t steps = 6000;
  std::size_t batch_size = 16;
  double audio_fraction = 0.01;
  double aux_fraction = 0.1;  // share of each batch drawn from the auxiliary task
  double clip_norm = 1.0;
  ad::AdamWConfig optim{1e-3, 0.9, 0.999, 1e-8, 0.01};
};

struct TrainSettings {
  Method method = Method::kCord;
  std::size_t steps = 3000;
  std::size_t batch_size = 8;
  std::vector<std::size_t> eval_steps{500, 1000, 3000};
  std::size_t group_size = 4;
  double temperature = 1.0;
  double grpo_temperature = 1.5;
  double teacher_temperature = 1.0;
  double seq_weight = 1.0;
  bool length_normalized = false;
  bool greedy_reference = true;
  TeacherRefresh teacher_refresh = TeacherRefresh::kPerEpoch;
  std::size_t max_len = 200;
  double clip_norm = 0.0;
  ad::AdamWConfig optim{};
  align::AlignConfig align{};
};

struct EvalSettings {
  std::size_t limit = 0;  // 0: whole split
  task::Split split = task::Split::kTest;
  std::size_t max_len = 200;
};

struct Settings {
  std::uint64_t seed = 0;
  task::DatasetSpec data;
  std::size_t aux_n = 3000;
  double aux_test_fraction = 0.2;
  model::ModelConfig model;
  PretrainSettings pretrain;
  TrainSettings train;
  EvalSettings eval;
  std::string base_checkpoint;  // required by train/eval/sweep
  std::string data_dir;         // empty: regenerate from data.* in memory
};

// Typed view with range validation; throws ConfigError.
Settings resolve(const Config& config);

}  // namespace cord::train
