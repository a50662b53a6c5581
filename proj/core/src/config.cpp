#include "cord/train/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cord/common/error.hpp"

namespace cord::train {

const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys = {
      {"seed", "0", "master seed; every random stream derives from it"},
      {"data.n", "20000", "number of distinct programs"},
      {"data.modulus", "7", "arithmetic modulus m (5..31)"},
      {"data.min_steps", "1", "fewest operations per program"},
      {"data.max_steps", "4", "most operations per program (<= 8)"},
      {"data.train_ratio", "0.8", "train share"},
      {"data.val_ratio", "0.1", "validation share"},
      {"data.test_ratio", "0.1", "test share"},
      {"data.p_sub", "0.02", "audio frame substitution probability"},
      {"data.p_dup", "0", "audio frame duplication probability"},
      {"data.frames_min", "1", "fewest frames per symbol"},
      {"data.frames_max", "1", "most frames per symbol"},
      {"data.dir", "", "read datasets from this directory instead of regenerating"},
      {"aux.n", "3000", "auxiliary noise-level classification records"},
      {"aux.test_fraction", "0.2", "auxiliary test share"},
      {"model.d_model", "64", "embedding width"},
      {"model.layers", "2", "decoder blocks"},
      {"model.heads", "4", "attention heads"},
      {"model.mlp_ratio", "4", "MLP hidden width / d_model"},
      {"model.context", "256", "positions (condition + outputs)"},
      {"model.max_output", "200", "generated-token cap"},
      {"pretrain.steps", "6000", "pretraining optimizer steps"},
      {"pretrain.batch_size", "16", "sequences per pretraining step"},
      {"pretrain.audio_fraction", "0.01", "share of train programs also seen in audio form"},
      {"pretrain.aux_fraction", "0.1", "share of each batch from the auxiliary task"},
      {"pretrain.lr", "1e-3", "pretraining learning rate"},
      {"pretrain.weight_decay", "0.01", "pretraining decoupled weight decay"},
      {"pretrain.clip_norm", "1.0", "global gradient-norm clip (0: off)"},
      {"train.method", "cord", "cord | opd | grpo | sft | fkl"},
      {"train.steps", "3000", "alignment optimizer steps"},
      {"train.batch_size", "8", "prompts per step"},
      {"train.eval_steps", "500,1000,3000", "steps after which to evaluate"},
      {"train.group_size", "4", "GRPO group size N (>= 2)"},
      {"train.temperature", "1.0", "token-level rollout temperature"},
      {"train.grpo_temperature", "1.5", "GRPO group temperature"},
      {"train.teacher_temperature", "1.0", "SFT/FKL teacher rollout temperature"},
      {"train.seq_weight", "1.0", "weight on the sequence-level loss"},
      {"train.length_normalized", "false", "divide GRPO log-likelihoods by length"},
      {"train.reference", "greedy", "GRPO text reference decoding: greedy | sampled"},
      {"train.teacher_refresh", "epoch", "SFT/FKL teacher snapshot: epoch | once"},
      {"train.max_len", "200", "rollout length cap"},
      {"train.clip_norm", "0", "global gradient-norm clip (0: off)"},
      {"optim.lr", "3e-5", "alignment learning rate"},
      {"optim.beta1", "0.9", "AdamW beta1"},
      {"optim.beta2", "0.999", "AdamW beta2"},
      {"optim.eps", "1e-8", "AdamW epsilon"},
      {"optim.weight_decay", "0.01", "alignment decoupled weight decay"},
      {"align.top_k", "20", "top-K count for importance weights"},
      {"align.alpha", "2.0", "importance scale"},
      {"align.beta", "2.0", "positional scale"},
      {"align.weighting", "true", "false: uniform token weights"},
      {"eval.limit", "0", "evaluate the first N items (0: all)"},
      {"eval.split", "test", "train | val | test"},
      {"eval.max_len", "200", "greedy decode cap"},
      {"paths.base", "", "base checkpoint for train/eval/sweep"},
  };
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool known(const std::string& key) {
  const auto& keys = config_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const KeyInfo& k) { return k.key == key; });
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': expected " + want + ", got '" + value + "'");
}

}  // namespace

Config::Config() {
  for (const auto& k : config_keys()) values_[k.key] = k.default_value;
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file", path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

long long Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::size_t Config::get_size(const std::string& key) const {
  const long long v = get_int(key);
  if (v < 0) bad_value(key, get(key), "a non-negative integer");
  return static_cast<std::size_t>(v);
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::size_t> Config::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      bad_value(key, get(key), "a comma-separated list of integers");
    }
    out.push_back(v);
  }
  return out;
}

std::string Config::resolved() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void Config::write_resolved(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config snapshot", path.string());
  out << resolved();
  if (!out) throw IoError("failed writing config snapshot", path.string());
}

Method parse_method(const std::string& name) {
  if (name == "cord") return Method::kCord;
  if (name == "opd") return Method::kOpd;
  if (name == "grpo") return Method::kGrpo;
  if (name == "sft") return Method::kSft;
  if (name == "fkl") return Method::kFkl;
  throw ConfigError("unknown method '" + name + "' (expected cord, opd, grpo, sft or fkl)");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::kCord: return "cord";
    case Method::kOpd: return "opd";
    case Method::kGrpo: return "grpo";
    case Method::kSft: return "sft";
    case Method::kFkl: return "fkl";
  }
  return "?";
}

namespace {

void require_positive(const Config& c, const std::string& key) {
  if (!(c.get_double(key) > 0)) bad_value(key, c.get(key), "a positive value");
}

void require_probability(const Config& c, const std::string& key) {
  const double v = c.get_double(key);
  if (!(v >= 0 && v <= 1)) bad_value(key, c.get(key), "a value in [0, 1]");
}

}  // namespace

Settings resolve(const Config& c) {
  Settings s;
  s.seed = c.get_u64("seed");

  s.data.n = c.get_size("data.n");
  s.data.modulus = static_cast<int>(c.get_int("data.modulus"));
  s.data.min_steps = static_cast<int>(c.get_int("data.min_steps"));
  s.data.max_steps = static_cast<int>(c.get_int("data.max_steps"));
  s.data.ratios = {c.get_double("data.train_ratio"), c.get_double("data.val_ratio"),
                   c.get_double("data.test_ratio")};
  s.data.noise.p_sub = c.get_double("data.p_sub");
  s.data.noise.p_dup = c.get_double("data.p_dup");
  s.data.noise.frames_min = static_cast<int>(c.get_int("data.frames_min"));
  s.data.noise.frames_max = static_cast<int>(c.get_int("data.frames_max"));
  s.data.seed = s.seed;
  s.data.validate();
  s.data_dir = c.get("data.dir");

  s.aux_n = c.get_size("aux.n");
  s.aux_test_fraction = c.get_double("aux.test_fraction");
  require_probability(c, "aux.test_fraction");

  s.model.d_model = c.get_size("model.d_model");
  s.model.layers = c.get_size("model.layers");
  s.model.heads = c.get_size("model.heads");
  s.model.mlp_ratio = c.get_size("model.mlp_ratio");
  s.model.context = c.get_size("model.context");
  s.model.max_output = c.get_size("model.max_output");
  s.model.seed = s.seed;
  s.model.validate();

  auto& p = s.pretrain;
  p.steps = c.get_size("pretrain.steps");
  p.batch_size = c.get_size("pretrain.batch_size");
  p.audio_fraction = c.get_double("pretrain.audio_fraction");
  p.aux_fraction = c.get_double("pretrain.aux_fraction");
  p.optim.lr = c.get_double("pretrain.lr");
  p.optim.weight_decay = c.get_double("pretrain.weight_decay");
  p.clip_norm = c.get_double("pretrain.clip_norm");
  require_probability(c, "pretrain.audio_fraction");
  require_probability(c, "pretrain.aux_fraction");
  require_positive(c, "pretrain.lr");
  require_positive(c, "pretrain.batch_size");

  auto& t = s.train;
  t.method = parse_method(c.get("train.method"));
  t.steps = c.get_size("train.steps");
  t.batch_size = c.get_size("train.batch_size");
  t.eval_steps = c.get_size_list("train.eval_steps");
  t.group_size = c.get_size("train.group_size");
  t.temperature = c.get_double("train.temperature");
  t.grpo_temperature = c.get_double("train.grpo_temperature");
  t.teacher_temperature = c.get_double("train.teacher_temperature");
  t.seq_weight = c.get_double("train.seq_weight");
  t.length_normalized = c.get_bool("train.length_normalized");
  const std::string& ref = c.get("train.reference");
  if (ref != "greedy" && ref != "sampled") bad_value("train.reference", ref, "greedy or sampled");
  t.greedy_reference = ref == "greedy";
  const std::string& refresh = c.get("train.teacher_refresh");
  if (refresh != "epoch" && refresh != "once") {
    bad_value("train.teacher_refresh", refresh, "epoch or once");
  }
  t.teacher_refresh = refresh == "epoch" ? TeacherRefresh::kPerEpoch : TeacherRefresh::kOnce;
  t.max_len = c.get_size("train.max_len");
  t.clip_norm = c.get_double("train.clip_norm");
  require_positive(c, "train.steps");
  require_positive(c, "train.batch_size");
  require_positive(c, "train.temperature");
  require_positive(c, "train.grpo_temperature");
  require_positive(c, "train.teacher_temperature");
  if (t.group_size < 2) bad_value("train.group_size", c.get("train.group_size"), "at least 2");
  if (t.max_len > s.model.max_output) {
    bad_value("train.max_len", c.get("train.max_len"), "at most model.max_output");
  }
  for (std::size_t e : t.eval_steps) {
    if (e == 0) bad_value("train.eval_steps", c.get("train.eval_steps"), "positive steps");
  }
  t.optim.lr = c.get_double("optim.lr");
  t.optim.beta1 = c.get_double("optim.beta1");
  t.optim.beta2 = c.get_double("optim.beta2");
  t.optim.eps = c.get_double("optim.eps");
  t.optim.weight_decay = c.get_double("optim.weight_decay");
  require_positive(c, "optim.lr");
  t.align.top_k = c.get_size("align.top_k");
  t.align.alpha = c.get_double("align.alpha");
  t.align.beta = c.get_double("align.beta");
  t.align.weighting_enabled = c.get_bool("align.weighting");
  t.align.validate();

  s.eval.limit = c.get_size("eval.limit");
  const std::string& split = c.get("eval.split");
  if (split == "train") s.eval.split = task::Split::kTrain;
  else if (split == "val") s.eval.split = task::Split::kVal;
  else if (split == "test") s.eval.split = task::Split::kTest;
  else bad_value("eval.split", split, "train, val or test");
  s.eval.max_len = c.get_size("eval.max_len");

  s.base_checkpoint = c.get("paths.base");
  return s;
}

}  // namespace cord::train
