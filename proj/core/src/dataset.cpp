#include "cord/task/dataset.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <unordered_set>

#include "cord/common/error.hpp"
#include "cord/common/rng.hpp"
#include "cord/task/vocab.hpp"

namespace cord::task {
namespace {

using nlohmann::json;

constexpr std::size_t kMaxDrawsPerRecord = 1000;

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "'");
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading", path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  if (in.bad()) throw IoError("read failure", path.string());
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  for (const auto& l : lines) out << l << '\n';
  out.flush();
  if (!out) throw IoError("write failure", path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory", dir.string());
}

std::size_t rounded(double v) { return static_cast<std::size_t>(std::floor(v + 0.5)); }

}  // namespace

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

ModalPair make_pair(std::uint64_t id, const SemanticInstance& instance, const NoiseSpec& noise,
                    Split split) {
  ModalPair p;
  p.id = id;
  p.instance = instance;
  p.x_text = encode_text(instance.program);
  p.x_audio = encode_audio(p.x_text, noise);
  p.target = render_target(instance);
  p.split = split;
  return p;
}

void DatasetSpec::validate() const {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split ratios must be non-negative");
  }
  if (min_steps < 1 || max_steps > kMaxSteps || min_steps > max_steps) {
    throw ConfigError("step range must satisfy 1 <= min <= max <= 8");
  }
  if (modulus < kMinModulus || modulus > vocab::kMaxModulus) {
    throw ConfigError("modulus must be in [5, 31]");
  }
  noise.validate();
}

const std::vector<ModalPair>& Dataset::split(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kVal: return val;
    case Split::kTest: return test;
  }
  return train;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  const std::size_t n_train = rounded(static_cast<double>(spec.n) * spec.ratios[0]);
  const std::size_t n_val =
      std::min(spec.n - n_train, rounded(static_cast<double>(spec.n) * spec.ratios[1]));

  Rng rng(derive_seed(spec.seed, Stream::kData));
  const auto span = static_cast<std::uint64_t>(spec.max_steps - spec.min_steps + 1);
  std::unordered_set<std::uint64_t> seen;
  Dataset ds;
  for (std::size_t i = 0; i < spec.n; ++i) {
    SemanticInstance inst;
    std::size_t draws = 0;
    for (;; ++draws) {
      if (draws == kMaxDrawsPerRecord) {
        throw ConfigError("program space exhausted after " + std::to_string(i) + " records");
      }
      const int length = spec.min_steps + static_cast<int>(rng.uniform_int(span));
      inst = generate_instance(length, spec.modulus, rng.engine()());
      if (seen.insert(program_hash(inst.program)).second) break;
    }
    const Split split = i < n_train ? Split::kTrain : i < n_train + n_val ? Split::kVal : Split::kTest;
    NoiseSpec noise = spec.noise;
    noise.seed = derive_seed(spec.seed, Stream::kNoise, i);
    auto& bucket = split == Split::kTrain ? ds.train : split == Split::kVal ? ds.val : ds.test;
    bucket.push_back(make_pair(i, inst, noise, split));
  }
  return ds;
}

std::string pair_to_json(const ModalPair& pair) {
  json j;
  j["id"] = pair.id;
  j["program"] = program_string(pair.instance.program);
  j["answer"] = pair.instance.answer;
  j["x_text"] = pair.x_text;
  j["x_audio"] = pair.x_audio;
  j["target"] = pair.target;
  j["split"] = split_name(pair.split);
  return j.dump();
}

ModalPair pair_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed dataset record: ") + e.what());
  }
  ModalPair p;
  try {
    p.id = j.at("id").get<std::uint64_t>();
    p.x_text = j.at("x_text").get<std::vector<int>>();
    p.x_audio = j.at("x_audio").get<std::vector<int>>();
    p.target = j.at("target").get<std::vector<int>>();
    p.split = parse_split(j.at("split").get<std::string>());
    p.instance = evaluate(decode_text(p.x_text));
    if (p.instance.answer != j.at("answer").get<int>()) {
      throw ConfigError("record " + std::to_string(p.id) + ": answer disagrees with program");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed dataset record: ") + e.what());
  }
  for (int f : p.x_audio) {
    if (f < 0 || f >= vocab::audio::kSize) throw ConfigError("audio frame out of range in record");
  }
  return p;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  ensure_dir(dir);
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    std::vector<std::string> lines;
    for (const auto& p : dataset.split(s)) lines.push_back(pair_to_json(p));
    write_lines(dir / (std::string(split_name(s)) + ".jsonl"), lines);
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    auto& bucket = s == Split::kTrain ? ds.train : s == Split::kVal ? ds.val : ds.test;
    for (const auto& line : read_lines(dir / (std::string(split_name(s)) + ".jsonl"))) {
      bucket.push_back(pair_from_json(line));
    }
  }
  return ds;
}

const char* noise_class_name(NoiseClass c) {
  switch (c) {
    case NoiseClass::kLow: return "low";
    case NoiseClass::kMid: return "mid";
    case NoiseClass::kHigh: return "high";
  }
  return "low";
}

int label_token(NoiseClass c) {
  switch (c) {
    case NoiseClass::kLow: return vocab::out::kLabelLow;
    case NoiseClass::kMid: return vocab::out::kLabelMid;
    case NoiseClass::kHigh: return vocab::out::kLabelHigh;
  }
  return vocab::out::kLabelLow;
}

NoiseSpec noise_for_class(NoiseClass c, std::uint64_t seed) {
  switch (c) {
    case NoiseClass::kLow: return {0.0, 0.0, 1, 1, seed};
    case NoiseClass::kMid: return {0.15, 0.15, 1, 2, seed};
    case NoiseClass::kHigh: return {0.4, 0.4, 2, 3, seed};
  }
  return {};
}

AuxDataset generate_aux(std::size_t n, std::uint64_t seed, int modulus, int max_steps,
                        double test_fraction) {
  if (test_fraction < 0.0 || test_fraction > 1.0) throw ConfigError("aux test fraction out of range");
  Rng rng(derive_seed(seed, Stream::kAux));
  const std::size_t n_test = rounded(static_cast<double>(n) * test_fraction);
  AuxDataset aux;
  for (std::size_t i = 0; i < n; ++i) {
    const int length = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_steps)));
    const SemanticInstance inst = generate_instance(length, modulus, rng.engine()());
    AuxInstance a;
    a.id = i;
    a.label = static_cast<NoiseClass>(i % 3);
    a.x_audio = encode_audio(encode_text(inst.program),
                             noise_for_class(a.label, derive_seed(seed, Stream::kNoise, i, 1)));
    (i < n - n_test ? aux.train : aux.test).push_back(std::move(a));
  }
  return aux;
}

namespace {

std::string aux_to_json(const AuxInstance& a) {
  json j;
  j["id"] = a.id;
  j["x_audio"] = a.x_audio;
  j["label"] = noise_class_name(a.label);
  return j.dump();
}

AuxInstance aux_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    AuxInstance a;
    a.id = j.at("id").get<std::uint64_t>();
    a.x_audio = j.at("x_audio").get<std::vector<int>>();
    const auto label = j.at("label").get<std::string>();
    if (label == "low") a.label = NoiseClass::kLow;
    else if (label == "mid") a.label = NoiseClass::kMid;
    else if (label == "high") a.label = NoiseClass::kHigh;
    else throw ConfigError("unknown aux label '" + label + "'");
    return a;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed aux record: ") + e.what());
  }
}

}  // namespace

void write_aux(const AuxDataset& aux, const std::filesystem::path& dir) {
  ensure_dir(dir);
  std::vector<std::string> train, test;
  for (const auto& a : aux.train) train.push_back(aux_to_json(a));
  for (const auto& a : aux.test) test.push_back(aux_to_json(a));
  write_lines(dir / "aux_train.jsonl", train);
  write_lines(dir / "aux_test.jsonl", test);
}

AuxDataset read_aux(const std::filesystem::path& dir) {
  AuxDataset aux;
  for (const auto& l : read_lines(dir / "aux_train.jsonl")) aux.train.push_back(aux_from_json(l));
  for (const auto& l : read_lines(dir / "aux_test.jsonl")) aux.test.push_back(aux_from_json(l));
  return aux;
}

}  // namespace cord::task
