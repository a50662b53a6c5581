#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cord/task/audio.hpp"
#include "cord/task/instance.hpp"

namespace cord::task {

enum class Split : std::uint8_t { kTrain, kVal, kTest };
const char* split_name(Split split);

// Semantically equivalent text and audio renderings of one instance.
struct ModalPair {
  std::uint64_t id = 0;
  SemanticInstance instance;
  std::vector<int> x_text;
  std::vector<int> x_audio;
  std::vector<int> target;
  Split split = Split::kTrain;
};

ModalPair make_pair(std::uint64_t id, const SemanticInstance& instance, const NoiseSpec& noise,
                    Split split = Split::kTrain);

struct DatasetSpec {
  std::size_t n = 20000;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  int modulus = 7;
  int min_steps = 1;
  int max_steps = 4;
  NoiseSpec noise{0.02, 0.0, 1, 1, 0};
  std::uint64_t seed = 0;

  void validate() const;
};

struct Dataset {
  std::vector<ModalPair> train;
  std::vector<ModalPair> val;
  std::vector<ModalPair> test;

  const std::vector<ModalPair>& split(Split s) const;
  std::size_t size() const { return train.size() + val.size() + test.size(); }
};

// Distinct programs (by hash) across all splits; deterministic given spec.seed.
Dataset generate_dataset(const DatasetSpec& spec);

// train.jsonl / val.jsonl / test.jsonl under dir.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

std::string pair_to_json(const ModalPair& pair);
ModalPair pair_from_json(const std::string& line);

// Auxiliary audio-only task: classify the noise level of an utterance.
enum class NoiseClass : std::uint8_t { kLow, kMid, kHigh };
const char* noise_class_name(NoiseClass c);
int label_token(NoiseClass c);
NoiseSpec noise_for_class(NoiseClass c, std::uint64_t seed);

struct AuxInstance {
  std::uint64_t id = 0;
  std::vector<int> x_audio;
  NoiseClass label = NoiseClass::kLow;
};

struct AuxDataset {
  std::vector<AuxInstance> train;
  std::vector<AuxInstance> test;
};

// Labels cycle low/mid/high so classes are balanced; test_fraction of the
// records (rounded) go to the test split.
AuxDataset generate_aux(std::size_t n, std::uint64_t seed, int modulus = 7, int max_steps = 4,
                        double test_fraction = 0.2);
void write_aux(const AuxDataset& aux, const std::filesystem::path& dir);
AuxDataset read_aux(const std::filesystem::path& dir);

}  // namespace cord::task
