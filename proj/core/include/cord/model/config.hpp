#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cord/task/vocab.hpp"

namespace cord::model {

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t context = 256;     // positions available to condition + output
  std::size_t max_output = 200;  // generated tokens per rollout
  std::size_t text_vocab = vocab::text::kSize;
  std::size_t audio_vocab = vocab::audio::kSize;
  std::size_t output_vocab = vocab::out::kSize;
  std::uint64_t seed = 0;

  // Throws ConfigError; the context must hold tag, separator, at least one
  // condition token and max_output generated tokens.
  void validate() const;
  std::size_t head_dim() const { return d_model / heads; }
  std::size_t max_condition() const { return context - max_output - 2; }
};

enum class Modality : std::uint8_t { kText = 0, kAudio = 1 };
const char* modality_name(Modality m);

// Input x: tokens over the modality's alphabet. The separator is an output
// vocabulary token that opens the answer region (task selector).
struct Condition {
  Modality modality = Modality::kText;
  std::vector<int> tokens;
  int separator = vocab::out::kSep;
};

}  // namespace cord::model
