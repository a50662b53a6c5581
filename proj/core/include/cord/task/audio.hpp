#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace cord::task {

struct NoiseSpec {
  double p_sub = 0.0;   // frame replaced by one of its two confusables
  double p_dup = 0.0;   // frame repeated once more
  int frames_min = 1;   // frames emitted per symbol, uniform in [min, max]
  int frames_max = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Frame class of a text symbol (fixed bijection) and its inverse.
int frame_of(int text_symbol);
int symbol_of(int frame);
// The two designated confusables of a frame class.
std::array<int, 2> confusables(int frame);

// Expands each symbol of the text stream into frames, then applies
// substitution and duplication noise. Deterministic given noise.seed.
std::vector<int> encode_audio(const std::vector<int>& text_tokens, const NoiseSpec& noise);

// Noiseless frames carry one frame per symbol; collapsing runs of equal frames
// recovers the symbol stream whenever no substitution occurred.
std::vector<int> collapse_frames(const std::vector<int>& frames);

}  // namespace cord::task
