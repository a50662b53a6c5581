#include "cord/task/audio.hpp"

#include "cord/common/error.hpp"
#include "cord/common/rng.hpp"
#include "cord/task/vocab.hpp"

namespace cord::task {
namespace {

// Multiplier coprime with the alphabet size; gives a fixed non-identity bijection.
constexpr int kScramble = 8;
constexpr int kShift = 3;
static_assert(vocab::audio::kSize == 35);

constexpr std::array<int, vocab::audio::kSize> make_inverse() {
  std::array<int, vocab::audio::kSize> inv{};
  for (int s = 0; s < vocab::text::kSize; ++s) inv[(s * kScramble + kShift) % vocab::audio::kSize] = s;
  return inv;
}
constexpr auto kInverse = make_inverse();

std::array<int, 2> confusable_symbols(int symbol) {
  using namespace vocab::text;
  if (vocab::is_digit(symbol)) {
    const int m = vocab::kMaxModulus;
    return {(symbol + 1) % m, (symbol + m - 1) % m};
  }
  switch (symbol) {
    case kPlus: return {kMinus, kTimes};
    case kMinus: return {kPlus, kTimes};
    case kTimes: return {kPlus, kMinus};
    default: return {kPlus, kMinus};  // kMod
  }
}

}  // namespace

void NoiseSpec::validate() const {
  if (p_sub < 0.0 || p_sub > 1.0 || p_dup < 0.0 || p_dup > 1.0) {
    throw ConfigError("noise probabilities must lie in [0, 1]");
  }
  if (frames_min < 1 || frames_max > 3 || frames_min > frames_max) {
    throw ConfigError("frames per symbol must satisfy 1 <= min <= max <= 3");
  }
}

int frame_of(int text_symbol) {
  if (text_symbol < 0 || text_symbol >= vocab::text::kSize) {
    throw ConfigError("text symbol out of range: " + std::to_string(text_symbol));
  }
  return (text_symbol * kScramble + kShift) % vocab::audio::kSize;
}

int symbol_of(int frame) {
  if (frame < 0 || frame >= vocab::audio::kSize) {
    throw ConfigError("audio frame out of range: " + std::to_string(frame));
  }
  return kInverse[static_cast<std::size_t>(frame)];
}

std::array<int, 2> confusables(int frame) {
  const auto s = confusable_symbols(symbol_of(frame));
  return {frame_of(s[0]), frame_of(s[1])};
}

std::vector<int> encode_audio(const std::vector<int>& text_tokens, const NoiseSpec& noise) {
  noise.validate();
  Rng rng(noise.seed);
  const auto span = static_cast<std::uint64_t>(noise.frames_max - noise.frames_min + 1);
  std::vector<int> frames;
  frames.reserve(text_tokens.size() * static_cast<std::size_t>(noise.frames_max) * 2);
  for (int symbol : text_tokens) {
    const int clean = frame_of(symbol);
    const int count = noise.frames_min + static_cast<int>(span > 1 ? rng.uniform_int(span) : 0);
    for (int k = 0; k < count; ++k) {
      int frame = clean;
      if (noise.p_sub > 0.0 && rng.bernoulli(noise.p_sub)) {
        frame = confusables(clean)[rng.uniform_int(2)];
      }
      frames.push_back(frame);
      if (noise.p_dup > 0.0 && rng.bernoulli(noise.p_dup)) frames.push_back(frame);
    }
  }
  return frames;
}

std::vector<int> collapse_frames(const std::vector<int>& frames) {
  std::vector<int> out;
  for (int f : frames) {
    if (out.empty() || out.back() != f) out.push_back(f);
  }
  return out;
}

}  // namespace cord::task
