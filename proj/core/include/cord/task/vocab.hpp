#pragma once

#include <cstddef>

// Token alphabets shared by the task generator, the policy model and the
// judge. Digits 0..30 cover every supported modulus.
namespace cord::vocab {

inline constexpr int kMaxModulus = 31;

// Text alphabet: digits, then operators and the modulus marker.
namespace text {
inline constexpr int kPlus = kMaxModulus;
inline constexpr int kMinus = kMaxModulus + 1;
inline constexpr int kTimes = kMaxModulus + 2;
inline constexpr int kMod = kMaxModulus + 3;
inline constexpr int kSize = kMaxModulus + 4;
}  // namespace text

// Audio alphabet: one frame class per text symbol, under a fixed permutation.
namespace audio {
inline constexpr int kSize = text::kSize;
}

// Output vocabulary of the decoder.
namespace out {
inline constexpr int kAnswer = kMaxModulus;
inline constexpr int kEos = kMaxModulus + 1;
inline constexpr int kSep = kMaxModulus + 2;
inline constexpr int kAuxSep = kMaxModulus + 3;
inline constexpr int kLabelLow = kMaxModulus + 4;
inline constexpr int kLabelMid = kMaxModulus + 5;
inline constexpr int kLabelHigh = kMaxModulus + 6;
inline constexpr int kSize = kMaxModulus + 7;
}  // namespace out

inline constexpr bool is_digit(int token) { return token >= 0 && token < kMaxModulus; }

}  // namespace cord::vocab
