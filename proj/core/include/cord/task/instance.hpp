#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cord::task {

enum class Op : std::uint8_t { kAdd, kSub, kMul };

struct Step {
  Op op = Op::kAdd;
  int operand = 0;
  bool operator==(const Step&) const = default;
};

// Left-to-right program over Z_m: t_0 = initial, t_i = (t_{i-1} op_i b_i) mod m.
struct Program {
  int modulus = 7;
  int initial = 0;
  std::vector<Step> steps;
  bool operator==(const Program&) const = default;
};

struct SemanticInstance {
  Program program;
  std::vector<int> trace;  // t_1..t_n
  int answer = 0;          // t_n
};

inline constexpr int kMinModulus = 5;
inline constexpr int kMaxSteps = 8;

// Evaluates the program; throws ConfigError on an invalid program.
SemanticInstance evaluate(const Program& program);

// Random program with `length` steps over Z_modulus.
SemanticInstance generate_instance(int length, int modulus, std::uint64_t seed);

// "2 * 3 + 4 (mod 5)"; evaluation is left to right with reduction per step.
std::string program_string(const Program& program);
std::uint64_t program_hash(const Program& program);

// Text grammar: initial, (op, operand)*, MOD, modulus  -> 2n + 3 tokens.
std::vector<int> encode_text(const Program& program);
std::size_t text_length(std::size_t steps);
// Throws ConfigError on a malformed sequence.
Program decode_text(const std::vector<int>& tokens);

// trace..., ANSWER, answer, EOS
std::vector<int> render_target(const SemanticInstance& instance);

struct ParsedTarget {
  std::vector<int> trace;
  int answer = 0;
};
std::optional<ParsedTarget> parse_target(const std::vector<int>& tokens);

}  // namespace cord::task
