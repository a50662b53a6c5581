#include "cord/task/instance.hpp"

#include <sstream>

#include "cord/common/error.hpp"
#include "cord/common/rng.hpp"
#include "cord/task/vocab.hpp"

namespace cord::task {
namespace {

int apply(Op op, int lhs, int rhs, int modulus) {
  int v = 0;
  switch (op) {
    case Op::kAdd: v = lhs + rhs; break;
    case Op::kSub: v = lhs - rhs; break;
    case Op::kMul: v = lhs * rhs; break;
  }
  v %= modulus;
  return v < 0 ? v + modulus : v;
}

int op_token(Op op) {
  switch (op) {
    case Op::kAdd: return vocab::text::kPlus;
    case Op::kSub: return vocab::text::kMinus;
    case Op::kMul: return vocab::text::kTimes;
  }
  return vocab::text::kPlus;
}

void validate_range(int length, int modulus) {
  if (modulus < kMinModulus || modulus > vocab::kMaxModulus) {
    throw ConfigError("modulus must be in [5, 31], got " + std::to_string(modulus));
  }
  if (length < 1 || length > kMaxSteps) {
    throw ConfigError("program length must be in [1, 8], got " + std::to_string(length));
  }
}

}  // namespace

SemanticInstance evaluate(const Program& program) {
  validate_range(static_cast<int>(program.steps.size()), program.modulus);
  const int m = program.modulus;
  auto in_range = [m](int v) { return v >= 0 && v < m; };
  if (!in_range(program.initial)) throw ConfigError("initial operand outside Z_m");
  SemanticInstance out;
  out.program = program;
  int acc = program.initial;
  for (const Step& s : program.steps) {
    if (!in_range(s.operand)) throw ConfigError("operand outside Z_m");
    acc = apply(s.op, acc, s.operand, m);
    out.trace.push_back(acc);
  }
  out.answer = acc;
  return out;
}

SemanticInstance generate_instance(int length, int modulus, std::uint64_t seed) {
  validate_range(length, modulus);
  Rng rng(seed);
  const auto m = static_cast<std::uint64_t>(modulus);
  Program p;
  p.modulus = modulus;
  p.initial = static_cast<int>(rng.uniform_int(m));
  for (int i = 0; i < length; ++i) {
    Step s;
    s.op = static_cast<Op>(rng.uniform_int(3));
    s.operand = static_cast<int>(rng.uniform_int(m));
    p.steps.push_back(s);
  }
  return evaluate(p);
}

std::string program_string(const Program& program) {
  std::ostringstream out;
  out << program.initial;
  for (const Step& s : program.steps) {
    const char* sym = s.op == Op::kAdd ? "+" : s.op == Op::kSub ? "-" : "*";
    out << ' ' << sym << ' ' << s.operand;
  }
  out << " (mod " << program.modulus << ')';
  return out.str();
}

std::uint64_t program_hash(const Program& program) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(program.modulus));
  mix(static_cast<std::uint64_t>(program.initial));
  mix(program.steps.size());
  for (const Step& s : program.steps) {
    mix(static_cast<std::uint64_t>(s.op));
    mix(static_cast<std::uint64_t>(s.operand));
  }
  return h;
}

std::vector<int> encode_text(const Program& program) {
  std::vector<int> out;
  out.reserve(text_length(program.steps.size()));
  out.push_back(program.initial);
  for (const Step& s : program.steps) {
    out.push_back(op_token(s.op));
    out.push_back(s.operand);
  }
  out.push_back(vocab::text::kMod);
  out.push_back(program.modulus);
  return out;
}

std::size_t text_length(std::size_t steps) { return 2 * steps + 3; }

Program decode_text(const std::vector<int>& tokens) {
  if (tokens.size() < 5 || tokens.size() % 2 == 0) {
    throw ConfigError("text sequence has invalid length " + std::to_string(tokens.size()));
  }
  const std::size_t n = (tokens.size() - 3) / 2;
  if (tokens[tokens.size() - 2] != vocab::text::kMod) throw ConfigError("missing MOD marker");
  Program p;
  p.modulus = tokens.back();
  if (!vocab::is_digit(tokens[0])) throw ConfigError("initial token is not a digit");
  p.initial = tokens[0];
  for (std::size_t i = 0; i < n; ++i) {
    const int op = tokens[1 + 2 * i];
    const int operand = tokens[2 + 2 * i];
    Step s;
    if (op == vocab::text::kPlus) s.op = Op::kAdd;
    else if (op == vocab::text::kMinus) s.op = Op::kSub;
    else if (op == vocab::text::kTimes) s.op = Op::kMul;
    else throw ConfigError("expected operator token at position " + std::to_string(1 + 2 * i));
    if (!vocab::is_digit(operand)) throw ConfigError("expected digit operand");
    s.operand = operand;
    p.steps.push_back(s);
  }
  evaluate(p);  // range checks
  return p;
}

std::vector<int> render_target(const SemanticInstance& instance) {
  std::vector<int> out(instance.trace.begin(), instance.trace.end());
  out.push_back(vocab::out::kAnswer);
  out.push_back(instance.answer);
  out.push_back(vocab::out::kEos);
  return out;
}

std::optional<ParsedTarget> parse_target(const std::vector<int>& tokens) {
  ParsedTarget parsed;
  std::size_t i = 0;
  while (i < tokens.size() && vocab::is_digit(tokens[i])) parsed.trace.push_back(tokens[i++]);
  if (i + 3 != tokens.size()) return std::nullopt;
  if (tokens[i] != vocab::out::kAnswer || !vocab::is_digit(tokens[i + 1]) ||
      tokens[i + 2] != vocab::out::kEos) {
    return std::nullopt;
  }
  parsed.answer = tokens[i + 1];
  return parsed;
}

}  // namespace cord::task
