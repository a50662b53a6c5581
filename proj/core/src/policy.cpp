#include "cord/model/policy.hpp"

#include <cmath>
#include <numeric>

#include "cord/common/error.hpp"

namespace cord::model {

void validate_inputs(const ModelConfig& config, const Condition& condition,
                     std::span<const int> prefix) {
  const std::size_t alphabet =
      condition.modality == Modality::kText ? config.text_vocab : config.audio_vocab;
  if (condition.tokens.empty()) throw ConfigError("condition must contain at least one token");
  for (int t : condition.tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= alphabet) {
      throw ConfigError(std::string("token ") + std::to_string(t) + " outside the " +
                        modality_name(condition.modality) + " alphabet");
    }
  }
  auto in_output = [&](int t) { return t >= 0 && static_cast<std::size_t>(t) < config.output_vocab; };
  if (!in_output(condition.separator)) throw ConfigError("separator outside output vocabulary");
  for (int t : prefix) {
    if (!in_output(t)) throw ConfigError("prefix token " + std::to_string(t) + " outside output vocabulary");
  }
  const std::size_t length = condition.tokens.size() + 2 + prefix.size();
  if (length > config.context) {
    throw ConfigError("sequence length " + std::to_string(length) + " exceeds context budget " +
                      std::to_string(config.context));
  }
}

template <typename Real>
ad::Var<Real> forward_logprobs(ad::Graph<Real>& g, const BoundParams<Real>& p,
                               const Condition& condition, std::span<const int> prefix) {
  using namespace ad;
  if (p.config == nullptr || p.token_embed.graph() != &g) {
    throw Error("forward_logprobs: parameters are not bound to this graph");
  }
  const ModelConfig& cfg = *p.config;
  validate_inputs(cfg, condition, prefix);
  const std::size_t n = condition.tokens.size();
  const std::size_t total = n + 2 + prefix.size();

  const int tag = static_cast<int>(condition.modality);
  std::vector<int> outputs;
  outputs.reserve(prefix.size() + 1);
  outputs.push_back(condition.separator);
  outputs.insert(outputs.end(), prefix.begin(), prefix.end());
  const Var<Real> input_table =
      condition.modality == Modality::kText ? p.text_embed : p.audio_embed;
  const std::vector<Var<Real>> parts{
      gather_rows(p.modality_embed, std::span<const int>(&tag, 1)),
      gather_rows(input_table, std::span<const int>(condition.tokens)),
      gather_rows(p.token_embed, std::span<const int>(outputs))};
  std::vector<int> positions(total);
  std::iota(positions.begin(), positions.end(), 0);
  Var<Real> x = add(concat_rows<Real>(parts), gather_rows(p.pos_embed, std::span<const int>(positions)));

  const std::size_t heads = cfg.heads, dh = cfg.head_dim();
  const Real inv_sqrt = Real(1) / std::sqrt(static_cast<Real>(dh));
  for (const auto& b : p.blocks) {
    const Var<Real> h = layer_norm(x, b.ln1_gain, b.ln1_bias);
    const Var<Real> q = matmul(h, b.wq);
    const Var<Real> k = matmul(h, b.wk);
    const Var<Real> v = matmul(h, b.wv);
    std::vector<Var<Real>> head_out;
    head_out.reserve(heads);
    for (std::size_t hh = 0; hh < heads; ++hh) {
      const Var<Real> qh = slice_cols(q, hh * dh, dh);
      const Var<Real> kh = slice_cols(k, hh * dh, dh);
      const Var<Real> vh = slice_cols(v, hh * dh, dh);
      const Var<Real> attn = causal_softmax(scale(matmul_bt(qh, kh), inv_sqrt));
      head_out.push_back(matmul(attn, vh));
    }
    x = add(x, matmul(concat_cols<Real>(head_out), b.wo));
    const Var<Real> h2 = layer_norm(x, b.ln2_gain, b.ln2_bias);
    const Var<Real> hidden = gelu(add_row(matmul(h2, b.w1), b.b1));
    x = add(x, add_row(matmul(hidden, b.w2), b.b2));
  }
  const Var<Real> tail = slice_rows(x, n + 1, prefix.size() + 1);
  const Var<Real> logits =
      add_row(matmul(layer_norm(tail, p.lnf_gain, p.lnf_bias), p.out_proj), p.out_bias);
  return log_softmax(logits);
}

template <typename Real>
Tensor<Real> forward(const ModelParams<Real>& params, const Condition& condition,
                     std::span<const int> prefix) {
  ad::Graph<Real> g(false);
  const BoundParams<Real> bound = bind<Real>(g, params, nullptr);
  return forward_logprobs(g, bound, condition, prefix).value();
}

template <typename Real>
ad::Var<Real> sequence_logprob(ad::Graph<Real>& g, const BoundParams<Real>& p,
                               const Condition& condition, std::span<const int> y) {
  if (y.empty()) throw ConfigError("sequence_logprob: empty output sequence");
  const ad::Var<Real> lp = forward_logprobs(g, p, condition, y.first(y.size() - 1));
  return ad::sum(ad::pick(lp, y));
}

template <typename Real>
Real sequence_logprob(const ModelParams<Real>& params, const Condition& condition,
                      std::span<const int> y) {
  ad::Graph<Real> g(false);
  const BoundParams<Real> bound = bind<Real>(g, params, nullptr);
  return sequence_logprob(g, bound, condition, y).item();
}

#define CORD_INSTANTIATE_POLICY(Real)                                                            \
  template ad::Var<Real> forward_logprobs(ad::Graph<Real>&, const BoundParams<Real>&,            \
                                          const Condition&, std::span<const int>);               \
  template Tensor<Real> forward(const ModelParams<Real>&, const Condition&, std::span<const int>); \
  template ad::Var<Real> sequence_logprob(ad::Graph<Real>&, const BoundParams<Real>&,            \
                                          const Condition&, std::span<const int>);               \
  template Real sequence_logprob(const ModelParams<Real>&, const Condition&, std::span<const int>);

CORD_INSTANTIATE_POLICY(float)
CORD_INSTANTIATE_POLICY(double)

}  // namespace cord::model
