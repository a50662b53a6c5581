#include "cord/model/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "cord/autodiff/ops.hpp"
#include "cord/common/error.hpp"
#include "cord/model/policy.hpp"

namespace cord::model {

template <typename Real>
IncrementalDecoder<Real>::IncrementalDecoder(const ModelParams<Real>& params,
                                             const Condition& condition)
    : params_(params) {
  const ModelConfig& c = params.config;
  validate_inputs(c, condition, {});
  const std::size_t d = c.d_model, hd = c.mlp_ratio * c.d_model;
  keys_.assign(c.layers, {});
  values_.assign(c.layers, {});
  for (std::size_t l = 0; l < c.layers; ++l) {
    keys_[l].reserve(c.context * d);
    values_[l].reserve(c.context * d);
  }
  x_.resize(d);
  h_.resize(d);
  q_.resize(d);
  k_.resize(d);
  v_.resize(d);
  attn_.resize(d);
  proj_.resize(d);
  hidden_.resize(hd);
  scores_.resize(c.context);
  logits_.resize(c.output_vocab);

  advance(params.modality_embed.row(static_cast<std::size_t>(condition.modality)), position_++);
  const Tensor<Real>& table =
      condition.modality == Modality::kText ? params.text_embed : params.audio_embed;
  for (int t : condition.tokens) advance(table.row(static_cast<std::size_t>(t)), position_++);
  advance(params.token_embed.row(static_cast<std::size_t>(condition.separator)), position_++);
}

template <typename Real>
std::size_t IncrementalDecoder<Real>::remaining_context() const {
  return params_.config.context - position_;
}

template <typename Real>
void IncrementalDecoder<Real>::push(int token) {
  const ModelConfig& c = params_.config;
  if (token < 0 || static_cast<std::size_t>(token) >= c.output_vocab) {
    throw ConfigError("decoder token " + std::to_string(token) + " outside output vocabulary");
  }
  if (position_ >= c.context) throw ConfigError("decoder exceeded context budget");
  advance(params_.token_embed.row(static_cast<std::size_t>(token)), position_++);
  ++generated_;
}

template <typename Real>
void IncrementalDecoder<Real>::advance(std::span<const Real> embedding_row, std::size_t position) {
  const ModelConfig& c = params_.config;
  const std::size_t d = c.d_model, heads = c.heads, dh = c.head_dim();
  const auto pos = params_.pos_embed.row(position);
  for (std::size_t i = 0; i < d; ++i) x_[i] = embedding_row[i] + pos[i];

  const Real inv_sqrt = Real(1) / std::sqrt(static_cast<Real>(dh));
  const Real eps = Real(1e-5);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const auto& b = params_.blocks[l];
    ad::kernels::layer_norm_row<Real>(x_, b.ln1_gain.data, b.ln1_bias.data, eps, h_);
    ad::kernels::vec_mat<Real>(h_, b.wq, q_);
    ad::kernels::vec_mat<Real>(h_, b.wk, k_);
    ad::kernels::vec_mat<Real>(h_, b.wv, v_);
    auto& keys = keys_[l];
    auto& vals = values_[l];
    keys.insert(keys.end(), k_.begin(), k_.end());
    vals.insert(vals.end(), v_.begin(), v_.end());
    const std::size_t n = position + 1;
    for (std::size_t hh = 0; hh < heads; ++hh) {
      const std::size_t off = hh * dh;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        Real s = 0;
        for (std::size_t e = 0; e < dh; ++e) s += q_[off + e] * keys[j * d + off + e];
        scores_[j] = s * inv_sqrt;
        mx = std::max(mx, scores_[j]);
      }
      Real total = 0;
      for (std::size_t j = 0; j < n; ++j) {
        scores_[j] = std::exp(scores_[j] - mx);
        total += scores_[j];
      }
      for (std::size_t e = 0; e < dh; ++e) attn_[off + e] = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const Real a = scores_[j] / total;
        for (std::size_t e = 0; e < dh; ++e) attn_[off + e] += a * vals[j * d + off + e];
      }
    }
    ad::kernels::vec_mat<Real>(attn_, b.wo, proj_);
    for (std::size_t i = 0; i < d; ++i) x_[i] += proj_[i];
    ad::kernels::layer_norm_row<Real>(x_, b.ln2_gain.data, b.ln2_bias.data, eps, h_);
    ad::kernels::vec_mat<Real>(h_, b.w1, hidden_);
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
      hidden_[i] = ad::kernels::gelu<Real>(hidden_[i] + b.b1.data[i]);
    }
    ad::kernels::vec_mat<Real>(hidden_, b.w2, proj_);
    for (std::size_t i = 0; i < d; ++i) x_[i] += proj_[i] + b.b2.data[i];
  }
  ad::kernels::layer_norm_row<Real>(x_, params_.lnf_gain.data, params_.lnf_bias.data, eps, h_);
  ad::kernels::vec_mat<Real>(h_, params_.out_proj, logits_);
  for (std::size_t i = 0; i < logits_.size(); ++i) logits_[i] += params_.out_bias.data[i];
}

template class IncrementalDecoder<float>;
template class IncrementalDecoder<double>;

}  // namespace cord::model
