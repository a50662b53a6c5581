#include "cord/model/params.hpp"

#include <cmath>

#include "cord/common/error.hpp"
#include "cord/common/rng.hpp"

namespace cord::model {

void ModelConfig::validate() const {
  if (d_model == 0 || layers == 0 || heads == 0 || mlp_ratio == 0 || context == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
  if (text_vocab == 0 || audio_vocab == 0 || output_vocab < vocab::out::kSize) {
    throw ConfigError("vocabulary sizes inconsistent with task alphabets");
  }
  if (context < max_output + 3) {
    throw ConfigError("context budget " + std::to_string(context) +
                      " is smaller than the maximum sequence length " +
                      std::to_string(max_output + 3));
  }
}

const char* modality_name(Modality m) { return m == Modality::kText ? "text" : "audio"; }

namespace {

template <typename Real, typename Params, typename Fn>
void for_each_named(Params& p, Fn&& fn) {
  fn("text_embed", p.text_embed);
  fn("audio_embed", p.audio_embed);
  fn("modality_embed", p.modality_embed);
  fn("token_embed", p.token_embed);
  fn("pos_embed", p.pos_embed);
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    auto& b = p.blocks[l];
    const std::string pre = "block" + std::to_string(l) + ".";
    fn(pre + "ln1.gain", b.ln1_gain);
    fn(pre + "ln1.bias", b.ln1_bias);
    fn(pre + "attn.wq", b.wq);
    fn(pre + "attn.wk", b.wk);
    fn(pre + "attn.wv", b.wv);
    fn(pre + "attn.wo", b.wo);
    fn(pre + "ln2.gain", b.ln2_gain);
    fn(pre + "ln2.bias", b.ln2_bias);
    fn(pre + "mlp.w1", b.w1);
    fn(pre + "mlp.b1", b.b1);
    fn(pre + "mlp.w2", b.w2);
    fn(pre + "mlp.b2", b.b2);
  }
  fn("lnf.gain", p.lnf_gain);
  fn("lnf.bias", p.lnf_bias);
  fn("out_proj", p.out_proj);
  fn("out_bias", p.out_bias);
}

template <typename Real>
ModelParams<Real> shaped(const ModelConfig& c) {
  using T = Tensor<Real>;
  const std::size_t d = c.d_model, hd = c.mlp_ratio * c.d_model;
  ModelParams<Real> p;
  p.config = c;
  p.text_embed = T({c.text_vocab, d});
  p.audio_embed = T({c.audio_vocab, d});
  p.modality_embed = T({2, d});
  p.token_embed = T({c.output_vocab, d});
  p.pos_embed = T({c.context, d});
  for (std::size_t l = 0; l < c.layers; ++l) {
    BlockParams<Real> b;
    b.ln1_gain = T({d}, Real(1));
    b.ln1_bias = T({d});
    b.wq = T({d, d});
    b.wk = T({d, d});
    b.wv = T({d, d});
    b.wo = T({d, d});
    b.ln2_gain = T({d}, Real(1));
    b.ln2_bias = T({d});
    b.w1 = T({d, hd});
    b.b1 = T({hd});
    b.w2 = T({hd, d});
    b.b2 = T({d});
    p.blocks.push_back(std::move(b));
  }
  p.lnf_gain = T({d}, Real(1));
  p.lnf_bias = T({d});
  p.out_proj = T({d, c.output_vocab});
  p.out_bias = T({c.output_vocab});
  return p;
}

}  // namespace

template <typename Real>
std::vector<ad::ParamRef<Real>> ModelParams<Real>::named() {
  std::vector<ad::ParamRef<Real>> out;
  for_each_named<Real>(*this, [&](const std::string& n, Tensor<Real>& t) { out.push_back({n, &t}); });
  return out;
}

template <typename Real>
std::vector<std::pair<std::string, const Tensor<Real>*>> ModelParams<Real>::named() const {
  std::vector<std::pair<std::string, const Tensor<Real>*>> out;
  for_each_named<Real>(*this, [&](const std::string& n, const Tensor<Real>& t) { out.emplace_back(n, &t); });
  return out;
}

template <typename Real>
std::size_t ModelParams<Real>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : named()) total += t->numel();
  return total;
}

template <typename Real>
ModelParams<Real> ModelParams<Real>::zeros_like() const {
  ModelParams<Real> z = shaped<Real>(config);
  z.fill(Real(0));
  return z;
}

template <typename Real>
void ModelParams<Real>::fill(Real v) {
  for (auto& r : named()) r.value->fill(v);
}

template <typename Real>
void ModelParams<Real>::accumulate(const ModelParams& other) {
  auto mine = named();
  auto theirs = other.named();
  if (mine.size() != theirs.size()) throw ShapeError("accumulate: parameter sets differ");
  for (std::size_t k = 0; k < mine.size(); ++k) {
    auto& a = mine[k].value->data;
    const auto& b = theirs[k].second->data;
    if (a.size() != b.size()) throw ShapeError("accumulate: shape mismatch in " + mine[k].name);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  }
}

template <typename Real>
void ModelParams<Real>::scale(Real factor) {
  for (auto& r : named())
    for (auto& v : r.value->data) v *= factor;
}

template <typename Real>
double ModelParams<Real>::l2_norm() const {
  double total = 0;
  for (const auto& [name, t] : named())
    for (Real v : t->data) total += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(total);
}

template <typename Real>
bool ModelParams<Real>::operator==(const ModelParams& other) const {
  const auto a = named();
  const auto b = other.named();
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].first != b[k].first || a[k].second->shape != b[k].second->shape ||
        a[k].second->data != b[k].second->data) {
      return false;
    }
  }
  return true;
}

template <typename Real>
ModelParams<Real> init_params(const ModelConfig& config) {
  config.validate();
  ModelParams<Real> p = shaped<Real>(config);
  const double d = static_cast<double>(config.d_model);
  const double hd = static_cast<double>(config.mlp_ratio * config.d_model);
  const double residual = 1.0 / std::sqrt(2.0 * static_cast<double>(config.layers));
  std::uint64_t index = 0;
  for (auto& ref : p.named()) {
    const std::string& n = ref.name;
    Rng rng(derive_seed(config.seed, Stream::kInit, index++));
    double std = 0.0;
    if (n.ends_with("_embed")) std = 1.0 / std::sqrt(d);
    else if (n.ends_with("attn.wo")) std = residual / std::sqrt(d);
    else if (n.ends_with("mlp.w2")) std = residual / std::sqrt(hd);
    else if (n.ends_with(".wq") || n.ends_with(".wk") || n.ends_with(".wv") || n.ends_with("mlp.w1") ||
             n == "out_proj") std = 1.0 / std::sqrt(d);
    if (std == 0.0) continue;  // biases and LN parameters keep their fill
    for (auto& v : ref.value->data) v = static_cast<Real>(std * rng.normal());
  }
  return p;
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d_model, hd = c.mlp_ratio * c.d_model;
  const std::size_t embeddings = (c.text_vocab + c.audio_vocab + 2 + c.output_vocab + c.context) * d;
  const std::size_t block = 2 * d + 4 * d * d + 2 * d + d * hd + hd + hd * d + d;
  return embeddings + c.layers * block + 2 * d + d * c.output_vocab + c.output_vocab;
}

template <typename Real>
BoundParams<Real> bind_leaves(const ModelConfig& config, std::span<const ad::Var<Real>> leaves) {
  const std::size_t expected = 5 + 12 * config.layers + 4;
  if (leaves.size() != expected) {
    throw ShapeError("bind_leaves: expected " + std::to_string(expected) + " leaves, got " +
                     std::to_string(leaves.size()));
  }
  std::size_t k = 0;
  auto next = [&] { return leaves[k++]; };
  BoundParams<Real> b;
  b.config = &config;
  b.text_embed = next();
  b.audio_embed = next();
  b.modality_embed = next();
  b.token_embed = next();
  b.pos_embed = next();
  for (std::size_t l = 0; l < config.layers; ++l) {
    BoundBlock<Real> bb;
    bb.ln1_gain = next();
    bb.ln1_bias = next();
    bb.wq = next();
    bb.wk = next();
    bb.wv = next();
    bb.wo = next();
    bb.ln2_gain = next();
    bb.ln2_bias = next();
    bb.w1 = next();
    bb.b1 = next();
    bb.w2 = next();
    bb.b2 = next();
    b.blocks.push_back(bb);
  }
  b.lnf_gain = next();
  b.lnf_bias = next();
  b.out_proj = next();
  b.out_bias = next();
  return b;
}

template <typename Real>
BoundParams<Real> bind(ad::Graph<Real>& g, const ModelParams<Real>& p, ModelParams<Real>* grads) {
  auto leaf = [&](const Tensor<Real>& value, Tensor<Real>* sink) { return g.leaf(value, sink); };
  auto sink = [&](auto member) -> Tensor<Real>* { return grads ? &((*grads).*member) : nullptr; };
  BoundParams<Real> b;
  b.config = &p.config;
  b.text_embed = leaf(p.text_embed, sink(&ModelParams<Real>::text_embed));
  b.audio_embed = leaf(p.audio_embed, sink(&ModelParams<Real>::audio_embed));
  b.modality_embed = leaf(p.modality_embed, sink(&ModelParams<Real>::modality_embed));
  b.token_embed = leaf(p.token_embed, sink(&ModelParams<Real>::token_embed));
  b.pos_embed = leaf(p.pos_embed, sink(&ModelParams<Real>::pos_embed));
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    const auto& s = p.blocks[l];
    BlockParams<Real>* gb = grads ? &grads->blocks[l] : nullptr;
    auto bsink = [&](auto member) -> Tensor<Real>* { return gb ? &(gb->*member) : nullptr; };
    using B = BlockParams<Real>;
    BoundBlock<Real> bb;
    bb.ln1_gain = leaf(s.ln1_gain, bsink(&B::ln1_gain));
    bb.ln1_bias = leaf(s.ln1_bias, bsink(&B::ln1_bias));
    bb.wq = leaf(s.wq, bsink(&B::wq));
    bb.wk = leaf(s.wk, bsink(&B::wk));
    bb.wv = leaf(s.wv, bsink(&B::wv));
    bb.wo = leaf(s.wo, bsink(&B::wo));
    bb.ln2_gain = leaf(s.ln2_gain, bsink(&B::ln2_gain));
    bb.ln2_bias = leaf(s.ln2_bias, bsink(&B::ln2_bias));
    bb.w1 = leaf(s.w1, bsink(&B::w1));
    bb.b1 = leaf(s.b1, bsink(&B::b1));
    bb.w2 = leaf(s.w2, bsink(&B::w2));
    bb.b2 = leaf(s.b2, bsink(&B::b2));
    b.blocks.push_back(bb);
  }
  b.lnf_gain = leaf(p.lnf_gain, sink(&ModelParams<Real>::lnf_gain));
  b.lnf_bias = leaf(p.lnf_bias, sink(&ModelParams<Real>::lnf_bias));
  b.out_proj = leaf(p.out_proj, sink(&ModelParams<Real>::out_proj));
  b.out_bias = leaf(p.out_bias, sink(&ModelParams<Real>::out_bias));
  return b;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> init_params<float>(const ModelConfig&);
template ModelParams<double> init_params<double>(const ModelConfig&);
template BoundParams<float> bind<float>(ad::Graph<float>&, const ModelParams<float>&, ModelParams<float>*);
template BoundParams<double> bind<double>(ad::Graph<double>&, const ModelParams<double>&,
                                          ModelParams<double>*);
template BoundParams<float> bind_leaves<float>(const ModelConfig&, std::span<const ad::Var<float>>);
template BoundParams<double> bind_leaves<double>(const ModelConfig&,
                                                 std::span<const ad::Var<double>>);

}  // namespace cord::model
