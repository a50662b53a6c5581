#pragma once

#include <span>
#include <vector>

#include "cord/model/params.hpp"

namespace cord::model {

// Key/value-cached autoregressive evaluation for sampling. Produces the same
// distributions as forward() up to floating-point reassociation.
template <typename Real>
class IncrementalDecoder {
 public:
  IncrementalDecoder(const ModelParams<Real>& params, const Condition& condition);

  // Next-token logits after the tokens pushed so far.
  std::span<const Real> logits() const { return logits_; }
  void push(int token);
  std::size_t generated() const { return generated_; }
  std::size_t remaining_context() const;

 private:
  void advance(std::span<const Real> embedding_row, std::size_t position);

  const ModelParams<Real>& params_;
  std::size_t position_ = 0;
  std::size_t generated_ = 0;
  std::vector<std::vector<Real>> keys_;    // per layer, [position * d]
  std::vector<std::vector<Real>> values_;
  std::vector<Real> logits_;
  // scratch
  std::vector<Real> x_, h_, q_, k_, v_, attn_, proj_, hidden_, scores_;
};

}  // namespace cord::model
