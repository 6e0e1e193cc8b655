// SPDX-License-Identifier: Apache-2.0
//
// Small dense residual classifier with hand-written reverse mode.
//
//   h0      = act(W_s x + b_s)
//   h_i     = h_{i-1} + W2_i act(W1_i h_{i-1} + b1_i) + b2_i     i = 1..n
//   logits  = W_h h_n + b_h
//
// Pooling over a dense feature vector is the identity, so the head reads h_n
// directly. Every block output h_i is exposed as a feature tensor.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rrcl/array.hpp"
#include "rrcl/sample.hpp"

namespace rrcl {

enum class Activation { relu, linear };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

struct NetworkLayout {
  Shape input_shape;
  std::size_t width = 32;
  std::size_t blocks = 2;
  std::size_t classes = 2;
  Activation activation = Activation::relu;

  std::size_t input_size() const { return shape_size(input_shape); }
  // Throws ContractError on an unusable layout.
  void validate() const;

  friend bool operator==(const NetworkLayout&, const NetworkLayout&) = default;
};

struct Dense {
  Array weight;  // (out, in)
  Array bias;    // (out)

  std::size_t in_features() const { return weight.shape()[1]; }
  std::size_t out_features() const { return weight.shape()[0]; }

  friend bool operator==(const Dense&, const Dense&) = default;
};

struct ResidualBlock {
  Dense inner;
  Dense outer;

  friend bool operator==(const ResidualBlock&, const ResidualBlock&) = default;
};

class Network {
 public:
  Network() = default;
  Network(NetworkLayout layout, Dense stem, std::vector<ResidualBlock> blocks, Dense head,
          std::uint64_t seed = 0);

  const NetworkLayout& layout() const { return layout_; }
  std::size_t block_count() const { return blocks_.size(); }
  std::size_t classes() const { return layout_.classes; }
  std::uint64_t seed() const { return seed_; }

  const Dense& stem() const { return stem_; }
  const std::vector<ResidualBlock>& blocks() const { return blocks_; }
  const Dense& head() const { return head_; }
  Dense& stem() { return stem_; }
  std::vector<ResidualBlock>& blocks() { return blocks_; }
  Dense& head() { return head_; }

  // Fixed parameter order shared by names, gradients and checkpoints.
  std::vector<std::string> parameter_names() const;
  std::vector<const Array*> parameters() const;
  std::vector<Array*> mutable_parameters();

  // FNV-1a over every parameter's bytes.
  std::uint64_t checksum() const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  NetworkLayout layout_;
  Dense stem_;
  std::vector<ResidualBlock> blocks_;
  Dense head_;
  std::uint64_t seed_ = 0;
};

struct ForwardTrace {
  std::vector<Array> features;  // one per residual block, shape (width)
  Array logits;                 // shape (classes)

  // Cached for the backward pass.
  Array input;
  Array stem_pre;
  Array stem_out;
  std::vector<Array> block_pre;     // inner pre-activations
  std::vector<Array> block_hidden;  // inner post-activations
};

ForwardTrace forward_with_features(const Network& net, const Array& x);

// Upstream gradient of a scalar loss with respect to the observable parts of a
// trace. Empty arrays (or an empty features list) mean "zero".
struct TraceGradient {
  Array d_input;
  std::vector<Array> d_features;
  Array d_logits;
};

struct LossValue {
  double value = 0.0;
  TraceGradient grad;
};

// A scalar loss over a forward trace together with its partial derivatives.
using TraceLoss = std::function<LossValue(const ForwardTrace&)>;

struct InputGradient {
  double loss = 0.0;
  Array grad;
};

InputGradient value_and_grad_wrt_input(const Network& net, const Array& x, const TraceLoss& loss);
Array grad_wrt_input(const Network& net, const Array& x, const TraceLoss& loss);

struct ParameterGradients {
  double loss = 0.0;        // mean cross-entropy
  std::vector<Array> grads; // aligned with Network::parameters()
};

// Mean softmax cross-entropy over the batch and its parameter gradient.
ParameterGradients grad_wrt_params(const Network& net, std::span<const Sample> batch);

double cross_entropy(const Network& net, std::span<const Sample> batch);

// v <- momentum * v + g ; p <- p - lr * v. Velocity is zero-initialised on
// first use.
void sgd_step(std::span<Array* const> params, std::span<const Array> grads, float lr,
              float momentum, std::vector<Array>& velocity);

// Xavier-uniform weights, zero biases.
Network init_xavier(const NetworkLayout& layout, std::uint64_t seed);

// Index of the largest logit; ties go to the lowest index.
std::size_t argmax(std::span<const float> logits);

}  // namespace rrcl
