// SPDX-License-Identifier: Apache-2.0

#include "rrcl/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rrcl/error.hpp"

namespace rrcl {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "linear") return Activation::linear;
  throw ContractError("unknown activation '" + s + "'");
}

void NetworkLayout::validate() const {
  if (input_shape.empty() || input_size() == 0) throw ContractError("layout: empty input shape");
  if (width == 0) throw ContractError("layout: width must be positive");
  if (blocks < 1) throw ContractError("layout: at least one residual block is required");
  if (classes < 1) throw ContractError("layout: classes must be positive");
}

namespace {

void check_dense(const Dense& d, std::size_t in, std::size_t out, const std::string& name) {
  const Shape w{out, in};
  const Shape b{out};
  if (d.weight.shape() != w || d.bias.shape() != b) {
    throw ShapeError(name + ": expected weight " + shape_string(w) + " and bias " +
                     shape_string(b) + ", got " + shape_string(d.weight.shape()) + " and " +
                     shape_string(d.bias.shape()));
  }
}

}  // namespace

Network::Network(NetworkLayout layout, Dense stem, std::vector<ResidualBlock> blocks, Dense head,
                 std::uint64_t seed)
    : layout_(std::move(layout)),
      stem_(std::move(stem)),
      blocks_(std::move(blocks)),
      head_(std::move(head)),
      seed_(seed) {
  layout_.validate();
  if (blocks_.size() != layout_.blocks) {
    throw ShapeError("network: layout declares " + std::to_string(layout_.blocks) +
                     " blocks, got " + std::to_string(blocks_.size()));
  }
  const std::size_t w = layout_.width;
  check_dense(stem_, layout_.input_size(), w, "stem");
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    check_dense(blocks_[i].inner, w, w, "block" + std::to_string(i) + ".inner");
    check_dense(blocks_[i].outer, w, w, "block" + std::to_string(i) + ".outer");
  }
  check_dense(head_, w, layout_.classes, "head");
  for (const Array* p : parameters()) require_finite(*p, "network parameter");
}

std::vector<std::string> Network::parameter_names() const {
  std::vector<std::string> names{"stem.weight", "stem.bias"};
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string b = "block" + std::to_string(i);
    names.push_back(b + ".inner.weight");
    names.push_back(b + ".inner.bias");
    names.push_back(b + ".outer.weight");
    names.push_back(b + ".outer.bias");
  }
  names.push_back("head.weight");
  names.push_back("head.bias");
  return names;
}

std::vector<const Array*> Network::parameters() const {
  std::vector<const Array*> out{&stem_.weight, &stem_.bias};
  for (const auto& b : blocks_) {
    out.push_back(&b.inner.weight);
    out.push_back(&b.inner.bias);
    out.push_back(&b.outer.weight);
    out.push_back(&b.outer.bias);
  }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::vector<Array*> Network::mutable_parameters() {
  std::vector<Array*> out{&stem_.weight, &stem_.bias};
  for (auto& b : blocks_) {
    out.push_back(&b.inner.weight);
    out.push_back(&b.inner.bias);
    out.push_back(&b.outer.weight);
    out.push_back(&b.outer.bias);
  }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::uint64_t Network::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Array* p : parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->data());
    for (std::size_t i = 0; i < p->size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

namespace {

Array affine(const Dense& d, std::span<const float> in) {
  const std::size_t rows = d.out_features();
  const std::size_t cols = d.in_features();
  Array out(Shape{rows});
  const float* w = d.weight.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = d.bias[r];
    const float* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += static_cast<double>(row[c]) * in[c];
    out[r] = static_cast<float>(acc);
  }
  return out;
}

Array activate(const Array& pre, Activation act) {
  if (act == Activation::linear) return pre;
  Array out = pre;
  for (auto& v : out.values()) v = v > 0.0f ? v : 0.0f;
  return out;
}

// Multiplies the upstream gradient by the activation derivative in place.
void activation_backward(std::vector<double>& g, const Array& pre, Activation act) {
  if (act == Activation::linear) return;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(pre[i] > 0.0f)) g[i] = 0.0;
  }
}

// Accumulates scale * g (x) in into dW and scale * g into db, then returns W^T g.
std::vector<double> affine_backward(const Dense& d, const std::vector<double>& g,
                                    std::span<const float> in, double* dw, double* db,
                                    double scale) {
  const std::size_t rows = d.out_features();
  const std::size_t cols = d.in_features();
  std::vector<double> back(cols, 0.0);
  const float* w = d.weight.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const float* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) back[c] += gr * row[c];
    if (dw) {
      double* dwr = dw + r * cols;
      const double sg = scale * gr;
      for (std::size_t c = 0; c < cols; ++c) dwr[c] += sg * in[c];
      db[r] += sg;
    }
  }
  return back;
}

void add_into(std::vector<double>& acc, const Array& a) {
  if (a.empty()) return;
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += a[i];
}

using Accumulators = std::vector<std::vector<double>>;

Accumulators make_accumulators(const Network& net) {
  Accumulators acc;
  for (const Array* p : net.parameters()) acc.emplace_back(p->size(), 0.0);
  return acc;
}

// Reverse pass through a cached trace. When `acc` is non-null, parameter
// gradients scaled by `scale` are added to it. Returns d(loss)/d(input).
Array backward(const Network& net, const ForwardTrace& trace, const TraceGradient& up,
               Accumulators* acc, double scale) {
  const auto& layout = net.layout();
  const std::size_t n = net.block_count();
  const std::size_t w = layout.width;
  if (!up.d_features.empty() && up.d_features.size() != n) {
    throw ShapeError("trace gradient: expected " + std::to_string(n) + " feature gradients");
  }
  auto feature_grad = [&](std::size_t i) -> const Array& {
    static const Array none;
    return up.d_features.empty() ? none : up.d_features[i];
  };
  auto slot = [&](std::size_t k) -> double* { return acc ? (*acc)[k].data() : nullptr; };
  const std::size_t head_slot = 2 + 4 * n;

  std::vector<double> g(w, 0.0);
  if (!up.d_logits.empty()) {
    std::vector<double> dl(up.d_logits.values().begin(), up.d_logits.values().end());
    g = affine_backward(net.head(), dl, trace.features[n - 1].values(), slot(head_slot),
                        slot(head_slot + 1), scale);
  }
  add_into(g, feature_grad(n - 1));

  for (std::size_t bi = n; bi-- > 0;) {
    const ResidualBlock& block = net.blocks()[bi];
    const Array& in = bi == 0 ? trace.stem_out : trace.features[bi - 1];
    const std::size_t k = 2 + 4 * bi;
    std::vector<double> g_hidden = affine_backward(block.outer, g, trace.block_hidden[bi].values(),
                                                   slot(k + 2), slot(k + 3), scale);
    activation_backward(g_hidden, trace.block_pre[bi], layout.activation);
    std::vector<double> g_in =
        affine_backward(block.inner, g_hidden, in.values(), slot(k), slot(k + 1), scale);
    for (std::size_t i = 0; i < w; ++i) g[i] += g_in[i];
    if (bi > 0) add_into(g, feature_grad(bi - 1));
  }

  activation_backward(g, trace.stem_pre, layout.activation);
  std::vector<double> gx =
      affine_backward(net.stem(), g, trace.input.values(), slot(0), slot(1), scale);
  Array dx(trace.input.shape());
  for (std::size_t i = 0; i < gx.size(); ++i) {
    const double v = gx[i] + (up.d_input.empty() ? 0.0 : up.d_input[i]);
    dx[i] = static_cast<float>(v);
  }
  return dx;
}

}  // namespace

ForwardTrace forward_with_features(const Network& net, const Array& x) {
  const auto& layout = net.layout();
  if (x.shape() != layout.input_shape) {
    throw ShapeError("forward: input shape " + shape_string(x.shape()) +
                     " does not match network input " + shape_string(layout.input_shape));
  }
  require_finite(x, "forward input");
  ForwardTrace t;
  t.input = x;
  t.stem_pre = affine(net.stem(), x.values());
  t.stem_out = activate(t.stem_pre, layout.activation);
  const Array* h = &t.stem_out;
  for (const auto& block : net.blocks()) {
    t.block_pre.push_back(affine(block.inner, h->values()));
    t.block_hidden.push_back(activate(t.block_pre.back(), layout.activation));
    Array out = affine(block.outer, t.block_hidden.back().values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*h)[i];
    t.features.push_back(std::move(out));
    h = &t.features.back();
  }
  t.logits = affine(net.head(), h->values());
  require_finite(t.logits, "forward logits");
  return t;
}

InputGradient value_and_grad_wrt_input(const Network& net, const Array& x, const TraceLoss& loss) {
  const ForwardTrace trace = forward_with_features(net, x);
  LossValue lv = loss(trace);
  if (!std::isfinite(lv.value)) throw NumericError("input gradient: loss is not finite");
  InputGradient out;
  out.loss = lv.value;
  out.grad = backward(net, trace, lv.grad, nullptr, 1.0);
  require_finite(out.grad, "input gradient");
  return out;
}

Array grad_wrt_input(const Network& net, const Array& x, const TraceLoss& loss) {
  return value_and_grad_wrt_input(net, x, loss).grad;
}

namespace {

// Softmax cross-entropy of one sample; writes d(loss)/d(logits) into `dl`.
double softmax_xent(const Array& logits, int label, Array& dl) {
  const std::size_t c = logits.size();
  if (label < 0 || static_cast<std::size_t>(label) >= c) {
    throw ContractError("cross-entropy: label " + std::to_string(label) + " outside [0, " +
                        std::to_string(c) + ")");
  }
  double mx = logits[0];
  for (std::size_t i = 1; i < c; ++i) mx = std::max<double>(mx, logits[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < c; ++i) z += std::exp(static_cast<double>(logits[i]) - mx);
  const double lse = mx + std::log(z);
  dl = Array(Shape{c});
  for (std::size_t i = 0; i < c; ++i) {
    dl[i] = static_cast<float>(std::exp(static_cast<double>(logits[i]) - lse));
  }
  dl[static_cast<std::size_t>(label)] -= 1.0f;
  return lse - logits[static_cast<std::size_t>(label)];
}

}  // namespace

ParameterGradients grad_wrt_params(const Network& net, std::span<const Sample> batch) {
  if (batch.empty()) throw ContractError("parameter gradient: empty batch");
  Accumulators acc = make_accumulators(net);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const Sample& s : batch) {
    const ForwardTrace trace = forward_with_features(net, s.x);
    TraceGradient up;
    total += softmax_xent(trace.logits, s.label, up.d_logits);
    backward(net, trace, up, &acc, scale);
  }
  ParameterGradients out;
  out.loss = total * scale;
  if (!std::isfinite(out.loss)) throw NumericError("parameter gradient: loss is not finite");
  const auto params = net.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Array g(params[k]->shape());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(acc[k][i]);
    require_finite(g, "parameter gradient");
    out.grads.push_back(std::move(g));
  }
  return out;
}

double cross_entropy(const Network& net, std::span<const Sample> batch) {
  if (batch.empty()) throw ContractError("cross-entropy: empty batch");
  double total = 0.0;
  Array scratch;
  for (const Sample& s : batch) {
    total += softmax_xent(forward_with_features(net, s.x).logits, s.label, scratch);
  }
  return total / static_cast<double>(batch.size());
}

void sgd_step(std::span<Array* const> params, std::span<const Array> grads, float lr,
              float momentum, std::vector<Array>& velocity) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (!(lr > 0.0f) || !(momentum >= 0.0f && momentum < 1.0f)) {
    throw ContractError("sgd: lr must be positive and momentum in [0, 1)");
  }
  if (velocity.empty()) {
    for (const Array& g : grads) velocity.emplace_back(g.shape());
  }
  if (velocity.size() != params.size()) throw ShapeError("sgd: velocity state has wrong arity");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same_shape(*params[k], grads[k], "sgd parameter/gradient");
    require_same_shape(*params[k], velocity[k], "sgd parameter/velocity");
  }
  // Validate before mutating so a failed step leaves the state untouched.
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Array& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float v = momentum * velocity[k][i] + grads[k][i];
      if (!std::isfinite(v) || !std::isfinite(p[i] - lr * v)) {
        throw NumericError("sgd: non-finite update in parameter " + std::to_string(k));
      }
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Array& p = *params[k];
    Array& v = velocity[k];
    const Array& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum * v[i] + g[i];
      p[i] -= lr * v[i];
    }
  }
}

Network init_xavier(const NetworkLayout& layout, std::uint64_t seed) {
  layout.validate();
  std::mt19937_64 rng(seed);
  auto dense = [&](std::size_t in, std::size_t out) {
    const float bound = static_cast<float>(std::sqrt(6.0 / static_cast<double>(in + out)));
    std::uniform_real_distribution<float> dist(-bound, bound);
    Dense d{Array(Shape{out, in}), Array(Shape{out})};
    for (auto& v : d.weight.values()) v = dist(rng);
    return d;
  };
  Dense stem = dense(layout.input_size(), layout.width);
  std::vector<ResidualBlock> blocks;
  for (std::size_t i = 0; i < layout.blocks; ++i) {
    Dense inner = dense(layout.width, layout.width);
    Dense outer = dense(layout.width, layout.width);
    blocks.push_back({std::move(inner), std::move(outer)});
  }
  Dense head = dense(layout.width, layout.classes);
  return Network(layout, std::move(stem), std::move(blocks), std::move(head), seed);
}

std::size_t argmax(std::span<const float> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

}  // namespace rrcl
