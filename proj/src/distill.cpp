// SPDX-License-Identifier: Apache-2.0

#include "rrcl/distill.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "rrcl/error.hpp"
#include "rrcl/image_io.hpp"
#include "rrcl/rng.hpp"

namespace rrcl {

std::vector<double> DistillConfig::betas_for(std::size_t blocks) const {
  if (betas.empty()) return std::vector<double>(blocks, 1.0);
  return betas;
}

void DistillConfig::validate(std::size_t blocks) const {
  if (!betas.empty() && betas.size() != blocks) {
    throw ContractError("distill: " + std::to_string(betas.size()) + " betas for a " +
                        std::to_string(blocks) + "-block network");
  }
  bool any_positive = alpha > 0.0 || gamma > 0.0;
  for (double b : betas_for(blocks)) {
    if (!(b >= 0.0)) throw ContractError("distill: betas must be non-negative");
    any_positive = any_positive || b > 0.0;
  }
  if (!(alpha >= 0.0) || !(gamma >= 0.0)) throw ContractError("distill: alpha and gamma must be non-negative");
  if (!any_positive) throw ContractError("distill: at least one loss weight must be positive");
  if (!(eta > 0.0)) throw ContractError("distill: eta must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("distill: momentum must lie in [0, 1)");
  if (steps < 1) throw ContractError("distill: steps must be positive");
}

double loss_input(const Array& x, const Array& target, double alpha) {
  require_same_shape(x, target, "input loss");
  return alpha * squared_distance(x.values(), target.values());
}

namespace {

double feature_term(const ForwardTrace& a, const ForwardTrace& b, std::span<const double> betas) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    if (betas[i] == 0.0) continue;
    acc += betas[i] * squared_distance(a.features[i].values(), b.features[i].values());
  }
  return acc;
}

void check_betas(const Network& net, std::span<const double> betas) {
  if (betas.size() != net.block_count()) {
    throw ContractError("feature loss: " + std::to_string(betas.size()) + " betas for " +
                        std::to_string(net.block_count()) + " blocks");
  }
}

}  // namespace

double loss_feature(const Network& net, const Array& x, const Array& target,
                    std::span<const double> betas) {
  check_betas(net, betas);
  require_same_shape(x, target, "feature loss");
  return feature_term(forward_with_features(net, x), forward_with_features(net, target), betas);
}

double loss_prediction(const Network& net, const Array& x, const Array& target, double gamma) {
  require_same_shape(x, target, "prediction loss");
  const auto zx = forward_with_features(net, x).logits;
  const auto zt = forward_with_features(net, target).logits;
  return gamma * squared_distance(zx.values(), zt.values());
}

double total_loss(const Network& net, const Array& x, const Array& target, const DistillConfig& cfg) {
  cfg.validate(net.block_count());
  const auto betas = cfg.betas_for(net.block_count());
  return loss_input(x, target, cfg.alpha) + loss_feature(net, x, target, betas) +
         loss_prediction(net, x, target, cfg.gamma);
}

double distill_learning_rate(const DistillConfig& cfg, int step) {
  if (!cfg.anneal) return cfg.eta;
  return cfg.eta * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(cfg.steps)));
}

namespace {

// The three-space objective toward a fixed target. The target's trace is
// computed once and reused every step.
class Objective {
 public:
  Objective(const Network& net, const Array& target, const DistillConfig& cfg)
      : target_(target),
        target_trace_(forward_with_features(net, target)),
        alpha_(cfg.alpha),
        betas_(cfg.betas_for(net.block_count())),
        gamma_(cfg.gamma) {}

  LossValue operator()(const ForwardTrace& t) const {
    LossValue lv;
    const double li = alpha_ * squared_distance(t.input.values(), target_.values());
    const double lf = feature_term(t, target_trace_, betas_);
    const double lp = gamma_ * squared_distance(t.logits.values(), target_trace_.logits.values());
    lv.value = li + lf + lp;

    lv.grad.d_input = scaled_difference(t.input, target_, 2.0 * alpha_);
    for (std::size_t i = 0; i < t.features.size(); ++i) {
      lv.grad.d_features.push_back(
          scaled_difference(t.features[i], target_trace_.features[i], 2.0 * betas_[i]));
    }
    lv.grad.d_logits = scaled_difference(t.logits, target_trace_.logits, 2.0 * gamma_);
    return lv;
  }

 private:
  static Array scaled_difference(const Array& a, const Array& b, double k) {
    Array out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
      out[i] = static_cast<float>(k * (static_cast<double>(a[i]) - b[i]));
    }
    return out;
  }

  const Array& target_;
  ForwardTrace target_trace_;
  double alpha_;
  std::vector<double> betas_;
  double gamma_;
};

Array optimise(const Network& net, Array x, const Array& target, const DistillConfig& cfg,
               const DistillObserver& observer) {
  cfg.validate(net.block_count());
  require_same_shape(x, target, "distill source/target");
  const Objective objective(net, target, cfg);
  const TraceLoss loss = std::cref(objective);
  std::vector<Array> velocity;
  Array* params[] = {&x};
  for (int s = 0; s < cfg.steps; ++s) {
    InputGradient g;
    try {
      g = value_and_grad_wrt_input(net, x, loss);
    } catch (const NumericError& e) {
      throw NumericError("distill step " + std::to_string(s) + ": " + e.what());
    }
    const float lr = static_cast<float>(distill_learning_rate(cfg, s));
    if (lr > 0.0f) {
      try {
        sgd_step(params, std::span<const Array>(&g.grad, 1), lr, static_cast<float>(cfg.momentum), velocity);
      } catch (const NumericError& e) {
        throw NumericError("distill step " + std::to_string(s) + ": " + e.what());
      }
    }
    if (observer) observer(s, x, g.loss);
  }
  return x;
}

}  // namespace

InputGradient total_loss_grad(const Network& net, const Array& x, const Array& target,
                              const DistillConfig& cfg) {
  cfg.validate(net.block_count());
  require_same_shape(x, target, "distill source/target");
  const Objective objective(net, target, cfg);
  return value_and_grad_wrt_input(net, x, std::cref(objective));
}

RobustSample distill_sample(const Network& net, const Sample& source, const Sample& target,
                            const DistillConfig& cfg, std::uint64_t seed, int task,
                            const DistillObserver& observer) {
  RobustSample r;
  r.x = optimise(net, source.x, target.x, cfg, observer);
  r.class_id = target.label;
  r.target_id = target.id;
  r.source_id = source.id;
  r.distilled_at_task = task;
  r.final_loss = total_loss(net, r.x, target.x, cfg);
  r.seed = seed;
  return r;
}

RobustSample reconsolidate_sample(const Network& net, const RobustSample& prior,
                                  const Sample& target, const DistillConfig& cfg, int task,
                                  const DistillObserver& observer) {
  if (target.id != prior.target_id) {
    throw ContractError("reconsolidate: target '" + target.id + "' is not the prior's target '" +
                        prior.target_id + "'");
  }
  if (target.label != prior.class_id) {
    throw ContractError("reconsolidate: target label differs from the robust sample's class");
  }
  if (task < prior.distilled_at_task) {
    throw ContractError("reconsolidate: task index moved backwards");
  }
  RobustSample r = prior;
  r.x = optimise(net, prior.x, target.x, cfg, observer);
  r.distilled_at_task = task;
  r.final_loss = total_loss(net, r.x, target.x, cfg);
  return r;
}

RobustSample reconsolidate_sample(const Network& net, const RobustSample& prior,
                                  const RehearsalMemory& memory, const DistillConfig& cfg,
                                  int task, const DistillObserver& observer) {
  const Sample* target = memory.find_exemplar(prior.target_id);
  if (!target) {
    throw MissingExemplarError("reconsolidate: target exemplar '" + prior.target_id +
                               "' is not in memory");
  }
  return reconsolidate_sample(net, prior, *target, cfg, task, observer);
}

const Sample& pick_source(const LabeledDataset& dataset, int target_class, std::uint64_t seed) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    if (dataset.samples[i].label != target_class) pool.push_back(i);
  }
  if (pool.empty()) {
    throw EmptyPoolError("pick_source: no sample with a label other than " +
                         std::to_string(target_class));
  }
  auto rng = make_rng(seed, "pick-source");
  std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
  return dataset.samples[pool[dist(rng)]];
}

std::vector<RobustSample> run_distill_jobs(const Network& net, std::span<const DistillJob> jobs,
                                           const DistillConfig& cfg, int task, unsigned threads) {
  cfg.validate(net.block_count());
  std::vector<RobustSample> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const DistillJob& job = jobs[i];
      try {
        if (!job.target) throw ContractError("distill job without a target");
        if (job.prior) {
          results[i] = reconsolidate_sample(net, *job.prior, *job.target, cfg, task);
        } else {
          if (!job.source) throw ContractError("distill job without a source");
          results[i] = distill_sample(net, *job.source, *job.target, cfg, job.seed, task);
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

void export_robust_sample(const RobustSample& r, const std::filesystem::path& dir,
                          const std::string& stem) {
  std::filesystem::create_directories(dir);
  write_pnm(dir / (stem + pnm_extension(r.x.shape())), r.x);
  std::ostringstream loss;
  loss.precision(17);
  loss << r.final_loss;
  write_sidecar(dir / (stem + ".txt"), {{"class_id", std::to_string(r.class_id)},
                                        {"task", std::to_string(r.distilled_at_task)},
                                        {"final_loss", loss.str()},
                                        {"seed", std::to_string(r.seed)},
                                        {"target_id", r.target_id},
                                        {"source_id", r.source_id}});
}

}  // namespace rrcl
