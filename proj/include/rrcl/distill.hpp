// SPDX-License-Identifier: Apache-2.0
//
// Robust-sample distillation: gradient descent on the input so that it
// matches a target exemplar in input space, in every residual block's
// feature space and in logit space, followed by re-consolidation of stored
// robust samples after each new task.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rrcl/array.hpp"
#include "rrcl/dataset.hpp"
#include "rrcl/memory.hpp"
#include "rrcl/network.hpp"
#include "rrcl/robust_sample.hpp"

namespace rrcl {

struct DistillConfig {
  double alpha = 1.0;          // input-space weight
  std::vector<double> betas;   // per-block feature weights; empty means 1 for every block
  double gamma = 1.0;          // logit-space weight
  double eta = 1e-3;           // input learning rate
  double momentum = 0.9;
  int steps = 2000;
  bool anneal = true;          // cosine schedule eta * (1 + cos(pi s / S)) / 2

  // Betas expanded to `blocks` entries.
  std::vector<double> betas_for(std::size_t blocks) const;
  // Throws ContractError if unusable with a `blocks`-block network.
  void validate(std::size_t blocks) const;
};

double loss_input(const Array& x, const Array& target, double alpha);
double loss_feature(const Network& net, const Array& x, const Array& target,
                    std::span<const double> betas);
double loss_prediction(const Network& net, const Array& x, const Array& target, double gamma);
// loss_input + loss_feature + loss_prediction.
double total_loss(const Network& net, const Array& x, const Array& target, const DistillConfig& cfg);

// total_loss and its gradient with respect to x.
InputGradient total_loss_grad(const Network& net, const Array& x, const Array& target,
                              const DistillConfig& cfg);

// Learning rate used at step s (0-based) of S.
double distill_learning_rate(const DistillConfig& cfg, int step);

// Called once per step with the step index, the iterate after the update and
// the loss evaluated before it.
using DistillObserver = std::function<void(int step, const Array& x, double loss)>;

// Runs cfg.steps momentum-SGD steps on x starting from `source`, minimising
// total_loss toward `target`. The network is only read.
RobustSample distill_sample(const Network& net, const Sample& source, const Sample& target,
                            const DistillConfig& cfg, std::uint64_t seed, int task,
                            const DistillObserver& observer = {});

// Same optimisation warm-started at prior.x. Keeps class, target and source
// identity; stamps `task`.
RobustSample reconsolidate_sample(const Network& net, const RobustSample& prior,
                                  const Sample& target, const DistillConfig& cfg, int task,
                                  const DistillObserver& observer = {});
// Looks the target up in memory; MissingExemplarError if it is gone.
RobustSample reconsolidate_sample(const Network& net, const RobustSample& prior,
                                  const RehearsalMemory& memory, const DistillConfig& cfg,
                                  int task, const DistillObserver& observer = {});

// Uniform draw among samples whose label differs from target_class.
const Sample& pick_source(const LabeledDataset& dataset, int target_class, std::uint64_t seed);

// One unit of distillation work: fresh when `prior` is null.
struct DistillJob {
  const Sample* source = nullptr;
  const Sample* target = nullptr;
  const RobustSample* prior = nullptr;
  std::uint64_t seed = 0;
};

// Runs independent jobs on up to `threads` workers against the shared
// read-only network. Results come back in job order.
std::vector<RobustSample> run_distill_jobs(const Network& net, std::span<const DistillJob> jobs,
                                           const DistillConfig& cfg, int task, unsigned threads);

// Writes <stem>.pgm/.ppm (values clamped to [0,1]) and <stem>.txt metadata.
void export_robust_sample(const RobustSample& r, const std::filesystem::path& dir,
                          const std::string& stem);

}  // namespace rrcl
