// SPDX-License-Identifier: Apache-2.0
//
// Class-incremental training with rehearsal. Each mini-batch of the current
// task is joined by a batch retrieved from memory before the SGD step; after
// each task the memory receives exemplars, new robust samples are distilled
// and existing ones are re-consolidated against the updated network.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rrcl/dataset.hpp"
#include "rrcl/distill.hpp"
#include "rrcl/memory.hpp"
#include "rrcl/metrics.hpp"
#include "rrcl/network.hpp"
#include "rrcl/protocols.hpp"

namespace rrcl {

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double lr_decay = 0.1;
  std::vector<double> milestones{0.5, 0.75};  // fractions of the epoch count
  int epochs_first = 20;
  int epochs_rest = 12;
  int batch_size = 32;
  int memory_batch_size = 32;
  bool augment = true;
  std::uint64_t seed = 0;

  void validate() const;
  // Learning rate in effect during `epoch` (0-based) of `epochs`.
  double lr_at(int epoch, int epochs) const;
};

enum class Strategy { fine_tune, naive_rehearsal, robust_rehearsal };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct TaskRecord {
  int task = 0;                    // 1-based
  std::vector<double> accuracies;  // on test splits of tasks 1..task
  double final_train_loss = 0.0;
  int distilled = 0;
  int reconsolidated = 0;
};

struct ExperimentState {
  Network net;
  RehearsalMemory mem;
  std::set<int> seen_classes;
  int task_index = 0;  // completed tasks
  std::vector<TaskRecord> history;
  std::uint64_t seed = 0;
};

// Seeded random shift with zero padding (inputs shaped (C, H, W) or (H, W))
// and a uniform brightness offset.
void augment(Array& x, std::mt19937_64& rng, int max_shift = 2, float brightness = 0.1f);

// Trains on one task's data interleaved with memory. Does not touch the
// memory or advance task_index. Returns the mean loss of the last epoch.
double train_task(ExperimentState& state, const LabeledDataset& task_data, const TrainConfig& cfg);

struct ExperimentConfig {
  NetworkLayout layout;  // input_shape and classes are taken from the data
  TrainConfig train;
  DistillConfig distill;
  Strategy strategy = Strategy::robust_rehearsal;
  int memory_budget = 32;
  std::optional<BudgetMode> budget_mode;  // defaults to the protocol's
  int k_clr = 4;
  unsigned threads = 1;

  void validate() const;
};

struct ExperimentResult {
  AccuracyMatrix matrix{1};
  ExperimentState state;
  int distill_calls = 0;
  int reconsolidation_calls = 0;
  // Robust memory after each task, for inspection of re-consolidation.
  std::vector<std::map<int, std::vector<RobustSample>>> robust_history;
};

// Full pipeline over every task of `protocol`. When `artifacts` is set, writes
// per task: task-<t>.ckpt, memory-task-<t>/, robust-task-<t>/ images, plus
// accuracy_matrix.csv.
ExperimentResult run_experiment(const TaskSequence& protocol, const DatasetBundle& data,
                                const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& artifacts = std::nullopt);

}  // namespace rrcl
