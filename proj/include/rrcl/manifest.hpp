// SPDX-License-Identifier: Apache-2.0
//
// Experiment manifests: INI-style "key = value" text with sections.
//
//   [dataset]     source = blobs | path, path, classes, per_class, val_per_class,
//                 test_per_class, shape = 1x16x16, separation, noise, modes, seed
//   [protocol]    kind = split | b0 | b50, tasks, first_task_size, increment, order_seed
//   [model]       width, blocks, activation = relu | linear
//   [train]       lr, momentum, lr_decay, milestones, epochs_first, epochs_rest,
//                 batch_size, memory_batch_size, augment
//   [distill]     alpha, betas, gamma, eta, momentum, steps, anneal
//   [memory]      budget, mode = total | per_class, k_clr
//   [experiment]  strategies, seeds, output, threads

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rrcl/dataset.hpp"
#include "rrcl/distill.hpp"
#include "rrcl/error.hpp"
#include "rrcl/protocols.hpp"
#include "rrcl/trainer.hpp"

namespace rrcl {

// Carries one message per offending field ("section.key: problem").
class ManifestError : public Error {
 public:
  explicit ManifestError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct DatasetSpec {
  std::string source = "blobs";  // "blobs" or "path"
  std::filesystem::path path;
  std::optional<int> classes_override;  // for path datasets
  BlobSpec blobs;
};

struct ProtocolSpec {
  std::string kind = "split";
  int tasks = 3;
  std::optional<int> first_task_size;
  int increment = 10;
  std::uint64_t order_seed = 0;
};

struct ExperimentManifest {
  DatasetSpec dataset;
  ProtocolSpec protocol;
  NetworkLayout model;
  TrainConfig train;
  DistillConfig distill;
  int memory_budget = 32;
  std::optional<BudgetMode> budget_mode;
  int k_clr = 4;
  std::vector<Strategy> strategies{Strategy::robust_rehearsal};
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output;
  unsigned threads = 1;
};

// `overrides` are "section.key=value" strings applied on top of the text.
// Throws ManifestError listing every offending field.
ExperimentManifest parse_manifest(std::istream& in, const std::vector<std::string>& overrides = {});
ExperimentManifest parse_manifest(const std::filesystem::path& path,
                                  const std::vector<std::string>& overrides = {});

// Every effective parameter, in the format parse_manifest reads.
std::string resolved_manifest(const ExperimentManifest& m);

DatasetBundle materialize_dataset(const DatasetSpec& spec);
TaskSequence build_protocol(const ExperimentManifest& m, int classes);
ExperimentConfig experiment_config(const ExperimentManifest& m, Strategy s, std::uint64_t seed);

}  // namespace rrcl
