// SPDX-License-Identifier: Apache-2.0
//
// Batch commands behind the rrcl executable. Exit codes: 0 success, 1 runtime
// failure, 2 usage or manifest error.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rrcl/manifest.hpp"

namespace rrcl {

// Raised for bad invocations that are not manifest errors (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunRecord {
  Strategy strategy;
  std::uint64_t seed;
  double aca;
};

struct RunOutcome {
  std::vector<RunRecord> runs;
  std::filesystem::path output;
};

// Runs every (strategy, seed) pair. Writes manifest.resolved, runs.csv,
// summary.csv and <strategy>/seed-<s>/ artifacts under m.output.
RunOutcome cmd_run(const ExperimentManifest& m);

enum class SweepAxis { memory, tasks };
SweepAxis parse_sweep_axis(const std::string& s);

// One cmd_run per value; consolidated long-format sweep.csv under m.output.
std::vector<std::pair<int, RunRecord>> cmd_sweep(const ExperimentManifest& m, SweepAxis axis,
                                                 const std::vector<int>& values);

struct DistillRequest {
  std::filesystem::path checkpoint;
  DatasetBundle data;
  int class_id = 0;
  int count = 1;
  int snapshot_every = 0;  // 0: final sample only
  DistillConfig cfg;
  std::uint64_t seed = 0;
  std::filesystem::path output;
};

// Distills `count` robust samples toward the first training samples of the
// class, writing class-<c>-<j>/step-<s> snapshots and final images.
std::vector<RobustSample> cmd_distill(const DistillRequest& req);

// Accuracy per split that has samples.
std::map<std::string, double> cmd_eval(const std::filesystem::path& checkpoint,
                                       const DatasetBundle& data);

// Images for every exemplar and robust sample in a memory snapshot. Returns
// the number of files written (images and sidecars).
std::size_t cmd_export(const std::filesystem::path& snapshot, const std::filesystem::path& out);

// Full command-line entry point.
int cli_main(int argc, char** argv);

}  // namespace rrcl
