// SPDX-License-Identifier: Apache-2.0
//
// Rehearsal memory M_R = M u M_clr: a budgeted store of original exemplars
// plus an overlay of distilled robust samples that does not count against the
// budget.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rrcl/dataset.hpp"
#include "rrcl/protocols.hpp"
#include "rrcl/robust_sample.hpp"
#include "rrcl/sample.hpp"

namespace rrcl {

struct MemoryItem {
  Sample sample;
  bool robust = false;
  bool augmentable = true;  // originals only; robust samples are replayed as-is
};

class RehearsalMemory {
 public:
  RehearsalMemory() = default;
  // `budget` counts originals: in total, or per class for BudgetMode::per_class.
  RehearsalMemory(int budget, BudgetMode mode, int k_clr);

  int budget() const { return budget_; }
  BudgetMode budget_mode() const { return mode_; }
  int k_clr() const { return k_clr_; }
  const std::vector<int>& seen_classes() const { return seen_; }
  bool has_class(int c) const;

  // Exemplars per class in selection order; eviction trims from the back.
  const std::map<int, std::vector<Sample>>& originals() const { return originals_; }
  const std::map<int, std::vector<RobustSample>>& robust() const { return robust_; }

  std::size_t original_count() const;
  std::size_t robust_count() const;
  std::size_t item_count() const { return original_count() + robust_count(); }
  bool empty() const { return item_count() == 0; }

  // Per-class exemplar quota with the currently seen classes.
  std::size_t quota() const;

  // Selects exemplars for every class in `task_data` (all must be new), then
  // shrinks older classes to the new equal share. Robust samples whose target
  // exemplar was evicted are dropped with it.
  void insert_task_exemplars(const LabeledDataset& task_data, int task, std::uint64_t seed);

  // Uniform draw without replacement of min(batch_size, |M_R|) items.
  std::vector<MemoryItem> retrieve_batch(std::size_t batch_size, std::uint64_t seed) const;

  // Supersedes the whole robust list of `class_id`.
  void replace_robust(int class_id, std::vector<RobustSample> samples);

  const Sample* find_exemplar(const std::string& id) const;

  // Throws ContractError naming the first broken invariant.
  void validate() const;

  // manifest.txt + arrays.bin (array record format) in `dir`.
  void save_snapshot(const std::filesystem::path& dir) const;
  static RehearsalMemory load_snapshot(const std::filesystem::path& dir);

  friend bool operator==(const RehearsalMemory&, const RehearsalMemory&) = default;

 private:
  std::size_t quota_for(std::size_t class_count) const;

  int budget_ = 0;
  BudgetMode mode_ = BudgetMode::total;
  int k_clr_ = 0;
  std::vector<int> seen_;
  std::map<int, std::vector<Sample>> originals_;
  std::map<int, std::vector<RobustSample>> robust_;
};

}  // namespace rrcl
