// SPDX-License-Identifier: Apache-2.0
//
// Class-incremental task construction and attitude binning.

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rrcl {

enum class BudgetMode { total, per_class };

struct TaskSequence {
  std::vector<std::set<int>> tasks;
  std::string protocol_name;  // "split-N", "B0" or "B50"
  int memory_budget = 0;
  BudgetMode budget_mode = BudgetMode::total;

  std::size_t size() const { return tasks.size(); }
  std::set<int> classes_through(std::size_t task_index) const;  // tasks [0, task_index]
  // Disjointness and non-emptiness; throws ProtocolError.
  void validate() const;
};

// Splits C classes into n tasks. The first task takes `first_task_size`
// classes (C / n when absent) and the remainder is divided equally. Classes
// are assigned in the order of a seeded permutation of 0..C-1.
TaskSequence make_split(int classes, int n_tasks, std::optional<int> first_task_size,
                        std::uint64_t seed, int memory_budget = 1024);

// B0: C classes in equal steps, fixed total budget (2000 exemplars by default).
TaskSequence make_b0(int classes, int n_tasks, std::uint64_t seed, int memory_budget = 2000);

// B50: half the classes first, the rest in `increment`-sized steps, budget per class.
TaskSequence make_b50(int classes, int increment, std::uint64_t seed, int per_class_budget = 20);

// Nine mutually exclusive attitude classes from pitch/roll thresholded at
// +-alpha. Exceedance uses strict inequalities; the level band is inclusive.
enum class Attitude : int {
  nose_up = 0,
  nose_down = 1,
  roll_positive = 2,
  roll_negative = 3,
  nose_up_roll_positive = 4,
  nose_up_roll_negative = 5,
  nose_down_roll_positive = 6,
  nose_down_roll_negative = 7,
  level = 8,
};

Attitude attitude_class(double pitch_deg, double roll_deg, double alpha_deg = 3.0);
const char* attitude_abbreviation(Attitude a);

}  // namespace rrcl
