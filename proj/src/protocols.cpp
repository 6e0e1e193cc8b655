// SPDX-License-Identifier: Apache-2.0

#include "rrcl/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rrcl/error.hpp"
#include "rrcl/rng.hpp"

namespace rrcl {

std::set<int> TaskSequence::classes_through(std::size_t task_index) const {
  std::set<int> out;
  for (std::size_t t = 0; t <= task_index && t < tasks.size(); ++t) {
    out.insert(tasks[t].begin(), tasks[t].end());
  }
  return out;
}

void TaskSequence::validate() const {
  if (tasks.empty()) throw ProtocolError(protocol_name + ": no tasks");
  std::set<int> seen;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (tasks[t].empty()) throw ProtocolError(protocol_name + ": task " + std::to_string(t + 1) + " is empty");
    for (int c : tasks[t]) {
      if (!seen.insert(c).second) {
        throw ProtocolError(protocol_name + ": class " + std::to_string(c) + " appears in two tasks");
      }
    }
  }
  if (memory_budget < 0) throw ProtocolError(protocol_name + ": negative memory budget");
}

namespace {

std::vector<int> permuted_classes(int classes, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(classes));
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed, "class-order");
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

TaskSequence assign(const std::vector<int>& order, const std::vector<int>& sizes) {
  TaskSequence seq;
  std::size_t pos = 0;
  for (int s : sizes) {
    std::set<int> task(order.begin() + static_cast<std::ptrdiff_t>(pos),
                       order.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(s)));
    seq.tasks.push_back(std::move(task));
    pos += static_cast<std::size_t>(s);
  }
  return seq;
}

}  // namespace

TaskSequence make_split(int classes, int n_tasks, std::optional<int> first_task_size,
                        std::uint64_t seed, int memory_budget) {
  if (classes < 1 || n_tasks < 1) throw ProtocolError("split: classes and tasks must be positive");
  if (classes < n_tasks) {
    throw ProtocolError("split: " + std::to_string(classes) + " classes cannot fill " +
                        std::to_string(n_tasks) + " tasks");
  }
  std::vector<int> sizes;
  if (!first_task_size) {
    if (classes % n_tasks != 0) {
      throw ProtocolError("split: " + std::to_string(classes) + " classes do not divide into " +
                          std::to_string(n_tasks) + " equal tasks");
    }
    sizes.assign(static_cast<std::size_t>(n_tasks), classes / n_tasks);
  } else {
    const int first = *first_task_size;
    const int rest = classes - first;
    if (first < 1 || rest < 0) throw ProtocolError("split: first task size out of range");
    if (n_tasks == 1) {
      if (rest != 0) throw ProtocolError("split: single task must hold every class");
    } else if (rest <= 0 || rest % (n_tasks - 1) != 0) {
      throw ProtocolError("split: remaining " + std::to_string(rest) + " classes do not divide into " +
                          std::to_string(n_tasks - 1) + " equal tasks");
    }
    sizes.push_back(first);
    for (int t = 1; t < n_tasks; ++t) sizes.push_back(rest / (n_tasks - 1));
  }
  TaskSequence seq = assign(permuted_classes(classes, seed), sizes);
  seq.protocol_name = "split-" + std::to_string(n_tasks);
  seq.memory_budget = memory_budget;
  seq.budget_mode = BudgetMode::total;
  seq.validate();
  return seq;
}

TaskSequence make_b0(int classes, int n_tasks, std::uint64_t seed, int memory_budget) {
  TaskSequence seq = make_split(classes, n_tasks, std::nullopt, seed, memory_budget);
  seq.protocol_name = "B0";
  return seq;
}

TaskSequence make_b50(int classes, int increment, std::uint64_t seed, int per_class_budget) {
  if (classes < 2 || classes % 2 != 0) throw ProtocolError("B50: class count must be even");
  if (increment < 1 || (classes / 2) % increment != 0) {
    throw ProtocolError("B50: increment " + std::to_string(increment) + " does not divide " +
                        std::to_string(classes / 2));
  }
  std::vector<int> sizes{classes / 2};
  for (int i = 0; i < (classes / 2) / increment; ++i) sizes.push_back(increment);
  TaskSequence seq = assign(permuted_classes(classes, seed), sizes);
  seq.protocol_name = "B50";
  seq.memory_budget = per_class_budget;
  seq.budget_mode = BudgetMode::per_class;
  seq.validate();
  return seq;
}

Attitude attitude_class(double pitch, double roll, double alpha) {
  if (!std::isfinite(pitch) || !std::isfinite(roll) || !std::isfinite(alpha)) {
    throw NumericError("attitude_class: non-finite input");
  }
  if (!(alpha > 0.0)) throw ContractError("attitude_class: alpha must be positive");
  // -1: below the band, 0: inside [-alpha, alpha], +1: above.
  auto band = [alpha](double v) { return v > alpha ? 1 : (v < -alpha ? -1 : 0); };
  const int p = band(pitch);
  const int r = band(roll);
  static constexpr Attitude table[3][3] = {
      // roll:  negative                          level                   positive
      {Attitude::nose_down_roll_negative, Attitude::nose_down, Attitude::nose_down_roll_positive},
      {Attitude::roll_negative, Attitude::level, Attitude::roll_positive},
      {Attitude::nose_up_roll_negative, Attitude::nose_up, Attitude::nose_up_roll_positive},
  };
  return table[p + 1][r + 1];
}

const char* attitude_abbreviation(Attitude a) {
  switch (a) {
    case Attitude::nose_up: return "NU";
    case Attitude::nose_down: return "ND";
    case Attitude::roll_positive: return "RP";
    case Attitude::roll_negative: return "RN";
    case Attitude::nose_up_roll_positive: return "NU&RP";
    case Attitude::nose_up_roll_negative: return "NU&RN";
    case Attitude::nose_down_roll_positive: return "ND&RP";
    case Attitude::nose_down_roll_negative: return "ND&RN";
    case Attitude::level: return "L";
  }
  return "?";
}

}  // namespace rrcl
