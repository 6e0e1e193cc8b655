// SPDX-License-Identifier: Apache-2.0

#include "rrcl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rrcl/error.hpp"

namespace rrcl {

double accuracy(const Network& net, const LabeledDataset& dataset) {
  if (dataset.empty()) throw ContractError("accuracy: empty dataset");
  std::size_t correct = 0;
  for (const auto& s : dataset.samples) {
    if (argmax(forward_with_features(net, s.x).logits.values()) == static_cast<std::size_t>(s.label)) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

AccuracyMatrix::AccuracyMatrix(std::size_t tasks) : rows_(tasks) {
  if (tasks == 0) throw ContractError("accuracy matrix: need at least one task");
}

void AccuracyMatrix::set_row(std::size_t t, std::vector<double> row) {
  if (t >= rows_.size()) throw ContractError("accuracy matrix: row index out of range");
  if (row.size() != t + 1) {
    throw ContractError("accuracy matrix: row " + std::to_string(t + 1) + " needs " +
                        std::to_string(t + 1) + " entries, got " + std::to_string(row.size()));
  }
  for (double v : row) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("accuracy matrix: entry outside [0, 1]");
  }
  rows_[t] = std::move(row);
}

const std::vector<double>& AccuracyMatrix::row(std::size_t t) const {
  if (t >= rows_.size() || !rows_[t]) {
    throw ContractError("accuracy matrix: row " + std::to_string(t + 1) + " is not populated");
  }
  return *rows_[t];
}

double AccuracyMatrix::at(std::size_t t, std::size_t i) const {
  if (i > t) throw ContractError("accuracy matrix: entry above the diagonal is undefined");
  return row(t)[i];
}

void AccuracyMatrix::write_csv(std::ostream& out) const {
  out << "task";
  for (std::size_t i = 0; i < rows_.size(); ++i) out << ",eval_" << i + 1;
  out << '\n';
  const auto old = out.precision(17);
  for (std::size_t t = 0; t < rows_.size(); ++t) {
    if (!rows_[t]) continue;
    out << t + 1;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      out << ',';
      if (i <= t) out << (*rows_[t])[i];
    }
    out << '\n';
  }
  out.precision(old);
}

double aca(const AccuracyMatrix& m) {
  const auto& last = m.row(m.tasks() - 1);
  double sum = 0.0;
  for (double v : last) sum += v;
  return sum / static_cast<double>(last.size());
}

std::vector<int> one_vs_rest(const LabeledDataset& dataset, int positive_class) {
  std::vector<int> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.samples) out.push_back(s.label == positive_class ? 1 : -1);
  return out;
}

double usefulness(std::span<const double> feature, std::span<const int> signs) {
  if (feature.size() != signs.size()) throw ContractError("usefulness: feature/label length mismatch");
  if (feature.empty()) throw ContractError("usefulness: empty sample");
  for (int y : signs) {
    if (y != 1 && y != -1) throw ContractError("usefulness: labels must be +1 or -1");
  }
  const double n = static_cast<double>(feature.size());
  double mean = 0.0;
  for (double v : feature) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : feature) var += (v - mean) * (v - mean);
  var /= n;
  // Relative threshold so a constant feature with rounding noise still counts.
  if (!(var > 1e-24 * std::max(1.0, mean * mean))) {
    throw DegenerateFeature("usefulness: feature has zero variance");
  }
  const double sd = std::sqrt(var);
  double acc = 0.0;
  for (std::size_t i = 0; i < feature.size(); ++i) acc += signs[i] * (feature[i] - mean) / sd;
  return acc / n;
}

double usefulness(const FeatureFn& f, const LabeledDataset& dataset, std::span<const int> signs) {
  std::vector<double> values;
  values.reserve(dataset.size());
  for (const auto& s : dataset.samples) {
    const double v = f(s.x);
    if (!std::isfinite(v)) throw NumericError("usefulness: feature value is not finite");
    values.push_back(v);
  }
  return usefulness(values, signs);
}

RobustnessReport cl_robustness(const FeatureFn& f, std::span<const BinaryTask> tasks) {
  if (tasks.empty()) throw ContractError("cl_robustness: no tasks");
  RobustnessReport r;
  for (const auto& t : tasks) {
    if (!t.data) throw ContractError("cl_robustness: task without data");
    try {
      r.per_task.push_back(usefulness(f, *t.data, t.signs));
      r.degenerate.push_back(false);
    } catch (const DegenerateFeature&) {
      r.per_task.push_back(0.0);
      r.degenerate.push_back(true);
    }
  }
  r.minimum = *std::min_element(r.per_task.begin(), r.per_task.end());
  return r;
}

}  // namespace rrcl
