// SPDX-License-Identifier: Apache-2.0
//
// Accuracy, the lower-triangular task accuracy matrix and its average (ACA),
// and empirical label-correlation diagnostics for scalar features.

#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "rrcl/dataset.hpp"
#include "rrcl/error.hpp"
#include "rrcl/network.hpp"

namespace rrcl {

// Fraction of samples whose argmax logit (lowest id on ties) equals the label.
double accuracy(const Network& net, const LabeledDataset& dataset);

// R[t][i]: accuracy on task i's test split after training through task t
// (both 0-based here, i <= t).
class AccuracyMatrix {
 public:
  explicit AccuracyMatrix(std::size_t tasks);

  std::size_t tasks() const { return rows_.size(); }
  // Row t must have exactly t + 1 entries in [0, 1].
  void set_row(std::size_t t, std::vector<double> row);
  bool has_row(std::size_t t) const { return rows_.at(t).has_value(); }
  double at(std::size_t t, std::size_t i) const;
  const std::vector<double>& row(std::size_t t) const;

  // CSV: header "task,eval_1,...,eval_T"; cells above the diagonal are empty.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<std::optional<std::vector<double>>> rows_;
};

// Mean of the final row.
double aca(const AccuracyMatrix& m);

// +1 for `positive_class`, -1 otherwise.
std::vector<int> one_vs_rest(const LabeledDataset& dataset, int positive_class);

// Empirical E[y f(x)] after standardising f to zero mean and unit variance
// over the sample. DegenerateFeature when f has zero variance.
double usefulness(std::span<const double> feature, std::span<const int> signs);

using FeatureFn = std::function<double(const Array&)>;

double usefulness(const FeatureFn& f, const LabeledDataset& dataset, std::span<const int> signs);

struct BinaryTask {
  const LabeledDataset* data = nullptr;
  std::vector<int> signs;
};

struct RobustnessReport {
  std::vector<double> per_task;  // one correlation per supplied task, in order
  std::vector<bool> degenerate;  // feature constant on that task; its correlation is reported as 0
  double minimum = 0.0;
  bool robust_at(double gamma) const { return minimum >= gamma; }
};

// A feature that is constant on some task carries no label information there
// and contributes a correlation of 0 instead of failing the whole report.
RobustnessReport cl_robustness(const FeatureFn& f, std::span<const BinaryTask> tasks);

class DegenerateFeature : public Error {
 public:
  using Error::Error;
};

}  // namespace rrcl
