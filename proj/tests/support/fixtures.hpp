// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "rrcl/dataset.hpp"
#include "rrcl/robust_sample.hpp"

namespace rrcl::fixtures {

// `per_class` samples for each class in [first, first + classes), filled with
// seeded noise of the given shape.
inline LabeledDataset noise_data(int first, int classes, int per_class, int class_count,
                                 std::uint64_t seed = 0, Shape shape = {1, 4, 4}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.5f, 0.2f);
  LabeledDataset d;
  d.class_count = class_count;
  for (int c = first; c < first + classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Array x(shape);
      for (float& v : x.values()) v = n(rng);
      d.samples.push_back({"s-" + std::to_string(c) + "-" + std::to_string(i), std::move(x), c});
    }
  }
  return d;
}

inline RobustSample robust_for(const Sample& target, float fill, int task = 1) {
  RobustSample r;
  r.x = Array(target.x.shape(), fill);
  r.class_id = target.label;
  r.target_id = target.id;
  r.source_id = "elsewhere";
  r.distilled_at_task = task;
  return r;
}

inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rrcl-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace rrcl::fixtures
