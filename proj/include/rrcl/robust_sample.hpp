// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "rrcl/array.hpp"

namespace rrcl {

// A distilled input together with the exemplar it was pulled toward.
struct RobustSample {
  Array x;                     // same shape as the model input
  int class_id = 0;            // label of the target exemplar
  std::string target_id;       // exemplar the sample was distilled toward
  std::string source_id;       // sample the very first distillation started from
  int distilled_at_task = 0;   // 1-based task after which it was last (re)distilled
  double final_loss = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const RobustSample&, const RobustSample&) = default;
};

}  // namespace rrcl
