// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "rrcl/array.hpp"

namespace rrcl {

// One labelled input. `id` is unique within the dataset it came from.
struct Sample {
  std::string id;
  Array x;
  int label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

}  // namespace rrcl
