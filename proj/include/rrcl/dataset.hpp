// SPDX-License-Identifier: Apache-2.0
//
// Labelled datasets: synthetic structured blobs and an on-disk directory
// format (labels.csv + one image or raw-float file per sample).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rrcl/array.hpp"
#include "rrcl/sample.hpp"

namespace rrcl {

enum class Split { train, val, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct LabeledDataset {
  std::vector<Sample> samples;
  int class_count = 0;
  Split split = Split::train;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  // Labels in [0, class_count), unique ids, one common input shape.
  void validate() const;
  std::set<int> labels_present() const;
  LabeledDataset restrict_to(const std::set<int>& classes) const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

struct DatasetBundle {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;

  int class_count() const { return train.class_count; }
  Shape input_shape() const;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

struct BlobSpec {
  int classes = 6;
  int per_class = 100;       // training samples per class
  int val_per_class = 20;
  int test_per_class = 50;
  Shape shape{1, 16, 16};
  double separation = 1.0;   // template amplitude relative to unit noise scale
  double noise = 0.35;
  int modes = 3;             // distinct templates per class
  std::uint64_t seed = 0;
};

// Each class owns `modes` smooth templates (sums of Gaussian bumps). A sample
// picks one mode at random and renders separation * template + noise * N(0,1).
DatasetBundle gen_blobs(const BlobSpec& spec);

// Reads labels.csv (header "id,label,split") and the per-id payload files
// <id>.pgm, <id>.ppm or <id>.bin next to it. Labels must lie below
// `class_count` when given; otherwise the class count is max(label) + 1.
DatasetBundle load_dataset(const std::filesystem::path& dir,
                           std::optional<int> class_count = std::nullopt);

enum class PayloadFormat { image, raw };

// Writes a bundle in the layout load_dataset reads.
void write_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir,
                   PayloadFormat format);

}  // namespace rrcl
