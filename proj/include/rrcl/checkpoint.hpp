// SPDX-License-Identifier: Apache-2.0
//
// Binary array container shared by network checkpoints, memory snapshots and
// raw-float dataset files:
//
//   GRADNET v1\n
//   # free-form metadata line\n          (zero or more)
//   <name> <d0> <d1> ...\n<prod(d) little-endian float32, row-major>
//   ...                                   (records until EOF)

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rrcl/array.hpp"
#include "rrcl/network.hpp"

namespace rrcl {

struct ArrayRecord {
  std::string name;
  Array value;

  friend bool operator==(const ArrayRecord&, const ArrayRecord&) = default;
};

struct RecordFile {
  std::vector<std::string> metadata;  // without the leading "# "
  std::vector<ArrayRecord> records;
};

void write_records(std::ostream& out, const RecordFile& file);
RecordFile read_records(std::istream& in);

void write_records(const std::filesystem::path& path, const RecordFile& file);
RecordFile read_records(const std::filesystem::path& path);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace rrcl
