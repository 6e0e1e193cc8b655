// SPDX-License-Identifier: Apache-2.0

#include "rrcl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "rrcl/error.hpp"

namespace rrcl {

namespace {

constexpr const char* kMagic = "GRADNET v1";

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

void write_floats(std::ostream& out, std::span<const float> values) {
  std::vector<std::uint32_t> words(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    words[i] = to_little(std::bit_cast<std::uint32_t>(values[i]));
  }
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
}

std::vector<float> read_floats(std::istream& in, std::size_t count, const std::string& name) {
  std::vector<std::uint32_t> words(count);
  in.read(reinterpret_cast<char*>(words.data()),
          static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
  if (!in) throw IoError("record '" + name + "': truncated float payload");
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(to_little(words[i]));
  return values;
}

}  // namespace

void write_records(std::ostream& out, const RecordFile& file) {
  out << kMagic << '\n';
  for (const auto& line : file.metadata) {
    if (line.find('\n') != std::string::npos) throw IoError("metadata line contains a newline");
    out << "# " << line << '\n';
  }
  for (const auto& r : file.records) {
    if (r.name.empty() || r.name.find_first_of(" \t\n#") != std::string::npos) {
      throw IoError("invalid record name '" + r.name + "'");
    }
    out << r.name;
    for (auto d : r.value.shape()) out << ' ' << d;
    out << '\n';
    write_floats(out, r.value.values());
  }
  if (!out) throw IoError("failed writing array records");
}

RecordFile read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw IoError("missing '" + std::string(kMagic) + "' header");
  }
  RecordFile file;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      file.metadata.push_back(line.size() > 2 ? line.substr(2) : std::string());
      continue;
    }
    std::istringstream ls(line);
    ArrayRecord r;
    ls >> r.name;
    Shape shape;
    long long d = 0;
    while (ls >> d) {
      if (d <= 0) throw IoError("record '" + r.name + "': non-positive dimension");
      shape.push_back(static_cast<std::size_t>(d));
    }
    if (!ls.eof()) throw IoError("record '" + r.name + "': malformed shape line");
    if (shape.empty()) throw IoError("record '" + r.name + "': missing shape");
    r.value = Array(shape, read_floats(in, shape_size(shape), r.name));
    file.records.push_back(std::move(r));
  }
  return file;
}

void write_records(const std::filesystem::path& path, const RecordFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_records(out, file);
}

RecordFile read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_records(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  const auto& l = net.layout();
  std::ostringstream meta;
  meta << "layout input=";
  for (std::size_t i = 0; i < l.input_shape.size(); ++i) meta << (i ? "x" : "") << l.input_shape[i];
  meta << " width=" << l.width << " blocks=" << l.blocks << " classes=" << l.classes
       << " activation=" << to_string(l.activation) << " seed=" << net.seed();
  RecordFile file;
  file.metadata.push_back(meta.str());
  const auto names = net.parameter_names();
  const auto params = net.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) file.records.push_back({names[k], *params[k]});
  write_records(path, file);
}

Network load_checkpoint(const std::filesystem::path& path) {
  RecordFile file = read_records(path);
  std::map<std::string, std::string> kv;
  bool have_layout = false;
  for (const auto& line : file.metadata) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag != "layout") continue;
    have_layout = true;
    std::string tok;
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw IoError(path.string() + ": malformed layout token " + tok);
      kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  if (!have_layout) throw IoError(path.string() + ": checkpoint has no layout line");
  auto field = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw IoError(path.string() + ": layout is missing '" + k + "'");
    return it->second;
  };
  NetworkLayout layout;
  {
    std::string dims = field("input");
    std::istringstream ds(dims);
    std::string part;
    while (std::getline(ds, part, 'x')) layout.input_shape.push_back(std::stoul(part));
  }
  layout.width = std::stoul(field("width"));
  layout.blocks = std::stoul(field("blocks"));
  layout.classes = std::stoul(field("classes"));
  layout.activation = parse_activation(field("activation"));
  const std::uint64_t seed = std::stoull(field("seed"));

  std::map<std::string, Array> by_name;
  for (auto& r : file.records) by_name[r.name] = std::move(r.value);
  auto take = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError(path.string() + ": missing parameter " + name);
    return it->second;
  };
  auto dense = [&](const std::string& prefix) {
    return Dense{take(prefix + ".weight"), take(prefix + ".bias")};
  };
  Dense stem = dense("stem");
  std::vector<ResidualBlock> blocks;
  for (std::size_t i = 0; i < layout.blocks; ++i) {
    const std::string b = "block" + std::to_string(i);
    Dense inner = dense(b + ".inner");
    Dense outer = dense(b + ".outer");
    blocks.push_back({std::move(inner), std::move(outer)});
  }
  Dense head = dense("head");
  return Network(layout, std::move(stem), std::move(blocks), std::move(head), seed);
}

}  // namespace rrcl
