// SPDX-License-Identifier: Apache-2.0

#include "rrcl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "rrcl/checkpoint.hpp"
#include "rrcl/error.hpp"
#include "rrcl/image_io.hpp"
#include "rrcl/rng.hpp"

namespace rrcl {

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ContractError("unknown split '" + s + "'");
}

void LabeledDataset::validate() const {
  std::unordered_set<std::string> ids;
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= class_count) {
      throw ContractError("sample " + s.id + ": label " + std::to_string(s.label) +
                          " outside [0, " + std::to_string(class_count) + ")");
    }
    if (!ids.insert(s.id).second) throw ContractError("duplicate sample id " + s.id);
    if (s.x.shape() != samples.front().x.shape()) {
      throw ShapeError("sample " + s.id + ": shape " + shape_string(s.x.shape()) +
                       " differs from " + shape_string(samples.front().x.shape()));
    }
  }
}

std::set<int> LabeledDataset::labels_present() const {
  std::set<int> out;
  for (const auto& s : samples) out.insert(s.label);
  return out;
}

LabeledDataset LabeledDataset::restrict_to(const std::set<int>& classes) const {
  LabeledDataset out{{}, class_count, split};
  for (const auto& s : samples) {
    if (classes.count(s.label)) out.samples.push_back(s);
  }
  return out;
}

Shape DatasetBundle::input_shape() const {
  for (const auto* d : {&train, &val, &test}) {
    if (!d->empty()) return d->samples.front().x.shape();
  }
  throw ContractError("dataset bundle is empty");
}

namespace {

Array render_template(const Shape& shape, std::mt19937_64& rng) {
  Array t(shape);
  // Treat the trailing two dims as the image plane; anything before is channels.
  const std::size_t h = shape.size() >= 2 ? shape[shape.size() - 2] : 1;
  const std::size_t w = shape.back();
  const std::size_t planes = t.size() / (h * w);
  std::uniform_real_distribution<double> pos_y(0.0, static_cast<double>(h - 1));
  std::uniform_real_distribution<double> pos_x(0.0, static_cast<double>(w - 1));
  std::uniform_real_distribution<double> width(1.2, 2.8);
  std::uniform_real_distribution<double> amp(0.6, 1.0);
  for (std::size_t c = 0; c < planes; ++c) {
    for (int bump = 0; bump < 3; ++bump) {
      const double cy = pos_y(rng), cx = pos_x(rng), s = width(rng), a = amp(rng);
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          t[c * h * w + y * w + x] += static_cast<float>(a * std::exp(-d2 / (2 * s * s)));
        }
      }
    }
  }
  float mx = 0.0f;
  for (float v : t.values()) mx = std::max(mx, v);
  if (mx > 0.0f) {
    for (auto& v : t.values()) v /= mx;
  }
  return t;
}

}  // namespace

DatasetBundle gen_blobs(const BlobSpec& spec) {
  if (spec.classes < 1 || spec.per_class < 0 || spec.val_per_class < 0 || spec.test_per_class < 0 ||
      spec.modes < 1) {
    throw ContractError("gen_blobs: counts must be positive");
  }
  if (!(spec.separation >= 0.0) || !(spec.noise >= 0.0)) {
    throw ContractError("gen_blobs: separation and noise must be non-negative");
  }
  std::vector<std::vector<Array>> templates(static_cast<std::size_t>(spec.classes));
  for (int c = 0; c < spec.classes; ++c) {
    for (int m = 0; m < spec.modes; ++m) {
      auto rng = make_rng(spec.seed, "blob-template", static_cast<std::uint64_t>(c * 1000 + m));
      templates[static_cast<std::size_t>(c)].push_back(render_template(spec.shape, rng));
    }
  }
  DatasetBundle out;
  auto fill = [&](LabeledDataset& ds, Split split, int per_class) {
    ds.class_count = spec.classes;
    ds.split = split;
    auto rng = make_rng(spec.seed, "blob-samples-" + to_string(split));
    std::normal_distribution<float> noise(0.0f, 1.0f);
    std::uniform_int_distribution<int> mode(0, spec.modes - 1);
    for (int i = 0; i < per_class; ++i) {
      for (int c = 0; c < spec.classes; ++c) {
        const Array& t = templates[static_cast<std::size_t>(c)][static_cast<std::size_t>(mode(rng))];
        Array x(spec.shape);
        for (std::size_t k = 0; k < x.size(); ++k) {
          x[k] = static_cast<float>(spec.separation * t[k] + spec.noise * noise(rng));
        }
        std::ostringstream id;
        id << to_string(split) << '-' << c << '-' << i;
        ds.samples.push_back({id.str(), std::move(x), c});
      }
    }
  };
  fill(out.train, Split::train, spec.per_class);
  fill(out.val, Split::val, spec.val_per_class);
  fill(out.test, Split::test, spec.test_per_class);
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Array load_payload(const std::filesystem::path& dir, const std::string& id,
                   const std::string& where) {
  for (const char* ext : {".pgm", ".ppm"}) {
    const auto p = dir / (id + ext);
    if (std::filesystem::exists(p)) return read_pnm(p);
  }
  const auto raw = dir / (id + ".bin");
  if (std::filesystem::exists(raw)) {
    RecordFile f = read_records(raw);
    if (f.records.size() != 1) throw IoError(where + ": " + raw.string() + " must hold one array");
    return std::move(f.records.front().value);
  }
  throw IoError(where + ": no payload file for id '" + id + "' (.pgm, .ppm or .bin)");
}

}  // namespace

DatasetBundle load_dataset(const std::filesystem::path& dir, std::optional<int> class_count) {
  const auto csv = dir / "labels.csv";
  std::ifstream in(csv);
  if (!in) throw IoError("missing " + csv.string());
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"id", "label", "split"}) {
    throw IoError(csv.string() + ":1: header must be 'id,label,split'");
  }
  DatasetBundle out;
  int max_label = -1;
  std::unordered_set<std::string> ids;
  int lineno = 1;
  std::optional<Shape> shape;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = csv.string() + ":" + std::to_string(lineno);
    const auto cells = split_csv(line);
    if (cells.size() != 3 || cells[0].empty()) throw IoError(where + ": expected 'id,label,split'");
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(cells[1], &used);
      if (used != cells[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw IoError(where + ": label '" + cells[1] + "' is not an integer");
    }
    if (label < 0 || (class_count && label >= *class_count)) {
      throw IoError(where + ": label " + std::to_string(label) + " out of range");
    }
    Split split;
    try {
      split = parse_split(cells[2]);
    } catch (const ContractError&) {
      throw IoError(where + ": unknown split '" + cells[2] + "'");
    }
    if (!ids.insert(cells[0]).second) throw IoError(where + ": duplicate id '" + cells[0] + "'");
    Array x = load_payload(dir, cells[0], where);
    if (!shape) shape = x.shape();
    if (x.shape() != *shape) {
      throw IoError(where + ": shape " + shape_string(x.shape()) + " differs from " +
                    shape_string(*shape));
    }
    max_label = std::max(max_label, label);
    LabeledDataset& ds = split == Split::train ? out.train : split == Split::val ? out.val : out.test;
    ds.samples.push_back({cells[0], std::move(x), label});
  }
  const int classes = class_count ? *class_count : max_label + 1;
  for (auto [ds, s] : {std::pair{&out.train, Split::train}, {&out.val, Split::val}, {&out.test, Split::test}}) {
    ds->class_count = classes;
    ds->split = s;
  }
  if (out.train.empty() && out.val.empty() && out.test.empty()) {
    throw IoError(csv.string() + ": no samples");
  }
  return out;
}

void write_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir,
                   PayloadFormat format) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "labels.csv");
  if (!csv) throw IoError("cannot write " + (dir / "labels.csv").string());
  csv << "id,label,split\n";
  for (const auto* ds : {&bundle.train, &bundle.val, &bundle.test}) {
    for (const auto& s : ds->samples) {
      if (s.id.find_first_of(",/\\") != std::string::npos) {
        throw IoError("sample id '" + s.id + "' is not usable as a file name");
      }
      csv << s.id << ',' << s.label << ',' << to_string(ds->split) << '\n';
      if (format == PayloadFormat::image) {
        write_pnm(dir / (s.id + pnm_extension(s.x.shape())), s.x);
      } else {
        write_records(dir / (s.id + ".bin"), RecordFile{{}, {{"x", s.x}}});
      }
    }
  }
}

}  // namespace rrcl
