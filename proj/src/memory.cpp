// SPDX-License-Identifier: Apache-2.0

#include "rrcl/memory.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rrcl/checkpoint.hpp"
#include "rrcl/error.hpp"
#include "rrcl/rng.hpp"

namespace rrcl {

RehearsalMemory::RehearsalMemory(int budget, BudgetMode mode, int k_clr)
    : budget_(budget), mode_(mode), k_clr_(k_clr) {
  if (budget < 0) throw ContractError("memory: budget must be non-negative");
  if (k_clr < 0) throw ContractError("memory: k_clr must be non-negative");
}

bool RehearsalMemory::has_class(int c) const {
  return std::find(seen_.begin(), seen_.end(), c) != seen_.end();
}

std::size_t RehearsalMemory::original_count() const {
  std::size_t n = 0;
  for (const auto& [c, v] : originals_) n += v.size();
  return n;
}

std::size_t RehearsalMemory::robust_count() const {
  std::size_t n = 0;
  for (const auto& [c, v] : robust_) n += v.size();
  return n;
}

std::size_t RehearsalMemory::quota_for(std::size_t class_count) const {
  if (mode_ == BudgetMode::per_class) return static_cast<std::size_t>(budget_);
  if (class_count == 0) return static_cast<std::size_t>(budget_);
  return static_cast<std::size_t>(budget_) / class_count;
}

std::size_t RehearsalMemory::quota() const { return quota_for(seen_.size()); }

void RehearsalMemory::insert_task_exemplars(const LabeledDataset& task_data, int task,
                                            std::uint64_t seed) {
  const std::set<int> fresh = task_data.labels_present();
  for (int c : fresh) {
    if (has_class(c)) {
      throw ProtocolError("memory: class " + std::to_string(c) + " of task " + std::to_string(task) +
                          " was already seen");
    }
  }
  const std::size_t classes_after = seen_.size() + fresh.size();
  if (mode_ == BudgetMode::total && static_cast<std::size_t>(budget_) < classes_after) {
    throw BudgetError("memory: budget " + std::to_string(budget_) + " cannot hold " +
                      std::to_string(classes_after) + " classes");
  }
  if (mode_ == BudgetMode::per_class && budget_ < 1) {
    throw BudgetError("memory: per-class budget must be at least 1");
  }
  const std::size_t q = quota_for(classes_after);

  for (int c : fresh) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < task_data.samples.size(); ++i) {
      if (task_data.samples[i].label == c) pool.push_back(i);
    }
    auto rng = make_rng(seed, "exemplar-select", static_cast<std::uint64_t>(task) * 100003u +
                                                     static_cast<std::uint64_t>(c));
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(pool.size(), q));
    auto& store = originals_[c];
    for (std::size_t i : pool) store.push_back(task_data.samples[i]);
    seen_.push_back(c);
  }

  // Selection order is a uniform permutation, so trimming the tail is a
  // uniform eviction among each class's surplus.
  for (auto& [c, store] : originals_) {
    if (store.size() > q) store.resize(q);
  }
  for (auto& [c, list] : robust_) {
    std::erase_if(list, [&](const RobustSample& r) { return find_exemplar(r.target_id) == nullptr; });
  }
  std::erase_if(robust_, [](const auto& kv) { return kv.second.empty(); });
}

std::vector<MemoryItem> RehearsalMemory::retrieve_batch(std::size_t batch_size,
                                                        std::uint64_t seed) const {
  // Fixed enumeration of M_R: classes ascending, originals then robust.
  std::vector<std::pair<const Sample*, const RobustSample*>> all;
  for (const auto& [c, store] : originals_) {
    for (const auto& s : store) all.push_back({&s, nullptr});
  }
  for (const auto& [c, list] : robust_) {
    for (const auto& r : list) all.push_back({nullptr, &r});
  }
  std::vector<std::size_t> picked;
  auto rng = make_rng(seed, "memory-retrieval");
  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sample(idx.begin(), idx.end(), std::back_inserter(picked), std::min(batch_size, all.size()), rng);

  std::vector<MemoryItem> out;
  out.reserve(picked.size());
  for (std::size_t i : picked) {
    if (all[i].first) {
      out.push_back({*all[i].first, false, true});
    } else {
      const RobustSample& r = *all[i].second;
      out.push_back({Sample{r.target_id + "#clr", r.x, r.class_id}, true, false});
    }
  }
  return out;
}

void RehearsalMemory::replace_robust(int class_id, std::vector<RobustSample> samples) {
  if (!has_class(class_id)) {
    throw ContractError("memory: class " + std::to_string(class_id) + " has not been seen");
  }
  if (samples.size() > static_cast<std::size_t>(k_clr_)) {
    throw ContractError("memory: " + std::to_string(samples.size()) + " robust samples for class " +
                        std::to_string(class_id) + " exceed k_clr " + std::to_string(k_clr_));
  }
  for (const auto& r : samples) {
    if (r.class_id != class_id) {
      throw ContractError("memory: robust sample of class " + std::to_string(r.class_id) +
                          " offered for class " + std::to_string(class_id));
    }
    const Sample* target = find_exemplar(r.target_id);
    if (!target) throw MissingExemplarError("memory: unresolved target_id '" + r.target_id + "'");
    if (target->label != class_id) {
      throw ContractError("memory: target '" + r.target_id + "' does not belong to class " +
                          std::to_string(class_id));
    }
  }
  if (samples.empty()) {
    robust_.erase(class_id);
  } else {
    robust_[class_id] = std::move(samples);
  }
}

const Sample* RehearsalMemory::find_exemplar(const std::string& id) const {
  for (const auto& [c, store] : originals_) {
    for (const auto& s : store) {
      if (s.id == id) return &s;
    }
  }
  return nullptr;
}

void RehearsalMemory::validate() const {
  if (mode_ == BudgetMode::total && original_count() > static_cast<std::size_t>(budget_)) {
    throw ContractError("memory: " + std::to_string(original_count()) +
                        " originals exceed budget " + std::to_string(budget_));
  }
  for (const auto& [c, store] : originals_) {
    if (!has_class(c)) throw ContractError("memory: originals for unseen class " + std::to_string(c));
    if (store.size() > quota()) throw ContractError("memory: class " + std::to_string(c) + " over quota");
    for (const auto& s : store) {
      if (s.label != c) throw ContractError("memory: exemplar " + s.id + " filed under wrong class");
    }
  }
  for (const auto& [c, list] : robust_) {
    if (!has_class(c)) throw ContractError("memory: robust samples for unseen class " + std::to_string(c));
    if (list.size() > static_cast<std::size_t>(k_clr_)) {
      throw ContractError("memory: class " + std::to_string(c) + " holds more than k_clr robust samples");
    }
    for (const auto& r : list) {
      const Sample* t = find_exemplar(r.target_id);
      if (!t) throw ContractError("memory: robust target '" + r.target_id + "' does not resolve");
      if (t->label != r.class_id || r.class_id != c) {
        throw ContractError("memory: robust sample class mismatch for target '" + r.target_id + "'");
      }
    }
  }
}

namespace {

void check_token(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(" \t\n") != std::string::npos) {
    throw IoError(std::string("memory snapshot: ") + what + " '" + s + "' contains whitespace");
  }
}

std::string hex_double(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

}  // namespace

void RehearsalMemory::save_snapshot(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream m(dir / "manifest.txt");
  if (!m) throw IoError("cannot write " + (dir / "manifest.txt").string());
  RecordFile arrays;
  m << "memory v1\n";
  m << "budget " << budget_ << '\n';
  m << "budget_mode " << (mode_ == BudgetMode::total ? "total" : "per_class") << '\n';
  m << "k_clr " << k_clr_ << '\n';
  m << "seen";
  for (int c : seen_) m << ' ' << c;
  m << '\n';
  std::size_t n = 0;
  for (const auto& [c, store] : originals_) {
    for (const auto& s : store) {
      check_token(s.id, "exemplar id");
      const std::string rec = "exemplar." + std::to_string(n++);
      m << "exemplar " << rec << ' ' << s.label << ' ' << s.id << '\n';
      arrays.records.push_back({rec, s.x});
    }
  }
  n = 0;
  for (const auto& [c, list] : robust_) {
    for (const auto& r : list) {
      check_token(r.target_id, "target id");
      check_token(r.source_id, "source id");
      const std::string rec = "robust." + std::to_string(n++);
      m << "robust " << rec << ' ' << r.class_id << ' ' << r.target_id << ' ' << r.source_id << ' '
        << r.distilled_at_task << ' ' << hex_double(r.final_loss) << ' ' << r.seed << '\n';
      arrays.records.push_back({rec, r.x});
    }
  }
  if (!m) throw IoError("failed writing memory manifest");
  write_records(dir / "arrays.bin", arrays);
}

RehearsalMemory RehearsalMemory::load_snapshot(const std::filesystem::path& dir) {
  const auto manifest = dir / "manifest.txt";
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  std::map<std::string, Array> arrays;
  for (auto& r : read_records(dir / "arrays.bin").records) arrays[r.name] = std::move(r.value);
  auto take = [&](const std::string& name, const std::string& where) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw IoError(where + ": array record '" + name + "' missing");
    return it->second;
  };

  RehearsalMemory mem;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = manifest.string() + ":" + std::to_string(lineno);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (lineno == 1) {
      std::string ver;
      ls >> ver;
      if (tag != "memory" || ver != "v1") throw IoError(where + ": expected 'memory v1'");
      continue;
    }
    if (tag == "budget") {
      ls >> mem.budget_;
    } else if (tag == "budget_mode") {
      std::string mode;
      ls >> mode;
      if (mode == "total") {
        mem.mode_ = BudgetMode::total;
      } else if (mode == "per_class") {
        mem.mode_ = BudgetMode::per_class;
      } else {
        throw IoError(where + ": unknown budget mode '" + mode + "'");
      }
    } else if (tag == "k_clr") {
      ls >> mem.k_clr_;
    } else if (tag == "seen") {
      int c;
      while (ls >> c) mem.seen_.push_back(c);
      ls.clear();
    } else if (tag == "exemplar") {
      std::string rec, id;
      int label;
      if (!(ls >> rec >> label >> id)) throw IoError(where + ": malformed exemplar line");
      mem.originals_[label].push_back({id, take(rec, where), label});
    } else if (tag == "robust") {
      std::string rec, loss;
      RobustSample r;
      if (!(ls >> rec >> r.class_id >> r.target_id >> r.source_id >> r.distilled_at_task >> loss >> r.seed)) {
        throw IoError(where + ": malformed robust line");
      }
      r.final_loss = std::strtod(loss.c_str(), nullptr);
      r.x = take(rec, where);
      mem.robust_[r.class_id].push_back(std::move(r));
    } else {
      throw IoError(where + ": unknown entry '" + tag + "'");
    }
    if (ls.fail()) throw IoError(where + ": malformed value");
  }
  mem.validate();
  return mem;
}

}  // namespace rrcl
