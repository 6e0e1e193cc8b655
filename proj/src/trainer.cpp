// SPDX-License-Identifier: Apache-2.0

#include "rrcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rrcl/checkpoint.hpp"
#include "rrcl/error.hpp"
#include "rrcl/rng.hpp"

namespace rrcl {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ContractError("train: lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("train: momentum must lie in [0, 1)");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ContractError("train: lr_decay must lie in (0, 1]");
  if (epochs_first < 1 || epochs_rest < 1) throw ContractError("train: epochs must be positive");
  if (batch_size < 1) throw ContractError("train: batch_size must be positive");
  if (memory_batch_size < 0) throw ContractError("train: memory_batch_size must be non-negative");
  for (double m : milestones) {
    if (!(m > 0.0 && m < 1.0)) throw ContractError("train: milestones must lie in (0, 1)");
  }
}

double TrainConfig::lr_at(int epoch, int epochs) const {
  double rate = lr;
  for (double m : milestones) {
    if (epoch >= static_cast<int>(std::floor(m * epochs))) rate *= lr_decay;
  }
  return rate;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::fine_tune: return "fine-tune";
    case Strategy::naive_rehearsal: return "naive-rehearsal";
    case Strategy::robust_rehearsal: return "robust-rehearsal";
  }
  return "fine-tune";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "fine-tune") return Strategy::fine_tune;
  if (s == "naive-rehearsal") return Strategy::naive_rehearsal;
  if (s == "robust-rehearsal") return Strategy::robust_rehearsal;
  throw ContractError("unknown strategy '" + s +
                      "' (expected fine-tune, naive-rehearsal or robust-rehearsal)");
}

void augment(Array& x, std::mt19937_64& rng, int max_shift, float brightness) {
  const Shape& s = x.shape();
  std::uniform_int_distribution<int> shift(-max_shift, max_shift);
  std::uniform_real_distribution<float> bright(-brightness, brightness);
  const int dy = shift(rng);
  const int dx = shift(rng);
  const float db = bright(rng);
  if (s.size() >= 2 && (dx != 0 || dy != 0)) {
    const std::size_t h = s[s.size() - 2];
    const std::size_t w = s.back();
    const std::size_t planes = x.size() / (h * w);
    Array out(s);
    for (std::size_t c = 0; c < planes; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        const long sy = static_cast<long>(y) - dy;
        if (sy < 0 || sy >= static_cast<long>(h)) continue;
        for (std::size_t xx = 0; xx < w; ++xx) {
          const long sx = static_cast<long>(xx) - dx;
          if (sx < 0 || sx >= static_cast<long>(w)) continue;
          out[c * h * w + y * w + xx] = x[c * h * w + static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)];
        }
      }
    }
    x = std::move(out);
  }
  for (auto& v : x.values()) v += db;
}

double train_task(ExperimentState& state, const LabeledDataset& task_data, const TrainConfig& cfg) {
  cfg.validate();
  if (task_data.empty()) throw ContractError("train_task: empty task data");
  for (int c : task_data.labels_present()) {
    if (state.seen_classes.count(c)) {
      throw ProtocolError("train_task: class " + std::to_string(c) + " was already learned");
    }
  }
  const int t = state.task_index + 1;
  const int epochs = t == 1 ? cfg.epochs_first : cfg.epochs_rest;
  const auto task_key = static_cast<std::uint64_t>(t);
  std::vector<Array> velocity;
  std::vector<Array*> params = state.net.mutable_parameters();
  std::vector<std::size_t> order(task_data.size());
  double epoch_loss = 0.0;

  for (int e = 0; e < epochs; ++e) {
    const float lr = static_cast<float>(cfg.lr_at(e, epochs));
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = make_rng(cfg.seed, "shuffle", task_key * 100000u + static_cast<std::uint64_t>(e));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    auto aug_task = make_rng(cfg.seed, "augment-task", task_key * 100000u + static_cast<std::uint64_t>(e));
    auto aug_mem = make_rng(cfg.seed, "augment-memory", task_key * 100000u + static_cast<std::uint64_t>(e));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Sample> batch;
      batch.reserve(end - start + static_cast<std::size_t>(cfg.memory_batch_size));
      for (std::size_t i = start; i < end; ++i) {
        Sample s = task_data.samples[order[i]];
        if (cfg.augment) augment(s.x, aug_task);
        batch.push_back(std::move(s));
      }
      const std::uint64_t draw = mix_seed(cfg.seed, "retrieval",
                                          (task_key * 100000u + static_cast<std::uint64_t>(e)) * 100000u + batches);
      for (auto& item : state.mem.retrieve_batch(static_cast<std::size_t>(cfg.memory_batch_size), draw)) {
        if (cfg.augment && item.augmentable) augment(item.sample.x, aug_mem);
        batch.push_back(std::move(item.sample));
      }
      ParameterGradients g = grad_wrt_params(state.net, batch);
      sgd_step(params, g.grads, lr, static_cast<float>(cfg.momentum), velocity);
      loss_sum += g.loss;
      ++batches;
    }
    epoch_loss = loss_sum / static_cast<double>(batches);
  }
  return epoch_loss;
}

void ExperimentConfig::validate() const {
  train.validate();
  if (k_clr < 0) throw ContractError("experiment: k_clr must be non-negative");
  if (strategy != Strategy::fine_tune && memory_budget < 1) {
    throw ContractError("experiment: rehearsal strategies need a positive memory budget");
  }
}

namespace {

std::vector<double> evaluate_row(const Network& net, const TaskSequence& protocol,
                                 const LabeledDataset& test, std::size_t t) {
  std::vector<double> row;
  for (std::size_t i = 0; i <= t; ++i) row.push_back(accuracy(net, test.restrict_to(protocol.tasks[i])));
  return row;
}

// Distills robust samples for the classes just learned and re-consolidates
// every robust sample of earlier classes. Results are merged per class in
// ascending class order.
void refresh_robust_memory(ExperimentState& state, const LabeledDataset& task_train,
                           const std::set<int>& new_classes, const ExperimentConfig& cfg,
                           int t, ExperimentResult& result) {
  RehearsalMemory& mem = state.mem;
  std::vector<DistillJob> jobs;
  std::vector<int> job_class;

  // Memory originals of other classes, used only when the current task
  // holds a single class and offers no eligible source.
  LabeledDataset fallback_pool{{}, task_train.class_count, Split::train};
  for (const auto& [c, store] : mem.originals()) {
    if (!new_classes.count(c)) fallback_pool.samples.insert(fallback_pool.samples.end(), store.begin(), store.end());
  }

  for (int c : new_classes) {
    auto it = mem.originals().find(c);
    if (it == mem.originals().end()) continue;
    const auto& exemplars = it->second;
    const std::size_t k = std::min(exemplars.size(), static_cast<std::size_t>(cfg.k_clr));
    for (std::size_t j = 0; j < k; ++j) {
      const std::uint64_t seed = mix_seed(cfg.train.seed, "distill-source",
                                          (static_cast<std::uint64_t>(t) * 1000u + static_cast<std::uint64_t>(c)) * 1000u + j);
      const Sample* source = nullptr;
      try {
        source = &pick_source(task_train, c, seed);
      } catch (const EmptyPoolError&) {
        source = &pick_source(fallback_pool, c, seed);
      }
      jobs.push_back({source, &exemplars[j], nullptr, seed});
      job_class.push_back(c);
    }
  }
  const std::size_t fresh_jobs = jobs.size();
  for (const auto& [c, list] : mem.robust()) {
    if (new_classes.count(c)) continue;
    for (const auto& prior : list) {
      const Sample* target = mem.find_exemplar(prior.target_id);
      if (!target) throw MissingExemplarError("re-consolidation: target '" + prior.target_id + "' missing");
      jobs.push_back({nullptr, target, &prior, prior.seed});
      job_class.push_back(c);
    }
  }

  std::vector<RobustSample> results = run_distill_jobs(state.net, jobs, cfg.distill, t, cfg.threads);
  result.distill_calls += static_cast<int>(fresh_jobs);
  result.reconsolidation_calls += static_cast<int>(jobs.size() - fresh_jobs);
  state.history.back().distilled = static_cast<int>(fresh_jobs);
  state.history.back().reconsolidated = static_cast<int>(jobs.size() - fresh_jobs);

  std::map<int, std::vector<RobustSample>> by_class;
  for (std::size_t i = 0; i < results.size(); ++i) by_class[job_class[i]].push_back(std::move(results[i]));
  for (auto& [c, list] : by_class) mem.replace_robust(c, std::move(list));
}

void write_artifacts(const ExperimentState& state, const std::filesystem::path& dir, int t) {
  std::filesystem::create_directories(dir);
  const std::string tag = "task-" + std::to_string(t);
  save_checkpoint(state.net, dir / (tag + ".ckpt"));
  state.mem.save_snapshot(dir / ("memory-" + tag));
  for (const auto& [c, list] : state.mem.robust()) {
    for (std::size_t j = 0; j < list.size(); ++j) {
      export_robust_sample(list[j], dir / ("robust-" + tag),
                           "class-" + std::to_string(c) + "-" + std::to_string(j));
    }
  }
}

}  // namespace

ExperimentResult run_experiment(const TaskSequence& protocol, const DatasetBundle& data,
                                const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& artifacts) {
  protocol.validate();
  cfg.validate();
  const int classes = data.class_count();
  for (const auto& task : protocol.tasks) {
    for (int c : task) {
      if (c < 0 || c >= classes) throw ProtocolError("experiment: protocol class " + std::to_string(c) + " not in data");
    }
  }
  NetworkLayout layout = cfg.layout;
  layout.input_shape = data.input_shape();
  layout.classes = static_cast<std::size_t>(classes);
  if (cfg.strategy == Strategy::robust_rehearsal) cfg.distill.validate(layout.blocks);

  const int k_clr = cfg.strategy == Strategy::robust_rehearsal ? cfg.k_clr : 0;
  ExperimentResult result;
  result.matrix = AccuracyMatrix(protocol.size());
  ExperimentState& state = result.state;
  state.seed = cfg.train.seed;
  state.net = init_xavier(layout, mix_seed(cfg.train.seed, "init"));
  state.mem = RehearsalMemory(cfg.strategy == Strategy::fine_tune ? 0 : cfg.memory_budget,
                              cfg.budget_mode.value_or(protocol.budget_mode), k_clr);

  for (std::size_t ti = 0; ti < protocol.size(); ++ti) {
    const int t = static_cast<int>(ti) + 1;
    try {
      const std::set<int>& new_classes = protocol.tasks[ti];
      const LabeledDataset task_train = data.train.restrict_to(new_classes);
      TaskRecord record;
      record.task = t;
      record.final_train_loss = train_task(state, task_train, cfg.train);
      state.history.push_back(record);
      state.seen_classes.insert(new_classes.begin(), new_classes.end());

      if (cfg.strategy != Strategy::fine_tune) {
        state.mem.insert_task_exemplars(task_train, t, mix_seed(cfg.train.seed, "memory"));
      }
      if (cfg.strategy == Strategy::robust_rehearsal && k_clr > 0) {
        refresh_robust_memory(state, task_train, new_classes, cfg, t, result);
      }
      state.mem.validate();
      result.robust_history.push_back(state.mem.robust());

      auto row = evaluate_row(state.net, protocol, data.test, ti);
      state.history.back().accuracies = row;
      result.matrix.set_row(ti, std::move(row));
      ++state.task_index;
      if (artifacts) write_artifacts(state, *artifacts, t);
    } catch (const Error& e) {
      throw ProtocolError("task " + std::to_string(t) + ": " + e.what());
    }
  }
  if (artifacts) {
    std::ofstream csv(*artifacts / "accuracy_matrix.csv");
    if (!csv) throw IoError("cannot write accuracy_matrix.csv");
    result.matrix.write_csv(csv);
  }
  return result;
}

}  // namespace rrcl
