// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/fixtures.hpp"
#include "rrcl/error.hpp"
#include "rrcl/trainer.hpp"

using namespace rrcl;
using Catch::Matchers::WithinRel;

namespace {

DatasetBundle small_blobs(std::uint64_t seed = 1) {
  BlobSpec spec;
  spec.classes = 4;
  spec.per_class = 30;
  spec.val_per_class = 0;
  spec.test_per_class = 20;
  spec.shape = {1, 8, 8};
  spec.separation = 4.0;
  spec.seed = seed;
  return gen_blobs(spec);
}

ExperimentConfig small_config(Strategy s) {
  ExperimentConfig c;
  c.layout.width = 16;
  c.layout.blocks = 1;
  c.train.epochs_first = 4;
  c.train.epochs_rest = 4;
  c.train.batch_size = 16;
  c.train.memory_batch_size = 8;
  c.distill.steps = 30;
  c.distill.eta = 1e-2;
  c.strategy = s;
  c.memory_budget = 8;
  c.k_clr = 2;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("learning rate drops at the milestones", "[trainer]") {
  TrainConfig c;
  c.lr = 0.1;
  CHECK(c.lr_at(0, 20) == 0.1);
  CHECK(c.lr_at(9, 20) == 0.1);
  CHECK_THAT(c.lr_at(10, 20), WithinRel(0.01, 1e-12));
  CHECK_THAT(c.lr_at(14, 20), WithinRel(0.01, 1e-12));
  CHECK_THAT(c.lr_at(15, 20), WithinRel(0.001, 1e-12));
  CHECK_THAT(c.lr_at(19, 20), WithinRel(0.001, 1e-12));
  c.milestones = {1.5};
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("strategy names", "[trainer]") {
  for (auto s : {Strategy::fine_tune, Strategy::naive_rehearsal, Strategy::robust_rehearsal}) {
    CHECK(parse_strategy(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_strategy("replay"), ContractError);
}

TEST_CASE("augmentation shifts with zero padding and is seeded", "[trainer]") {
  Array x({1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<float>(i + 1);
  std::mt19937_64 a(5), b(5);
  Array xa = x, xb = x;
  augment(xa, a);
  augment(xb, b);
  CHECK(xa == xb);
  CHECK(xa.shape() == x.shape());

  // Without brightness every output pixel is either a shifted input or padding.
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 rng(s);
    Array y = x;
    augment(y, rng, 2, 0.0f);
    int kept = 0;
    for (float v : y.values()) {
      CHECK((v == 0.0f || (v >= 1.0f && v <= 16.0f && v == std::floor(v))));
      kept += v != 0.0f;
    }
    CHECK(kept >= 4);
  }
}

TEST_CASE("train_task fits the task and leaves memory alone", "[trainer]") {
  const auto data = small_blobs();
  ExperimentState st;
  NetworkLayout l;
  l.input_shape = data.input_shape();
  l.classes = 4;
  l.width = 16;
  l.blocks = 1;
  st.net = init_xavier(l, 3);
  st.mem = RehearsalMemory(8, BudgetMode::total, 0);
  TrainConfig cfg;
  cfg.epochs_first = 30;
  cfg.batch_size = 16;
  const auto task = data.train.restrict_to({0, 1});
  const double before = cross_entropy(st.net, task.samples);
  const double last = train_task(st, task, cfg);
  CHECK(last < before);
  CHECK(accuracy(st.net, data.test.restrict_to({0, 1})) > 0.9);
  CHECK(st.mem.empty());
  CHECK(st.task_index == 0);

  st.seen_classes = {0};
  CHECK_THROWS_AS(train_task(st, task, cfg), ProtocolError);
  CHECK_THROWS_AS(train_task(st, LabeledDataset{}, cfg), ContractError);
}

TEST_CASE("experiments fill the accuracy matrix per strategy", "[trainer]") {
  const auto data = small_blobs();
  const auto protocol = make_split(4, 2, std::nullopt, 0, 8);

  const auto ft = run_experiment(protocol, data, small_config(Strategy::fine_tune));
  CHECK(ft.state.mem.empty());
  CHECK(ft.distill_calls == 0);
  CHECK(ft.matrix.has_row(1));
  CHECK(ft.state.task_index == 2);
  CHECK(ft.state.seen_classes.size() == 4);

  const auto naive = run_experiment(protocol, data, small_config(Strategy::naive_rehearsal));
  CHECK(naive.state.mem.original_count() == 8);
  CHECK(naive.state.mem.robust_count() == 0);

  const auto robust = run_experiment(protocol, data, small_config(Strategy::robust_rehearsal));
  // Two classes per task, two robust samples per class.
  CHECK(robust.distill_calls == 8);
  CHECK(robust.reconsolidation_calls == 4);
  CHECK(robust.state.mem.robust_count() == 8);
  REQUIRE(robust.robust_history.size() == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto seen = protocol.classes_through(t);
    for (const auto& [c, list] : robust.robust_history[t]) {
      CHECK(seen.contains(c));
      CHECK(list.size() <= 2);
    }
  }
  // Old classes were re-distilled after task 2 rather than added to.
  for (int c : protocol.tasks[0]) {
    const auto& now = robust.robust_history[1].at(c);
    const auto& then = robust.robust_history[0].at(c);
    REQUIRE(now.size() == then.size());
    for (std::size_t j = 0; j < now.size(); ++j) {
      CHECK(now[j].target_id == then[j].target_id);
      CHECK(now[j].distilled_at_task == 2);
      CHECK(then[j].distilled_at_task == 1);
      CHECK(!(now[j].x == then[j].x));
    }
  }
  for (const auto& h : robust.state.history) CHECK(h.accuracies.size() == static_cast<std::size_t>(h.task));
}

TEST_CASE("fine-tuning forgets the first task but learns the last", "[trainer]") {
  const auto data = small_blobs(1);
  const auto protocol = make_split(4, 2, std::nullopt, 0);
  auto cfg = small_config(Strategy::fine_tune);
  cfg.train.epochs_first = 30;
  cfg.train.epochs_rest = 30;
  const auto r = run_experiment(protocol, data, cfg);
  CHECK(r.matrix.at(0, 0) > 0.8);
  CHECK(r.matrix.at(1, 1) > 0.8);
  CHECK(r.matrix.at(1, 0) < 0.3);
}

TEST_CASE("experiments are deterministic and write artifacts", "[trainer][io]") {
  const auto data = small_blobs();
  const auto protocol = make_split(4, 2, std::nullopt, 0, 8);
  const auto d1 = fixtures::scratch("trainer-a"), d2 = fixtures::scratch("trainer-b");
  auto cfg = small_config(Strategy::robust_rehearsal);
  const auto a = run_experiment(protocol, data, cfg, d1);
  cfg.threads = 3;
  const auto b = run_experiment(protocol, data, cfg, d2);
  CHECK(a.state.net == b.state.net);
  CHECK(a.state.mem == b.state.mem);
  CHECK(slurp(d1 / "accuracy_matrix.csv") == slurp(d2 / "accuracy_matrix.csv"));
  for (const char* f : {"task-1.ckpt", "task-2.ckpt", "memory-task-2/manifest.txt", "memory-task-2/arrays.bin",
                        "robust-task-2/class-0-0.pgm", "robust-task-2/class-0-0.txt"}) {
    INFO(f);
    CHECK(std::filesystem::exists(d1 / f));
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  CHECK(RehearsalMemory::load_snapshot(d1 / "memory-task-2") == a.state.mem);
}

TEST_CASE("task failures are reported with their index", "[trainer]") {
  const auto data = small_blobs();
  auto protocol = make_split(4, 2, std::nullopt, 0);
  auto cfg = small_config(Strategy::naive_rehearsal);
  cfg.memory_budget = 3;  // cannot hold four classes
  try {
    run_experiment(protocol, data, cfg);
    FAIL("expected a protocol error");
  } catch (const ProtocolError& e) {
    CHECK_THAT(std::string(e.what()), Catch::Matchers::StartsWith("task 2:"));
  }
  protocol.tasks[1].insert(9);
  CHECK_THROWS_AS(run_experiment(protocol, data, cfg), ProtocolError);
}
