// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "../support/attitude_oracle.hpp"
#include "rrcl/dataset.hpp"
#include "rrcl/error.hpp"
#include "rrcl/metrics.hpp"
#include "rrcl/protocols.hpp"
#include "rrcl/trainer.hpp"

using namespace rrcl;

namespace {

std::vector<std::size_t> sizes(const TaskSequence& s) {
  std::vector<std::size_t> out;
  for (const auto& t : s.tasks) out.push_back(t.size());
  return out;
}

void check_partition(const TaskSequence& s, int classes) {
  std::set<int> all;
  std::size_t total = 0;
  for (const auto& t : s.tasks) {
    total += t.size();
    all.insert(t.begin(), t.end());
  }
  CHECK(total == all.size());
  CHECK(all.size() == static_cast<std::size_t>(classes));
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == classes - 1);
}

double joint_accuracy(double separation) {
  BlobSpec spec;
  spec.separation = separation;
  spec.per_class = 60;
  spec.test_per_class = 40;
  spec.seed = 3;
  const auto data = gen_blobs(spec);
  NetworkLayout layout;
  layout.input_shape = data.input_shape();
  layout.classes = static_cast<std::size_t>(data.class_count());
  ExperimentState st;
  st.net = init_xavier(layout, 1);
  TrainConfig cfg;
  cfg.epochs_first = 15;
  cfg.augment = false;
  train_task(st, data.train, cfg);
  return accuracy(st.net, data.test);
}

}  // namespace

TEST_CASE("split sizes", "[protocols]") {
  CHECK(sizes(make_split(10, 2, std::nullopt, 0)) == std::vector<std::size_t>{5, 5});
  CHECK(sizes(make_split(10, 9, 2, 0)) == std::vector<std::size_t>{2, 1, 1, 1, 1, 1, 1, 1, 1});
  CHECK(sizes(make_split(100, 20, std::nullopt, 0)) == std::vector<std::size_t>(20, 5));
  CHECK(sizes(make_split(6, 3, std::nullopt, 0)) == std::vector<std::size_t>{2, 2, 2});
  CHECK(make_split(10, 5, std::nullopt, 0).protocol_name == "split-5");
  CHECK(make_split(10, 5, std::nullopt, 0, 1024).memory_budget == 1024);
}

TEST_CASE("split rejects infeasible arithmetic", "[protocols]") {
  CHECK_THROWS_AS(make_split(10, 3, std::nullopt, 0), ProtocolError);
  CHECK_THROWS_AS(make_split(3, 5, std::nullopt, 0), ProtocolError);
  CHECK_THROWS_AS(make_split(10, 4, 3, 0), ProtocolError);
  CHECK_THROWS_AS(make_split(10, 2, 11, 0), ProtocolError);
  CHECK_THROWS_AS(make_split(0, 1, std::nullopt, 0), ProtocolError);
}

TEST_CASE("class order follows the seed", "[protocols]") {
  CHECK(make_split(10, 5, std::nullopt, 4).tasks == make_split(10, 5, std::nullopt, 4).tasks);
  bool differs = false;
  for (std::uint64_t s = 1; s < 10 && !differs; ++s) {
    differs = make_split(10, 5, std::nullopt, 0).tasks != make_split(10, 5, std::nullopt, s).tasks;
  }
  CHECK(differs);
}

TEST_CASE("B0 and B50 layouts", "[protocols]") {
  const auto b0 = make_b0(100, 10, 0);
  CHECK(sizes(b0) == std::vector<std::size_t>(10, 10));
  CHECK(b0.memory_budget == 2000);
  CHECK(b0.budget_mode == BudgetMode::total);
  CHECK(b0.protocol_name == "B0");

  const auto b50 = make_b50(100, 10, 0);
  CHECK(sizes(b50) == std::vector<std::size_t>{50, 10, 10, 10, 10, 10});
  CHECK(b50.memory_budget == 20);
  CHECK(b50.budget_mode == BudgetMode::per_class);
  CHECK(b50.protocol_name == "B50");
  CHECK(sizes(make_b50(100, 50, 0)) == std::vector<std::size_t>{50, 50});
  CHECK(sizes(make_b50(10, 1, 0)) == std::vector<std::size_t>{5, 1, 1, 1, 1, 1});
  CHECK_THROWS_AS(make_b50(100, 7, 0), ProtocolError);
  CHECK_THROWS_AS(make_b50(9, 1, 0), ProtocolError);
}

TEST_CASE("protocols partition the classes over random configurations", "[protocols][property]") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 10)(rng);
    const int per = std::uniform_int_distribution<int>(1, 6)(rng);
    const int first = std::uniform_int_distribution<int>(1, 8)(rng);
    const int classes = first + (n - 1) * per;
    const auto s = make_split(classes, n, first, rng());
    REQUIRE(s.size() == static_cast<std::size_t>(n));
    CHECK(s.tasks[0].size() == static_cast<std::size_t>(first));
    CHECK_NOTHROW(s.validate());
    check_partition(s, classes);
    CHECK(s.classes_through(static_cast<std::size_t>(n - 1)).size() == static_cast<std::size_t>(classes));
  }
  const auto b = make_b50(20, 5, 9);
  check_partition(b, 20);
}

TEST_CASE("validate catches overlap and empty tasks", "[protocols]") {
  TaskSequence s;
  s.protocol_name = "custom";
  s.tasks = {{0, 1}, {1, 2}};
  CHECK_THROWS_AS(s.validate(), ProtocolError);
  s.tasks = {{0}, {}};
  CHECK_THROWS_AS(s.validate(), ProtocolError);
}

TEST_CASE("attitude examples", "[protocols]") {
  CHECK(attitude_class(5, 0) == Attitude::nose_up);
  CHECK(attitude_class(0, 0) == Attitude::level);
  CHECK(attitude_class(-5, 5) == Attitude::nose_down_roll_positive);
  CHECK(attitude_class(3, 3) == Attitude::level);
  CHECK(attitude_class(-3, -3.0000001) == Attitude::roll_negative);
  CHECK(std::string(attitude_abbreviation(Attitude::nose_up_roll_negative)) == "NU&RN");
  CHECK(std::string(attitude_abbreviation(Attitude::level)) == "L");
  CHECK_THROWS_AS(attitude_class(NAN, 0), NumericError);
  CHECK_THROWS_AS(attitude_class(0, INFINITY), NumericError);
  CHECK_THROWS_AS(attitude_class(0, 0, 0.0), ContractError);
}

TEST_CASE("attitude binning partitions a fine grid", "[protocols]") {
  for (double alpha : {3.0, 1.5}) {
    for (int i = -120; i <= 120; ++i) {
      for (int j = -120; j <= 120; ++j) {
        const double p = i * alpha / 60.0, r = j * alpha / 60.0;
        const int want = oracle::attitude_row(p, r, alpha);
        REQUIRE(want >= 0);
        if (static_cast<int>(attitude_class(p, r, alpha)) != want) {
          FAIL("pitch " << p << " roll " << r << " alpha " << alpha);
        }
      }
    }
  }
}

TEST_CASE("blob datasets are seeded and well formed", "[protocols][data]") {
  BlobSpec spec;
  spec.seed = 5;
  const auto a = gen_blobs(spec), b = gen_blobs(spec);
  CHECK(a == b);
  spec.seed = 6;
  CHECK(!(gen_blobs(spec) == a));
  CHECK(a.train.size() == 600);
  CHECK(a.val.size() == 120);
  CHECK(a.test.size() == 300);
  CHECK(a.input_shape() == Shape{1, 16, 16});
  CHECK(a.test.split == Split::test);
  std::set<std::string> ids;
  for (const auto* d : {&a.train, &a.val, &a.test}) {
    CHECK_NOTHROW(d->validate());
    for (const auto& s : d->samples) ids.insert(s.id);
  }
  CHECK(ids.size() == 1020);
  CHECK(a.train.restrict_to({1, 4}).labels_present() == std::set<int>{1, 4});
}

TEST_CASE("blob separation controls learnability", "[protocols][data]") {
  CHECK(joint_accuracy(6.0) >= 0.99);
  const double chance = joint_accuracy(0.0);
  CHECK(std::abs(chance - 1.0 / 6.0) < 0.08);
}
