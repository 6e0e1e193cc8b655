// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/gradcheck.hpp"
#include "../support/oracle.hpp"
#include "rrcl/checkpoint.hpp"
#include "rrcl/error.hpp"
#include "rrcl/network.hpp"

using namespace rrcl;
using Catch::Matchers::WithinAbs;

namespace {

NetworkLayout small_layout(Activation a = Activation::relu) {
  NetworkLayout l;
  l.input_shape = {1, 4, 4};
  l.width = 8;
  l.blocks = 2;
  l.classes = 3;
  l.activation = a;
  return l;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rrcl-gradnet-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("forward pass agrees with the double-precision reference", "[gradnet]") {
  std::mt19937_64 rng(3);
  for (auto act : {Activation::relu, Activation::linear}) {
    const Network net = init_xavier(small_layout(act), 11);
    const auto o = oracle::from_network(net);
    const Array x = oracle::random_array({1, 4, 4}, rng, 1.0);
    const auto t = forward_with_features(net, x);
    const auto ref = oracle::forward(o, oracle::to_vec(x));
    REQUIRE(t.features.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      REQUIRE(t.features[i].shape() == Shape{8});
      for (std::size_t k = 0; k < 8; ++k) CHECK_THAT(t.features[i][k], WithinAbs(ref.features[i][k], 1e-5));
    }
    REQUIRE(t.logits.shape() == Shape{3});
    for (std::size_t k = 0; k < 3; ++k) CHECK_THAT(t.logits[k], WithinAbs(ref.logits[k], 1e-5));
  }
}

TEST_CASE("forward rejects a mismatched input shape", "[gradnet]") {
  const Network net = init_xavier(small_layout(), 0);
  CHECK_THROWS_AS(forward_with_features(net, Array({16})), ShapeError);
  CHECK_THROWS_AS(forward_with_features(net, Array({1, 4, 5})), ShapeError);
}

TEST_CASE("analytic gradients match central differences", "[gradnet]") {
  for (std::uint64_t seed = 1000; seed < 1020; ++seed) {
    const auto r = oracle::check_random_network(seed);
    INFO("seed " << seed);
    CHECK(r.input_rel < 1e-4);
    CHECK(r.param_rel < 1e-4);
  }
}

TEST_CASE("grad_wrt_input with a zero loss gradient is zero", "[gradnet]") {
  const Network net = init_xavier(small_layout(), 2);
  const TraceLoss zero = [](const ForwardTrace&) { return LossValue{}; };
  const Array g = grad_wrt_input(net, Array({1, 4, 4}, 0.5f), zero);
  REQUIRE(g.shape() == Shape{1, 4, 4});
  for (float v : g.values()) CHECK(v == 0.0f);
}

TEST_CASE("input gradient flags non-finite losses", "[gradnet]") {
  const Network net = init_xavier(small_layout(), 2);
  const TraceLoss bad = [](const ForwardTrace&) {
    LossValue lv;
    lv.value = NAN;
    return lv;
  };
  CHECK_THROWS_AS(value_and_grad_wrt_input(net, Array({1, 4, 4}), bad), NumericError);
}

TEST_CASE("cross-entropy matches the reference and rejects bad labels", "[gradnet]") {
  const Network net = init_xavier(small_layout(), 5);
  std::mt19937_64 rng(9);
  std::vector<Sample> batch;
  for (int i = 0; i < 5; ++i) batch.push_back({"s" + std::to_string(i), oracle::random_array({1, 4, 4}, rng, 1.0), i % 3});
  std::vector<oracle::Vec> xs;
  std::vector<int> ys;
  for (const auto& s : batch) {
    xs.push_back(oracle::to_vec(s.x));
    ys.push_back(s.label);
  }
  CHECK_THAT(cross_entropy(net, batch), WithinAbs(oracle::cross_entropy(oracle::from_network(net), xs, ys), 1e-5));
  CHECK_THAT(grad_wrt_params(net, batch).loss, WithinAbs(cross_entropy(net, batch), 1e-9));
  batch[0].label = 3;
  CHECK_THROWS_AS(cross_entropy(net, batch), ContractError);
  CHECK_THROWS_AS(grad_wrt_params(net, std::span<const Sample>{}), ContractError);
}

TEST_CASE("xavier initialisation respects its bounds and is seeded", "[gradnet]") {
  const auto layout = small_layout();
  const Network a = init_xavier(layout, 7);
  const Network b = init_xavier(layout, 7);
  const Network c = init_xavier(layout, 8);
  CHECK(a == b);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());

  const auto names = a.parameter_names();
  const auto params = a.parameters();
  REQUIRE(names.size() == params.size());
  REQUIRE(names.size() == 2 + 4 * layout.blocks + 2);
  CHECK(names.front() == "stem.weight");
  CHECK(names.back() == "head.bias");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Array& p = *params[k];
    if (p.shape().size() == 1) {
      for (float v : p.values()) CHECK(v == 0.0f);
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(p.shape()[0] + p.shape()[1]));
    double max_abs = 0.0;
    for (float v : p.values()) max_abs = std::max(max_abs, std::abs(static_cast<double>(v)));
    INFO(names[k]);
    CHECK(max_abs <= bound);
    CHECK(max_abs > 0.5 * bound);
  }
}

TEST_CASE("sgd follows the momentum recurrence", "[gradnet]") {
  Array p({2}, std::vector<float>{1.0f, -2.0f});
  Array* ps[] = {&p};
  std::vector<Array> vel;
  const Array g1({2}, std::vector<float>{0.5f, 1.0f});
  const Array g2({2}, std::vector<float>{-1.0f, 2.0f});
  sgd_step(ps, std::span<const Array>(&g1, 1), 0.1f, 0.9f, vel);
  // v1 = g1, p1 = p0 - 0.1 g1
  CHECK_THAT(p[0], WithinAbs(0.95, 1e-6));
  CHECK_THAT(p[1], WithinAbs(-2.1, 1e-6));
  sgd_step(ps, std::span<const Array>(&g2, 1), 0.1f, 0.9f, vel);
  // v2 = 0.9 v1 + g2 = (-0.55, 2.9)
  CHECK_THAT(vel[0][0], WithinAbs(-0.55, 1e-6));
  CHECK_THAT(vel[0][1], WithinAbs(2.9, 1e-6));
  CHECK_THAT(p[0], WithinAbs(1.005, 1e-6));
  CHECK_THAT(p[1], WithinAbs(-2.39, 1e-6));
}

TEST_CASE("sgd leaves parameters untouched on a non-finite gradient", "[gradnet]") {
  Array p({3}, std::vector<float>{1.0f, 2.0f, 3.0f});
  const Array before = p;
  Array* ps[] = {&p};
  std::vector<Array> vel;
  const Array g({3}, std::vector<float>{0.0f, NAN, 1.0f});
  CHECK_THROWS_AS(sgd_step(ps, std::span<const Array>(&g, 1), 0.1f, 0.9f, vel), NumericError);
  CHECK(p == before);
  const Array wrong({2});
  CHECK_THROWS_AS(sgd_step(ps, std::span<const Array>(&wrong, 1), 0.1f, 0.9f, vel), ShapeError);
  CHECK_THROWS_AS(sgd_step(ps, std::span<const Array>(&g, 1), 0.0f, 0.9f, vel), ContractError);
}

TEST_CASE("argmax prefers the lowest index on ties", "[gradnet]") {
  const std::vector<float> z{0.5f, 2.0f, 2.0f, -1.0f};
  CHECK(argmax(z) == 1);
  const std::vector<float> flat(4, 0.0f);
  CHECK(argmax(flat) == 0);
}

TEST_CASE("checkpoints round-trip bit-exactly", "[gradnet][io]") {
  const auto dir = scratch("ckpt");
  for (auto act : {Activation::relu, Activation::linear}) {
    const Network net = init_xavier(small_layout(act), 21);
    save_checkpoint(net, dir / "a.ckpt");
    const Network back = load_checkpoint(dir / "a.ckpt");
    CHECK(back == net);
    CHECK(back.layout() == net.layout());
    CHECK(back.seed() == 21);
    CHECK(back.checksum() == net.checksum());
    save_checkpoint(back, dir / "b.ckpt");
    std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    CHECK(sa.rfind("GRADNET v1\n", 0) == 0);
  }
}

TEST_CASE("corrupt checkpoints raise IoError", "[gradnet][io]") {
  const auto dir = scratch("corrupt");
  const Network net = init_xavier(small_layout(), 1);
  save_checkpoint(net, dir / "ok.ckpt");
  std::ifstream in(dir / "ok.ckpt", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});

  std::ofstream(dir / "magic.ckpt", std::ios::binary) << "GRADNOT v1\n" << bytes.substr(11);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), IoError);
  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 7);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST_CASE("record files keep metadata and arbitrary arrays", "[gradnet][io]") {
  RecordFile f;
  f.metadata = {"hello world", "k=v"};
  f.records.push_back({"a", Array({2, 3}, std::vector<float>{1, 2, 3, 4, 5, -0.0f})});
  f.records.push_back({"b.c", Array({1}, std::vector<float>{1e-38f})});
  std::stringstream ss;
  write_records(ss, f);
  const RecordFile g = read_records(ss);
  CHECK(g.metadata == f.metadata);
  CHECK(g.records == f.records);
  CHECK(std::signbit(g.records[0].value[5]));
}
