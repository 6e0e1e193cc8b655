// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "../support/fixtures.hpp"
#include "rrcl/commands.hpp"
#include "rrcl/image_io.hpp"

using namespace rrcl;

namespace {

const char* kTiny = R"([dataset]
classes = 4
per_class = 10
val_per_class = 0
test_per_class = 5
shape = 1x6x6
[protocol]
tasks = 2
[model]
width = 8
blocks = 1
[train]
epochs_first = 1
epochs_rest = 1
batch_size = 8
memory_batch_size = 4
[distill]
steps = 5
[memory]
budget = 4
k_clr = 1
[experiment]
strategies = fine-tune, naive-rehearsal, robust-rehearsal
seeds = 0, 1
)";

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rrcl");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::filesystem::path tiny_manifest(const std::filesystem::path& dir) {
  std::ofstream(dir / "tiny.ini") << kTiny;
  return dir / "tiny.ini";
}

}  // namespace

TEST_CASE("usage errors exit with 2", "[cli]") {
  CHECK(cli({}) == 2);
  CHECK(cli({"train"}) == 2);
  CHECK(cli({"eval"}) == 2);
  CHECK(cli({"run", "--bogus"}) == 2);
  CHECK(cli({"--help"}) == 0);
}

TEST_CASE("manifests parse, override and reject unknown fields", "[cli][manifest]") {
  std::istringstream in(kTiny);
  const auto m = parse_manifest(in, {"memory.budget=12", "train.lr=0.5"});
  CHECK(m.memory_budget == 12);
  CHECK(m.train.lr == 0.5);
  CHECK(m.dataset.blobs.shape == Shape{1, 6, 6});
  CHECK(m.strategies.size() == 3);
  CHECK(m.seeds == std::vector<std::uint64_t>{0, 1});

  std::istringstream again(resolved_manifest(m));
  CHECK(resolved_manifest(parse_manifest(again)) == resolved_manifest(m));

  std::istringstream bad("[model]\nwidht = 3\nblocks = 0\n[nonsense]\na = 1\n");
  try {
    parse_manifest(bad);
    FAIL("expected a manifest error");
  } catch (const ManifestError& e) {
    CHECK(e.problems().size() == 3);
  }
  std::istringstream ok(kTiny);
  CHECK_THROWS_AS(parse_manifest(ok, {"no-dot"}), ManifestError);
  std::istringstream path("[dataset]\nsource = path\n");
  CHECK_THROWS_AS(parse_manifest(path), ManifestError);
}

TEST_CASE("output root defaults from the environment", "[cli][manifest]") {
  const auto root = fixtures::scratch("env-root");
  ::setenv("RRCL_OUTPUT_ROOT", root.c_str(), 1);
  std::istringstream in(kTiny);
  CHECK(parse_manifest(in).output == root / "rrcl-run");
  ::unsetenv("RRCL_OUTPUT_ROOT");
}

TEST_CASE("run writes per-run rows, a summary and the resolved manifest", "[cli]") {
  const auto dir = fixtures::scratch("cli-run");
  const auto ini = tiny_manifest(dir);
  REQUIRE(cli({"run", "-m", ini.string(), "-o", (dir / "out").string(), "--set", "memory.budget=8"}) == 0);
  const auto runs = lines(dir / "out" / "runs.csv");
  REQUIRE(runs.size() == 1 + 6);
  CHECK(runs[0] == "strategy,seed,aca");
  const auto summary = lines(dir / "out" / "summary.csv");
  REQUIRE(summary.size() == 1 + 3);
  CHECK(summary[0] == "strategy,seeds,aca_mean,aca_std");
  const auto resolved = parse_manifest(dir / "out" / "manifest.resolved");
  CHECK(resolved.memory_budget == 8);
  CHECK(std::filesystem::exists(dir / "out" / "robust-rehearsal" / "seed-1" / "accuracy_matrix.csv"));
  CHECK(std::filesystem::exists(dir / "out" / "naive-rehearsal" / "seed-0" / "task-2.ckpt"));

  const auto ckpt = dir / "out" / "robust-rehearsal" / "seed-0" / "task-2.ckpt";
  CHECK(cli({"eval", "-c", ckpt.string(), "-m", ini.string()}) == 0);
  CHECK(cli({"eval", "-c", (dir / "missing.ckpt").string(), "-m", ini.string()}) == 1);

  const auto snap = dir / "out" / "robust-rehearsal" / "seed-0" / "memory-task-2";
  REQUIRE(cli({"export", "--snapshot", snap.string(), "-o", (dir / "export").string()}) == 0);
  std::size_t images = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "export")) {
    images += e.path().extension() == ".pgm";
  }
  // Eight exemplars plus one robust sample per class.
  CHECK(images == 12);
}

TEST_CASE("bad manifests and invalid fields exit with 2", "[cli]") {
  const auto dir = fixtures::scratch("cli-bad");
  const auto ini = tiny_manifest(dir);
  CHECK(cli({"run", "-m", ini.string(), "--set", "memory.budget=-3"}) == 2);
  CHECK(cli({"run", "-m", ini.string(), "--set", "model.depth=3"}) == 2);
  CHECK(cli({"run", "-m", (dir / "none.ini").string()}) == 2);
}

TEST_CASE("sweep writes one row per value, strategy and seed", "[cli]") {
  const auto dir = fixtures::scratch("cli-sweep");
  const auto ini = tiny_manifest(dir);
  REQUIRE(cli({"sweep", "-m", ini.string(), "-o", (dir / "out").string(), "--axis", "memory", "--values", "4,8"}) == 0);
  const auto rows = lines(dir / "out" / "sweep.csv");
  REQUIRE(rows.size() == 1 + 2 * 3 * 2);
  CHECK(rows[0] == "memory,strategy,seed,aca");
  CHECK(rows[1].rfind("4,", 0) == 0);
  CHECK(rows.back().rfind("8,", 0) == 0);
  CHECK(std::filesystem::exists(dir / "out" / "memory-8" / "summary.csv"));

  CHECK(cli({"sweep", "-m", ini.string(), "-o", (dir / "o2").string(), "--axis", "memory", "--values", "4,4"}) == 2);
  CHECK(cli({"sweep", "-m", ini.string(), "-o", (dir / "o2").string(), "--axis", "depth", "--values", "4"}) == 2);
  CHECK(cli({"sweep", "-m", ini.string(), "-o", (dir / "o2").string(), "--axis", "memory", "--values", "x"}) == 2);
}

TEST_CASE("distill writes snapshots and final samples", "[cli]") {
  const auto dir = fixtures::scratch("cli-distill");
  const auto ini = tiny_manifest(dir);
  REQUIRE(cli({"run", "-m", ini.string(), "-o", (dir / "out").string(), "--set", "experiment.strategies=fine-tune",
               "--set", "experiment.seeds=0"}) == 0);
  const auto ckpt = dir / "out" / "fine-tune" / "seed-0" / "task-2.ckpt";
  REQUIRE(cli({"distill", "-c", ckpt.string(), "-m", ini.string(), "--class", "2", "-k", "2", "--steps", "20",
               "--snapshot-every", "10", "-o", (dir / "d").string()}) == 0);
  for (const char* f : {"class-2-0/source.pgm", "class-2-0/target.pgm", "class-2-0/step-10.pgm",
                        "class-2-1/final.pgm", "class-2-1/final.txt"}) {
    INFO(f);
    CHECK(std::filesystem::exists(dir / "d" / f));
  }
  CHECK(read_sidecar(dir / "d" / "class-2-1" / "final.txt").at("class_id") == "2");
  CHECK(cli({"distill", "-c", ckpt.string(), "-m", ini.string(), "--class", "2", "-k", "0", "-o", (dir / "d").string()}) == 2);
  CHECK(cli({"distill", "-c", ckpt.string(), "-m", ini.string(), "--class", "9", "-o", (dir / "d").string()}) == 2);
  CHECK(cli({"distill", "-c", ckpt.string(), "-m", ini.string(), "--class", "2", "--betas", "a", "-o", (dir / "d").string()}) == 2);
}
