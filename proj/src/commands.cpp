// SPDX-License-Identifier: Apache-2.0

#include "rrcl/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "rrcl/checkpoint.hpp"
#include "rrcl/image_io.hpp"
#include "rrcl/metrics.hpp"
#include "rrcl/rng.hpp"

namespace rrcl {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

RunOutcome cmd_run(const ExperimentManifest& m) {
  std::filesystem::create_directories(m.output);
  write_text(m.output / "manifest.resolved", resolved_manifest(m));
  const DatasetBundle data = materialize_dataset(m.dataset);
  const TaskSequence protocol = build_protocol(m, data.class_count());

  RunOutcome outcome;
  outcome.output = m.output;
  for (Strategy s : m.strategies) {
    for (std::uint64_t seed : m.seeds) {
      const auto dir = m.output / to_string(s) / ("seed-" + std::to_string(seed));
      const ExperimentResult r = run_experiment(protocol, data, experiment_config(m, s, seed), dir);
      outcome.runs.push_back({s, seed, aca(r.matrix)});
    }
  }

  std::ostringstream runs;
  runs << "strategy,seed,aca\n";
  for (const auto& r : outcome.runs) runs << to_string(r.strategy) << ',' << r.seed << ',' << fmt(r.aca) << '\n';
  write_text(m.output / "runs.csv", runs.str());

  std::ostringstream summary;
  summary << "strategy,seeds,aca_mean,aca_std\n";
  for (Strategy s : m.strategies) {
    std::vector<double> v;
    for (const auto& r : outcome.runs) {
      if (r.strategy == s) v.push_back(r.aca);
    }
    double mean = 0.0;
    for (double a : v) mean += a;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double a : v) var += (a - mean) * (a - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    summary << to_string(s) << ',' << v.size() << ',' << fmt(mean) << ',' << fmt(sd) << '\n';
  }
  write_text(m.output / "summary.csv", summary.str());
  return outcome;
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "memory") return SweepAxis::memory;
  if (s == "tasks") return SweepAxis::tasks;
  throw UsageError("sweep axis must be 'memory' or 'tasks', got '" + s + "'");
}

std::vector<std::pair<int, RunRecord>> cmd_sweep(const ExperimentManifest& m, SweepAxis axis,
                                                 const std::vector<int>& values) {
  if (values.empty()) throw UsageError("sweep: no values given");
  std::set<int> unique;
  for (int v : values) {
    if (v < 1) throw UsageError("sweep: values must be positive, got " + std::to_string(v));
    if (!unique.insert(v).second) throw UsageError("sweep: duplicate value " + std::to_string(v));
  }
  const std::string axis_name = axis == SweepAxis::memory ? "memory" : "tasks";
  std::filesystem::create_directories(m.output);
  write_text(m.output / "manifest.resolved", resolved_manifest(m));

  std::vector<std::pair<int, RunRecord>> rows;
  for (int v : values) {
    ExperimentManifest point = m;
    if (axis == SweepAxis::memory) {
      point.memory_budget = v;
    } else {
      point.protocol.tasks = v;
    }
    point.output = m.output / (axis_name + "-" + std::to_string(v));
    for (const auto& r : cmd_run(point).runs) rows.emplace_back(v, r);
  }
  std::ostringstream csv;
  csv << axis_name << ",strategy,seed,aca\n";
  for (const auto& [v, r] : rows) csv << v << ',' << to_string(r.strategy) << ',' << r.seed << ',' << fmt(r.aca) << '\n';
  write_text(m.output / "sweep.csv", csv.str());
  return rows;
}

std::vector<RobustSample> cmd_distill(const DistillRequest& req) {
  if (req.count < 1) throw UsageError("distill: count must be positive");
  const Network net = load_checkpoint(req.checkpoint);
  const LabeledDataset& train = req.data.train;
  std::vector<const Sample*> targets;
  for (const auto& s : train.samples) {
    if (s.label == req.class_id && static_cast<int>(targets.size()) < req.count) targets.push_back(&s);
  }
  if (targets.empty()) {
    throw UsageError("distill: class " + std::to_string(req.class_id) + " is absent from the training split");
  }
  req.cfg.validate(net.block_count());

  std::vector<RobustSample> out;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const auto dir = req.output / ("class-" + std::to_string(req.class_id) + "-" + std::to_string(j));
    std::filesystem::create_directories(dir);
    const std::uint64_t seed = mix_seed(req.seed, "cli-distill-source", j);
    const Sample& source = pick_source(train, req.class_id, seed);
    const std::string ext = pnm_extension(source.x.shape());
    write_pnm(dir / ("source" + ext), source.x);
    write_pnm(dir / ("target" + ext), targets[j]->x);
    DistillObserver observer;
    if (req.snapshot_every > 0) {
      observer = [&](int step, const Array& x, double) {
        if ((step + 1) % req.snapshot_every == 0) write_pnm(dir / ("step-" + std::to_string(step + 1) + ext), x);
      };
    }
    RobustSample r = distill_sample(net, source, *targets[j], req.cfg, seed, 0, observer);
    export_robust_sample(r, dir, "final");
    out.push_back(std::move(r));
  }
  return out;
}

std::map<std::string, double> cmd_eval(const std::filesystem::path& checkpoint, const DatasetBundle& data) {
  const Network net = load_checkpoint(checkpoint);
  std::map<std::string, double> out;
  for (const auto* ds : {&data.train, &data.val, &data.test}) {
    if (!ds->empty()) out[to_string(ds->split)] = accuracy(net, *ds);
  }
  return out;
}

std::size_t cmd_export(const std::filesystem::path& snapshot, const std::filesystem::path& out) {
  const RehearsalMemory mem = RehearsalMemory::load_snapshot(snapshot);
  std::filesystem::create_directories(out);
  std::size_t files = 0;
  for (const auto& [c, store] : mem.originals()) {
    for (const auto& s : store) {
      write_pnm(out / ("exemplar-" + std::to_string(c) + "-" + s.id + pnm_extension(s.x.shape())), s.x);
      ++files;
    }
  }
  for (const auto& [c, list] : mem.robust()) {
    for (std::size_t j = 0; j < list.size(); ++j) {
      export_robust_sample(list[j], out, "robust-" + std::to_string(c) + "-" + std::to_string(j));
      files += 2;
    }
  }
  return files;
}

namespace {

struct DataOptions {
  std::string dataset;
  std::string manifest;
  std::vector<std::string> overrides;
};

DatasetBundle resolve_data(const DataOptions& o) {
  if (!o.dataset.empty() && !o.manifest.empty()) throw UsageError("give either --dataset or --manifest, not both");
  if (!o.dataset.empty()) {
    if (!std::filesystem::exists(std::filesystem::path(o.dataset) / "labels.csv")) {
      throw UsageError("--dataset: '" + o.dataset + "' has no labels.csv");
    }
    return load_dataset(o.dataset);
  }
  if (!o.manifest.empty()) return materialize_dataset(parse_manifest(std::filesystem::path(o.manifest), o.overrides).dataset);
  throw UsageError("a dataset is required: --dataset DIR or --manifest FILE");
}

ExperimentManifest load_manifest(const std::string& path, const std::vector<std::string>& overrides) {
  if (path.empty()) {
    std::istringstream empty;
    return parse_manifest(empty, overrides);
  }
  return parse_manifest(std::filesystem::path(path), overrides);
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Class-incremental learning with robust rehearsal memory"};
  app.require_subcommand(1);

  std::string manifest_path;
  std::vector<std::string> overrides;
  std::string output;

  auto* run = app.add_subcommand("run", "Train every strategy/seed of a manifest and summarise ACA");
  run->add_option("-m,--manifest", manifest_path, "Experiment manifest (INI)");
  run->add_option("-s,--set", overrides, "Override a manifest field: section.key=value");
  run->add_option("-o,--output", output, "Output directory (experiment.output)");

  std::string axis;
  std::string values_text;
  auto* sweep = app.add_subcommand("sweep", "Repeat run over memory budgets or task counts");
  sweep->add_option("-m,--manifest", manifest_path, "Experiment manifest (INI)");
  sweep->add_option("-s,--set", overrides, "Override a manifest field: section.key=value");
  sweep->add_option("-o,--output", output, "Output directory (experiment.output)");
  sweep->add_option("--axis", axis, "memory or tasks")->required();
  sweep->add_option("--values", values_text, "Comma-separated values")->required();

  DataOptions data_opts;
  std::string checkpoint;
  DistillRequest dreq;
  std::string betas_text;
  bool no_anneal = false;
  auto* distill = app.add_subcommand("distill", "Distill robust samples for one class from a checkpoint");
  distill->add_option("-c,--checkpoint", checkpoint, "Network checkpoint")->required();
  distill->add_option("-d,--dataset", data_opts.dataset, "Dataset directory with labels.csv");
  distill->add_option("-m,--manifest", data_opts.manifest, "Take the dataset from a manifest");
  distill->add_option("--class", dreq.class_id, "Target class id")->required();
  distill->add_option("-k,--count", dreq.count, "Number of robust samples");
  distill->add_option("--snapshot-every", dreq.snapshot_every, "Write the iterate every N steps");
  distill->add_option("--steps", dreq.cfg.steps, "Optimisation steps");
  distill->add_option("--eta", dreq.cfg.eta, "Input learning rate");
  distill->add_option("--momentum", dreq.cfg.momentum, "Momentum");
  distill->add_option("--alpha", dreq.cfg.alpha, "Input-space weight");
  distill->add_option("--gamma", dreq.cfg.gamma, "Logit-space weight");
  distill->add_option("--betas", betas_text, "Comma-separated per-block feature weights");
  distill->add_flag("--no-anneal", no_anneal, "Constant learning rate");
  distill->add_option("--seed", dreq.seed, "Source selection seed");
  distill->add_option("-o,--output", output, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Accuracy of a checkpoint on a dataset");
  eval->add_option("-c,--checkpoint", checkpoint, "Network checkpoint")->required();
  eval->add_option("-d,--dataset", data_opts.dataset, "Dataset directory with labels.csv");
  eval->add_option("-m,--manifest", data_opts.manifest, "Take the dataset from a manifest");

  std::string snapshot;
  auto* exp = app.add_subcommand("export", "Render a memory snapshot as images");
  exp->add_option("--snapshot", snapshot, "Memory snapshot directory")->required();
  exp->add_option("-o,--output", output, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (!output.empty() && (*run || *sweep)) overrides.push_back("experiment.output=" + output);
    if (*run) {
      const auto outcome = cmd_run(load_manifest(manifest_path, overrides));
      std::cout << "wrote " << outcome.runs.size() << " runs to " << outcome.output.string() << '\n';
      std::ifstream summary(outcome.output / "summary.csv");
      std::cout << summary.rdbuf();
    } else if (*sweep) {
      std::vector<int> values;
      std::istringstream vs(values_text);
      std::string item;
      while (std::getline(vs, item, ',')) {
        try {
          values.push_back(std::stoi(item));
        } catch (const std::exception&) {
          throw UsageError("--values: '" + item + "' is not an integer");
        }
      }
      const auto m = load_manifest(manifest_path, overrides);
      const auto rows = cmd_sweep(m, parse_sweep_axis(axis), values);
      std::cout << "wrote " << rows.size() << " rows to " << (m.output / "sweep.csv").string() << '\n';
    } else if (*distill) {
      dreq.checkpoint = checkpoint;
      dreq.output = output;
      dreq.data = resolve_data(data_opts);
      dreq.cfg.anneal = !no_anneal;
      if (!betas_text.empty()) {
        std::istringstream bs(betas_text);
        std::string b;
        while (std::getline(bs, b, ',')) {
          try {
            dreq.cfg.betas.push_back(std::stod(b));
          } catch (const std::exception&) {
            throw UsageError("--betas: '" + b + "' is not a number");
          }
        }
      }
      for (const auto& r : cmd_distill(dreq)) {
        std::cout << "class " << r.class_id << " target " << r.target_id << " source " << r.source_id
                  << " final_loss " << r.final_loss << '\n';
      }
    } else if (*eval) {
      for (const auto& [split, acc] : cmd_eval(checkpoint, resolve_data(data_opts))) {
        std::cout << split << ' ' << fmt(acc) << '\n';
      }
    } else if (*exp) {
      std::cout << "wrote " << cmd_export(snapshot, output) << " files to " << output << '\n';
    }
  } catch (const ManifestError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace rrcl
