// SPDX-License-Identifier: Apache-2.0

#include "rrcl/manifest.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace rrcl {

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

long long to_integer(const std::string& s) {
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

double to_real(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("not a boolean");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

using Setter = std::function<void(const std::string&)>;

}  // namespace

ManifestError::ManifestError(std::vector<std::string> problems)
    : Error("invalid manifest:\n  " + join(problems, "\n  ")), problems_(std::move(problems)) {}

ExperimentManifest parse_manifest(std::istream& in, const std::vector<std::string>& overrides) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ManifestError({"line " + std::to_string(e.line()) + ": " + e.message()});
  }
  std::vector<std::string> override_problems;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      override_problems.push_back("override '" + o + "': expected section.key=value");
      continue;
    }
    const std::string section = trim(o.substr(0, dot));
    const std::string key = trim(o.substr(dot + 1, eq - dot - 1));
    tree.put_child(pt::ptree::path_type(section + "\x1f" + key, '\x1f'), pt::ptree(trim(o.substr(eq + 1))));
  }
  if (!override_problems.empty()) throw ManifestError(std::move(override_problems));

  ExperimentManifest m;
  bool output_given = false;
  auto positive = [](long long v, const char* what) {
    if (v < 1) throw std::invalid_argument(std::string(what) + " must be positive");
    return static_cast<int>(v);
  };
  auto non_negative = [](long long v) {
    if (v < 0) throw std::invalid_argument("must be non-negative");
    return static_cast<int>(v);
  };

  std::map<std::string, std::map<std::string, Setter>> table;
  auto& ds = table["dataset"];
  ds["source"] = [&](const std::string& v) {
    if (v != "blobs" && v != "path") throw std::invalid_argument("expected 'blobs' or 'path'");
    m.dataset.source = v;
  };
  ds["path"] = [&](const std::string& v) { m.dataset.path = v; };
  ds["classes"] = [&](const std::string& v) {
    m.dataset.blobs.classes = positive(to_integer(v), "classes");
    m.dataset.classes_override = m.dataset.blobs.classes;
  };
  ds["per_class"] = [&](const std::string& v) { m.dataset.blobs.per_class = positive(to_integer(v), "per_class"); };
  ds["val_per_class"] = [&](const std::string& v) { m.dataset.blobs.val_per_class = non_negative(to_integer(v)); };
  ds["test_per_class"] = [&](const std::string& v) { m.dataset.blobs.test_per_class = positive(to_integer(v), "test_per_class"); };
  ds["shape"] = [&](const std::string& v) {
    Shape s;
    for (const auto& d : split_list(v, 'x')) s.push_back(static_cast<std::size_t>(positive(to_integer(d), "dimension")));
    if (s.empty()) throw std::invalid_argument("empty shape");
    m.dataset.blobs.shape = s;
  };
  ds["separation"] = [&](const std::string& v) {
    m.dataset.blobs.separation = to_real(v);
    if (!(m.dataset.blobs.separation >= 0.0)) throw std::invalid_argument("must be non-negative");
  };
  ds["noise"] = [&](const std::string& v) {
    m.dataset.blobs.noise = to_real(v);
    if (!(m.dataset.blobs.noise >= 0.0)) throw std::invalid_argument("must be non-negative");
  };
  ds["modes"] = [&](const std::string& v) { m.dataset.blobs.modes = positive(to_integer(v), "modes"); };
  ds["seed"] = [&](const std::string& v) { m.dataset.blobs.seed = static_cast<std::uint64_t>(non_negative(to_integer(v))); };

  auto& pr = table["protocol"];
  pr["kind"] = [&](const std::string& v) {
    if (v != "split" && v != "b0" && v != "b50") throw std::invalid_argument("expected split, b0 or b50");
    m.protocol.kind = v;
  };
  pr["tasks"] = [&](const std::string& v) { m.protocol.tasks = positive(to_integer(v), "tasks"); };
  pr["first_task_size"] = [&](const std::string& v) { m.protocol.first_task_size = positive(to_integer(v), "first_task_size"); };
  pr["increment"] = [&](const std::string& v) { m.protocol.increment = positive(to_integer(v), "increment"); };
  pr["order_seed"] = [&](const std::string& v) { m.protocol.order_seed = static_cast<std::uint64_t>(non_negative(to_integer(v))); };

  auto& mo = table["model"];
  mo["width"] = [&](const std::string& v) { m.model.width = static_cast<std::size_t>(positive(to_integer(v), "width")); };
  mo["blocks"] = [&](const std::string& v) {
    const int b = positive(to_integer(v), "blocks");
    if (b > 8) throw std::invalid_argument("at most 8 residual blocks");
    m.model.blocks = static_cast<std::size_t>(b);
  };
  mo["activation"] = [&](const std::string& v) { m.model.activation = parse_activation(v); };

  auto& tr = table["train"];
  tr["lr"] = [&](const std::string& v) { m.train.lr = to_real(v); };
  tr["momentum"] = [&](const std::string& v) { m.train.momentum = to_real(v); };
  tr["lr_decay"] = [&](const std::string& v) { m.train.lr_decay = to_real(v); };
  tr["milestones"] = [&](const std::string& v) {
    m.train.milestones.clear();
    for (const auto& s : split_list(v)) m.train.milestones.push_back(to_real(s));
  };
  tr["epochs_first"] = [&](const std::string& v) { m.train.epochs_first = positive(to_integer(v), "epochs_first"); };
  tr["epochs_rest"] = [&](const std::string& v) { m.train.epochs_rest = positive(to_integer(v), "epochs_rest"); };
  tr["batch_size"] = [&](const std::string& v) { m.train.batch_size = positive(to_integer(v), "batch_size"); };
  tr["memory_batch_size"] = [&](const std::string& v) { m.train.memory_batch_size = non_negative(to_integer(v)); };
  tr["augment"] = [&](const std::string& v) { m.train.augment = to_bool(v); };

  auto& di = table["distill"];
  di["alpha"] = [&](const std::string& v) { m.distill.alpha = to_real(v); };
  di["betas"] = [&](const std::string& v) {
    m.distill.betas.clear();
    for (const auto& s : split_list(v)) m.distill.betas.push_back(to_real(s));
  };
  di["gamma"] = [&](const std::string& v) { m.distill.gamma = to_real(v); };
  di["eta"] = [&](const std::string& v) { m.distill.eta = to_real(v); };
  di["momentum"] = [&](const std::string& v) { m.distill.momentum = to_real(v); };
  di["steps"] = [&](const std::string& v) { m.distill.steps = positive(to_integer(v), "steps"); };
  di["anneal"] = [&](const std::string& v) { m.distill.anneal = to_bool(v); };

  auto& me = table["memory"];
  me["budget"] = [&](const std::string& v) { m.memory_budget = non_negative(to_integer(v)); };
  me["mode"] = [&](const std::string& v) {
    if (v == "total") {
      m.budget_mode = BudgetMode::total;
    } else if (v == "per_class") {
      m.budget_mode = BudgetMode::per_class;
    } else {
      throw std::invalid_argument("expected total or per_class");
    }
  };
  me["k_clr"] = [&](const std::string& v) { m.k_clr = non_negative(to_integer(v)); };

  auto& ex = table["experiment"];
  ex["strategies"] = [&](const std::string& v) {
    m.strategies.clear();
    std::set<Strategy> seen;
    for (const auto& s : split_list(v)) {
      const Strategy st = parse_strategy(s);
      if (!seen.insert(st).second) throw std::invalid_argument("duplicate strategy " + s);
      m.strategies.push_back(st);
    }
    if (m.strategies.empty()) throw std::invalid_argument("at least one strategy is required");
  };
  ex["seeds"] = [&](const std::string& v) {
    m.seeds.clear();
    std::set<std::uint64_t> seen;
    for (const auto& s : split_list(v)) {
      const auto seed = static_cast<std::uint64_t>(non_negative(to_integer(s)));
      if (!seen.insert(seed).second) throw std::invalid_argument("duplicate seed " + s);
      m.seeds.push_back(seed);
    }
    if (m.seeds.empty()) throw std::invalid_argument("at least one seed is required");
  };
  ex["output"] = [&](const std::string& v) {
    m.output = v;
    output_given = true;
  };
  ex["threads"] = [&](const std::string& v) { m.threads = static_cast<unsigned>(positive(to_integer(v), "threads")); };

  std::vector<std::string> problems;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      problems.push_back(section + ": key outside of a section");
      continue;
    }
    auto st = table.find(section);
    if (st == table.end()) {
      problems.push_back(section + ": unknown section");
      continue;
    }
    for (const auto& [key, node] : body) {
      const std::string field = section + "." + key;
      auto setter = st->second.find(key);
      if (setter == st->second.end()) {
        problems.push_back(field + ": unknown key");
        continue;
      }
      try {
        setter->second(trim(node.data()));
      } catch (const std::exception& e) {
        problems.push_back(field + ": invalid value '" + node.data() + "' (" + e.what() + ")");
      }
    }
  }

  if (m.dataset.source == "path") {
    if (m.dataset.path.empty()) {
      problems.push_back("dataset.path: required when dataset.source = path");
    } else if (!std::filesystem::exists(m.dataset.path / "labels.csv")) {
      problems.push_back("dataset.path: '" + m.dataset.path.string() + "' has no labels.csv");
    }
  } else {
    m.dataset.classes_override.reset();
  }
  try {
    m.train.validate();
  } catch (const Error& e) {
    problems.push_back(std::string("train: ") + e.what());
  }
  const bool robust = std::find(m.strategies.begin(), m.strategies.end(), Strategy::robust_rehearsal) != m.strategies.end();
  const bool rehearsal = robust || std::find(m.strategies.begin(), m.strategies.end(), Strategy::naive_rehearsal) != m.strategies.end();
  if (robust) {
    try {
      m.distill.validate(m.model.blocks);
    } catch (const Error& e) {
      problems.push_back(std::string("distill: ") + e.what() + " (required by robust-rehearsal)");
    }
  }
  if (rehearsal && m.memory_budget < 1) problems.push_back("memory.budget: rehearsal strategies need a positive budget");
  if (!problems.empty()) throw ManifestError(std::move(problems));

  if (!output_given) {
    const char* root = std::getenv("RRCL_OUTPUT_ROOT");
    m.output = std::filesystem::path(root && *root ? root : ".") / "rrcl-run";
  }
  return m;
}

ExperimentManifest parse_manifest(const std::filesystem::path& path,
                                  const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ManifestError({"manifest: cannot open '" + path.string() + "'"});
  return parse_manifest(in, overrides);
}

std::string resolved_manifest(const ExperimentManifest& m) {
  std::ostringstream o;
  const auto& b = m.dataset.blobs;
  o << "[dataset]\n";
  o << "source = " << m.dataset.source << '\n';
  if (m.dataset.source == "path") {
    o << "path = " << m.dataset.path.string() << '\n';
    if (m.dataset.classes_override) o << "classes = " << *m.dataset.classes_override << '\n';
  } else {
    std::string shape;
    for (std::size_t i = 0; i < b.shape.size(); ++i) shape += (i ? "x" : "") + std::to_string(b.shape[i]);
    o << "classes = " << b.classes << "\nper_class = " << b.per_class << "\nval_per_class = "
      << b.val_per_class << "\ntest_per_class = " << b.test_per_class << "\nshape = " << shape
      << "\nseparation = " << fmt(b.separation) << "\nnoise = " << fmt(b.noise)
      << "\nmodes = " << b.modes << "\nseed = " << b.seed << '\n';
  }
  o << "\n[protocol]\nkind = " << m.protocol.kind << "\ntasks = " << m.protocol.tasks << '\n';
  if (m.protocol.first_task_size) o << "first_task_size = " << *m.protocol.first_task_size << '\n';
  o << "increment = " << m.protocol.increment << "\norder_seed = " << m.protocol.order_seed << '\n';
  o << "\n[model]\nwidth = " << m.model.width << "\nblocks = " << m.model.blocks
    << "\nactivation = " << to_string(m.model.activation) << '\n';
  std::vector<std::string> milestones;
  for (double v : m.train.milestones) milestones.push_back(fmt(v));
  o << "\n[train]\nlr = " << fmt(m.train.lr) << "\nmomentum = " << fmt(m.train.momentum)
    << "\nlr_decay = " << fmt(m.train.lr_decay) << "\nmilestones = " << join(milestones, ", ")
    << "\nepochs_first = " << m.train.epochs_first << "\nepochs_rest = " << m.train.epochs_rest
    << "\nbatch_size = " << m.train.batch_size << "\nmemory_batch_size = " << m.train.memory_batch_size
    << "\naugment = " << (m.train.augment ? "true" : "false") << '\n';
  std::vector<std::string> betas;
  for (double v : m.distill.betas_for(m.model.blocks)) betas.push_back(fmt(v));
  o << "\n[distill]\nalpha = " << fmt(m.distill.alpha) << "\nbetas = " << join(betas, ", ")
    << "\ngamma = " << fmt(m.distill.gamma) << "\neta = " << fmt(m.distill.eta)
    << "\nmomentum = " << fmt(m.distill.momentum) << "\nsteps = " << m.distill.steps
    << "\nanneal = " << (m.distill.anneal ? "true" : "false") << '\n';
  o << "\n[memory]\nbudget = " << m.memory_budget << '\n';
  if (m.budget_mode) o << "mode = " << (*m.budget_mode == BudgetMode::total ? "total" : "per_class") << '\n';
  o << "k_clr = " << m.k_clr << '\n';
  std::vector<std::string> strategies, seeds;
  for (auto s : m.strategies) strategies.push_back(to_string(s));
  for (auto s : m.seeds) seeds.push_back(std::to_string(s));
  o << "\n[experiment]\nstrategies = " << join(strategies, ", ") << "\nseeds = " << join(seeds, ", ")
    << "\noutput = " << m.output.string() << "\nthreads = " << m.threads << '\n';
  return o.str();
}

DatasetBundle materialize_dataset(const DatasetSpec& spec) {
  if (spec.source == "path") return load_dataset(spec.path, spec.classes_override);
  return gen_blobs(spec.blobs);
}

TaskSequence build_protocol(const ExperimentManifest& m, int classes) {
  const auto& p = m.protocol;
  if (p.kind == "b50") return make_b50(classes, p.increment, p.order_seed, m.memory_budget);
  if (p.kind == "b0") return make_b0(classes, p.tasks, p.order_seed, m.memory_budget);
  return make_split(classes, p.tasks, p.first_task_size, p.order_seed, m.memory_budget);
}

ExperimentConfig experiment_config(const ExperimentManifest& m, Strategy s, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.layout = m.model;
  cfg.train = m.train;
  cfg.train.seed = seed;
  cfg.distill = m.distill;
  cfg.strategy = s;
  cfg.memory_budget = m.memory_budget;
  cfg.budget_mode = m.budget_mode;
  cfg.k_clr = m.k_clr;
  cfg.threads = m.threads;
  return cfg;
}

}  // namespace rrcl
