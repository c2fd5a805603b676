#include "cli.hpp"

#include "config.hpp"

#include "elmsim/analog.hpp"
#include "elmsim/budget.hpp"
#include "elmsim/decoder.hpp"
#include "elmsim/errors.hpp"
#include "elmsim/rng.hpp"
#include "elmsim/spikeio.hpp"
#include "elmsim/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

namespace elmsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string command;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
  std::vector<std::string> sets;
  std::string data;
  std::string chip;
  std::string model;
  std::string trial;
  bool dump = false;
};

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

RunConfig resolve_config(const Options& o) {
  RunConfig cfg;
  if (!o.config.empty()) cfg.load_file(o.config);
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  for (const std::string& s : o.sets) cfg.set_assignment(s);
  if (!o.trial.empty()) cfg.set("stream.trial", o.trial);
  cfg.resolve();
  return cfg;
}

void header(std::ostream& os, const Options& o, const RunConfig& cfg) {
  os << "# elmsim " << o.command << '\n';
  if (!o.data.empty()) os << "# --data " << o.data << '\n';
  if (!o.chip.empty()) os << "# --chip " << o.chip << '\n';
  if (!o.model.empty()) os << "# --model " << o.model << '\n';
  cfg.echo(os, "# ");
}

json config_json(const RunConfig& cfg) { return json(cfg.values()); }

std::ofstream open_file(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(DataErrorKind::kIo, path.string(), 0, "cannot write");
  return f;
}

/// Primary output: the named file, or stdout after the header.
void emit(const Options& o, std::ostream& out, const std::function<void(std::ostream&)>& body) {
  if (o.out.empty()) {
    body(out);
    return;
  }
  std::ofstream f = open_file(o.out);
  body(f);
  out << "# wrote " << o.out << '\n';
}

SpikeDataset load_data(const Options& o) {
  if (o.data.empty()) throw UsageError(o.command + ": --data <dir> is required");
  return parse_dataset(o.data);
}

SpikeDataset pick_split(const SpikeDataset& ds, const RunConfig& cfg, const std::string& which) {
  if (which == "all") return ds;
  DatasetSplit s = split_dataset(ds, cfg.get_double("split.test_fraction"), cfg.get_u64("split.seed"));
  if (which == "train") return s.train;
  if (which == "test") return s.test;
  throw UsageError("config: eval.split must be test, train or all");
}

ChipInstance obtain_chip(const Options& o, std::uint64_t seed, const AnalogParams& ap, int inputs, int hidden) {
  if (o.chip.empty()) return build_chip(seed, ap, inputs, hidden);
  ChipInstance c = load_chip(o.chip);
  if (c.inputs() != inputs || c.hidden() != hidden) {
    throw UsageError("chip file " + o.chip + " is " + std::to_string(c.hidden()) + "x" + std::to_string(c.inputs()) +
                     ", need " + std::to_string(hidden) + "x" + std::to_string(inputs));
  }
  return c;
}

void check_channels(const SpikeDataset& ds, const FrontendConfig& fe) {
  for (const RowConfig& r : fe.rows) {
    if (!r.delayed && r.channel >= ds.channel_count) {
      throw UsageError("frontend reads channel " + std::to_string(r.channel) + " but the dataset has " +
                       std::to_string(ds.channel_count));
    }
  }
}

struct Trained {
  DecoderModel model;
  std::size_t samples = 0;
};

Trained train_model(const SpikeDataset& train, const ChipInstance& chip, const RunConfig& cfg,
                    const FrontendConfig& fe) {
  CollectOptions co;
  co.features = cfg.features();
  co.policy = cfg.policy();
  co.trapezoid = cfg.trapezoid();
  auto [hm, targets] = collect_H(train, chip, fe, co);
  const std::string method = cfg.get("train.method");
  Trained t;
  t.samples = hm.meta.size();
  if (method == "T1") {
    t.model.weights = train_T1(hm.H, targets.combined(), cfg.get_double("train.ridge"), targets.column_weights());
  } else if (method == "T2") {
    t.model.weights = train_T2(hm.H, targets.combined(), cfg.t2(), targets.column_weights());
  } else {
    throw UsageError("config: train.method must be T1 or T2");
  }
  t.model.decoder = cfg.decoder();
  t.model.frontend = fe;
  t.model.trapezoid = co.trapezoid;
  t.model.normalize = co.features.normalize;
  t.model.fmax_sel = chip.params().fmax_sel;
  t.model.chip_seed = chip.seed();
  t.model.channel_count = train.channel_count;
  return t;
}

// ---- commands ----

int cmd_gen(const Options& o, const RunConfig& cfg, std::ostream& out) {
  if (o.out.empty()) throw UsageError("gen: --out <dir> is required");
  const fs::path dir(o.out);
  if (fs::exists(dir) && !o.force) throw UsageError("gen: " + dir.string() + " exists (use --force to overwrite)");
  const SpikeDataset ds = gen_synthetic(cfg.synth());
  if (fs::exists(dir)) fs::remove_all(dir);
  write_dataset(ds, dir);
  header(out, o, cfg);
  std::size_t spikes = 0;
  for (const Trial& t : ds.trials) spikes += t.events.size();
  out << "# trials = " << ds.trials.size() << "\n# spikes = " << spikes << "\n# wrote " << dir.string() << '\n';
  return kOk;
}

int cmd_chip(const Options& o, const RunConfig& cfg, std::ostream& out) {
  if (o.out.empty()) throw UsageError("chip: --out <file> is required");
  const FrontendConfig fe = cfg.frontend();
  const ChipInstance chip = build_chip(cfg.get_u64("chip.seed"), cfg.analog(), fe.dimension(), cfg.get_int("chip.hidden"));
  header(out, o, cfg);
  const fs::path path(o.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_chip(chip, path);
  out << "# wrote " << path.string() << '\n';
  if (o.dump) {
    fs::path map_path = path;
    map_path.replace_extension(".mismatch.csv");
    std::ofstream f = open_file(map_path);
    header(f, o, cfg);
    write_matrix_csv(f, mismatch_map(chip, cfg.get_int("chip.probe_code")));
    out << "# wrote " << map_path.string() << '\n';
  }
  return kOk;
}

int cmd_train(const Options& o, const RunConfig& cfg, std::ostream& out) {
  if (o.out.empty()) throw UsageError("train: --out <model.json> is required");
  const SpikeDataset ds = load_data(o);
  const FrontendConfig fe = cfg.frontend();
  check_channels(ds, fe);
  const SpikeDataset train = pick_split(ds, cfg, "train");
  const ChipInstance chip =
      obtain_chip(o, cfg.get_u64("chip.seed"), cfg.analog(), fe.dimension(), cfg.get_int("chip.hidden"));
  Trained t = train_model(train, chip, cfg, fe);
  t.model.hyperparameters = cfg.values();

  const EvalReport fit = evaluate(train, t.model, deployed_chip(chip, t.model, cfg.get_bool("eval.prune")),
                                  cfg.features());

  const fs::path model_path(o.out);
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  save_model(t.model, model_path);

  const TrainingReport& r = t.model.weights.report;
  json rep;
  rep["method"] = r.method;
  rep["hidden"] = t.model.hidden();
  rep["support_size"] = r.support_size;
  rep["sparsity"] = r.sparsity;
  rep["iterations"] = r.iterations;
  rep["degenerate"] = r.degenerate;
  rep["residuals"] = std::vector<double>(r.residuals.data(), r.residuals.data() + r.residuals.size());
  rep["lambdas"] = std::vector<double>(r.lambdas.data(), r.lambdas.data() + r.lambdas.size());
  rep["training_trials"] = train.trials.size();
  rep["training_samples"] = t.samples;
  rep["training_accuracy"] = fit.type_accuracy;
  rep["training_onset_tpr"] = fit.onset_tpr;
  rep["training_fp_per_trial"] = fit.fp_per_trial;
  rep["config"] = config_json(cfg);
  fs::path rep_path = model_path;
  rep_path.replace_extension(".report.json");
  std::ofstream f = open_file(rep_path);
  f << rep.dump(2) << '\n';

  header(out, o, cfg);
  out << "# method = " << r.method << "\n# support_size = " << r.support_size << " of " << t.model.hidden()
      << "\n# training_accuracy = " << fmt(fit.type_accuracy) << "\n# wrote " << model_path.string() << "\n# wrote "
      << rep_path.string() << '\n';
  return kOk;
}

struct Deployment {
  DecoderModel model;
  ChipInstance chip;
};

Deployment deploy(const Options& o, const RunConfig& cfg) {
  if (o.model.empty()) throw UsageError(o.command + ": --model <model.json> is required");
  DecoderModel model = load_model(o.model);
  model.decoder = cfg.decoder();
  ChipInstance chip =
      obtain_chip(o, model.chip_seed, cfg.analog(), model.frontend.dimension(), model.hidden());
  chip = deployed_chip(chip, model, cfg.get_bool("eval.prune"));
  return {std::move(model), std::move(chip)};
}

int cmd_eval(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const SpikeDataset ds = load_data(o);
  const Deployment d = deploy(o, cfg);
  check_channels(ds, d.model.frontend);
  const SpikeDataset set = pick_split(ds, cfg, cfg.get("eval.split"));
  const EvalReport rep = evaluate(set, d.model, d.chip, cfg.features());
  header(out, o, cfg);
  out << "# type_accuracy = " << fmt(rep.type_accuracy) << "\n# onset_tpr = " << fmt(rep.onset_tpr)
      << "\n# fp_per_trial = " << fmt(rep.fp_per_trial) << '\n';
  std::ostringstream js;
  write_eval_json(js, rep);
  json j = json::parse(js.str());
  j["config"] = config_json(cfg);
  j["model"] = o.model;
  emit(o, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  return kOk;
}

int cmd_stream(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const SpikeDataset ds = load_data(o);
  const Deployment d = deploy(o, cfg);
  check_channels(ds, d.model.frontend);
  const std::string& id = cfg.get("stream.trial");
  const Trial* trial = nullptr;
  SpikeDataset set;
  if (id.empty()) {
    set = pick_split(ds, cfg, cfg.get("eval.split"));
    if (set.trials.empty()) throw UsageError("stream: selected split is empty");
    trial = &set.trials.front();
  } else {
    for (const Trial& t : ds.trials) {
      if (t.id == id) trial = &t;
    }
    if (!trial) throw UsageError("stream: no trial '" + id + "' in " + o.data);
  }
  const auto stream = decode_stream(*trial, ds.channel_count, d.chip, d.model, cfg.features());
  header(out, o, cfg);
  out << "# trial = " << trial->id << " label = " << trial->label << '\n';
  emit(o, out, [&](std::ostream& os) {
    if (!o.out.empty()) header(os, o, cfg);
    write_stream_csv(os, stream, d.model.classes());
  });
  return kOk;
}

int cmd_roc(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const SpikeDataset ds = load_data(o);
  const Deployment d = deploy(o, cfg);
  check_channels(ds, d.model.frontend);
  const SpikeDataset set = pick_split(ds, cfg, cfg.get("eval.split"));
  const int n = cfg.get_int("roc.points");
  if (n < 1) throw UsageError("config: roc.points must be >= 1");
  const double lo = cfg.get_double("roc.theta_min"), hi = cfg.get_double("roc.theta_max");
  if (!(hi >= lo)) throw UsageError("config: roc.theta_max must be >= roc.theta_min");
  std::vector<double> thetas;
  for (int k = 0; k < n; ++k) thetas.push_back(n == 1 ? lo : lo + (hi - lo) * k / (n - 1));
  const auto points = roc_sweep(set, d.model, d.chip, cfg.features(), thetas);
  header(out, o, cfg);
  emit(o, out, [&](std::ostream& os) {
    if (!o.out.empty()) header(os, o, cfg);
    write_roc_csv(os, points);
  });
  return kOk;
}

struct SweepPoint {
  std::string method;
  int hidden, channels, taps;
};

int cmd_sweep(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const SpikeDataset ds = load_data(o);
  const DatasetSplit split = split_dataset(ds, cfg.get_double("split.test_fraction"), cfg.get_u64("split.seed"));
  const AnalogParams ap = cfg.analog();
  const int seeds = cfg.get_int("sweep.seeds");
  if (seeds < 1) throw UsageError("config: sweep.seeds must be >= 1");

  std::vector<SweepPoint> grid;
  for (const std::string& m : cfg.get_list("sweep.methods")) {
    if (m != "T1" && m != "T2") throw UsageError("config: sweep.methods entries must be T1 or T2");
    for (int n : cfg.get_int_list("sweep.channels")) {
      for (int p : cfg.get_int_list("sweep.taps")) {
        for (int L : cfg.get_int_list("sweep.hidden")) grid.push_back({m, L, n, p});
      }
    }
  }
  // Validate every point up front so a bad grid fails before any work.
  for (const SweepPoint& g : grid) {
    if (g.taps < 1) throw UsageError("config: sweep.taps entries must be >= 1");
    FrontendConfig fe = FrontendConfig::tdbdi(g.channels, g.taps, cfg.get_int("frontend.sdl"));
    fe.validate();
    check_channels(ds, fe);
    if (g.hidden < 1 || g.hidden > kMaxRows) throw UsageError("config: sweep.hidden entries must be in 1..128");
  }

  const std::size_t jobs = grid.size() * static_cast<std::size_t>(seeds);
  std::vector<double> acc(jobs, 0.0);
  std::vector<int> support(jobs, 0);
  std::vector<std::string> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
      const SweepPoint& g = grid[j / static_cast<std::size_t>(seeds)];
      const std::uint64_t s = j % static_cast<std::size_t>(seeds);
      try {
        RunConfig local = cfg;
        local.set("train.method", g.method);
        FrontendConfig fe = FrontendConfig::tdbdi(g.channels, g.taps, cfg.get_int("frontend.sdl"));
        fe.tick_us = cfg.get_int("frontend.tick_us");
        const ChipInstance chip = build_chip(derive_seed(cfg.get_u64("chip.seed"), {s}), ap, fe.dimension(), g.hidden);
        const Trained t = train_model(split.train, chip, local, fe);
        const EvalReport rep = evaluate(split.test, t.model, deployed_chip(chip, t.model, cfg.get_bool("eval.prune")),
                                        cfg.features());
        acc[j] = rep.type_accuracy;
        support[j] = t.model.weights.report.support_size;
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };
  int threads = cfg.get_int("sweep.threads");
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), jobs));
  std::vector<std::thread> pool;
  for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::string& e : errors) {
    if (!e.empty()) throw NumericalError("sweep: " + e);
  }

  header(out, o, cfg);
  emit(o, out, [&](std::ostream& os) {
    if (!o.out.empty()) header(os, o, cfg);
    os << "method,hidden,channels,taps,seeds,mean_accuracy,std_accuracy,mean_support\n";
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double mean = 0.0, sup = 0.0;
      for (int s = 0; s < seeds; ++s) {
        mean += acc[g * seeds + s];
        sup += support[g * seeds + s];
      }
      mean /= seeds;
      sup /= seeds;
      double var = 0.0;
      for (int s = 0; s < seeds; ++s) var += (acc[g * seeds + s] - mean) * (acc[g * seeds + s] - mean);
      const double sd = seeds > 1 ? std::sqrt(var / (seeds - 1)) : 0.0;
      os << grid[g].method << ',' << grid[g].hidden << ',' << grid[g].channels << ',' << grid[g].taps << ',' << seeds
         << ',' << fmt(mean) << ',' << fmt(sd) << ',' << fmt(sup) << '\n';
    }
  });
  return kOk;
}

int cmd_budget(const Options& o, const RunConfig& cfg, std::ostream& out) {
  const BudgetReport rep = budget_report(cfg.budget());
  const std::string& format = cfg.get("budget.format");
  if (format != "table" && format != "json") throw UsageError("config: budget.format must be table or json");
  header(out, o, cfg);
  emit(o, out, [&](std::ostream& os) {
    if (format == "table") {
      write_budget_table(os, rep);
    } else {
      write_budget_json(os, rep);
    }
  });
  return kOk;
}

int cmd_config(const Options& o, const RunConfig& cfg, std::ostream& out) {
  out << "# elmsim " << o.command << '\n';
  for (const KeySpec& k : config_keys()) {
    if (*k.doc) out << "# " << k.doc << '\n';
    out << k.key << " = " << cfg.get(k.key) << '\n';
  }
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Behavioral simulator of an ELM spike-decoding chip", "elmsim"};
  app.require_subcommand(1);
  Options o;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&, const RunConfig&, std::ostream&);
  };
  const Command commands[] = {
      {"gen", "generate a synthetic spike dataset", cmd_gen},
      {"chip", "draw a chip instance and save it", cmd_chip},
      {"train", "train output weights (T1 or T2)", cmd_train},
      {"eval", "evaluate a model on a dataset split", cmd_eval},
      {"stream", "per-tick decode trace of one trial", cmd_stream},
      {"roc", "onset ROC over a threshold grid", cmd_roc},
      {"sweep", "accuracy over L / n / p / method grids and chip seeds", cmd_sweep},
      {"budget", "energy and data-rate arithmetic", cmd_budget},
      {"config", "print every configuration key with its resolved value", cmd_config},
  };

  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", o.config, "flat key = value file");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--set", o.sets, "override one key (key=value); repeatable");
    sub->add_option("--out", o.out, "output path");
    sub->add_flag("--force", o.force, "overwrite an existing output directory");
    if (std::string(c.name) != "budget" && std::string(c.name) != "config" && std::string(c.name) != "gen" &&
        std::string(c.name) != "chip") {
      sub->add_option("--data", o.data, "dataset directory");
    }
    if (std::string(c.name) == "train" || std::string(c.name) == "eval" || std::string(c.name) == "stream" ||
        std::string(c.name) == "roc") {
      sub->add_option("--chip", o.chip, "chip file (default: draw from the seed)");
    }
    if (std::string(c.name) == "eval" || std::string(c.name) == "stream" || std::string(c.name) == "roc") {
      sub->add_option("--model", o.model, "model file from train");
    }
    if (std::string(c.name) == "stream") sub->add_option("--trial", o.trial, "trial id");
    if (std::string(c.name) == "chip") sub->add_flag("--dump", o.dump, "also write the mismatch map CSV");
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  const Command* chosen = nullptr;
  for (const Command& c : commands) {
    if (app.got_subcommand(c.name)) chosen = &c;
  }
  o.command = chosen->name;

  try {
    const RunConfig cfg = resolve_config(o);
    return chosen->run(o, cfg, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    err << "error: numerical: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace elmsim::cli
