#include "test_util.hpp"

#include "cli.hpp"
#include "config.hpp"

#include "elmsim/decoder.hpp"
#include "elmsim/errors.hpp"
#include "elmsim/spikeio.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sstream>

using elmsim::cli::run_cli;
using testutil::read_file;
using testutil::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  }
  return lines;
}

const std::vector<std::string> kEasy = {"--set", "synth.peak_hz=200", "--set", "synth.baseline_hz=5",
                                        "--set", "synth.tuning_width=2", "--set", "synth.trials_per_class=12"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("config: defaults, overrides, unknown keys, seed derivation") {
  elmsim::cli::RunConfig cfg;
  CHECK(cfg.get("train.method") == "T1");
  CHECK(cfg.get("chip.seed") == "auto");
  for (const auto& k : elmsim::cli::config_keys()) CHECK(cfg.values().count(k.key) == 1);
  CHECK_THROWS_AS(cfg.set("no.such.key", "1"), elmsim::UsageError);
  cfg.set_assignment("chip.hidden = 20");
  CHECK(cfg.get_int("chip.hidden") == 20);
  cfg.resolve();
  CHECK(cfg.get("chip.seed") != "auto");
  elmsim::cli::RunConfig other;
  other.set("seed", "2");
  other.resolve();
  CHECK(other.get("chip.seed") != cfg.get("chip.seed"));
  CHECK(other.get("noise.seed") != other.get("chip.seed"));
  elmsim::cli::RunConfig pinned;
  pinned.set("chip.seed", "99");
  pinned.resolve();
  CHECK(pinned.get_u64("chip.seed") == 99);
  cfg.set("frontend.channels", "abc");
  CHECK_THROWS_AS(cfg.frontend(), elmsim::UsageError);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"budget", "--set", "nope=1"}).code == 1);
  CHECK(run({"budget", "--set", "budget.hidden=0"}).code == 1);
  CHECK(run({"budget", "--help"}).code == 0);
}

TEST_CASE("gen: writes a dataset, refuses to overwrite, reproducible") {
  TempDir d("cli-gen");
  const std::string a = (d / "a").string(), b = (d / "b").string();
  const Run r = run({"gen", "--out", a, "--seed", "4", "--set", "synth.trials_per_class=2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("# gen.seed = ") != std::string::npos);
  CHECK(std::filesystem::exists(d / "a/manifest.csv"));
  CHECK(std::filesystem::exists(d / "a/events/t0000.csv"));
  const Run again = run({"gen", "--out", a, "--seed", "4", "--set", "synth.trials_per_class=2"});
  CHECK(again.code == 1);
  CHECK(again.err.find("exists") != std::string::npos);
  REQUIRE(run({"gen", "--out", b, "--seed", "4", "--set", "synth.trials_per_class=2"}).code == 0);
  for (const auto& e : std::filesystem::recursive_directory_iterator(d / "a")) {
    if (e.is_regular_file()) {
      CHECK(read_file(e.path()) == read_file(d / "b" / std::filesystem::relative(e.path(), d / "a")));
    }
  }
  CHECK(run({"gen", "--out", a, "--seed", "5", "--force", "--set", "synth.trials_per_class=2"}).code == 0);
  CHECK(read_file(d / "a/events/t0000.csv") != read_file(d / "b/events/t0000.csv"));
}

TEST_CASE("chip: --dump writes the chip file and the mismatch map") {
  TempDir d("cli-chip");
  const Run r = run({"chip", "--seed", "7", "--dump", "--out", (d / "chip.txt").string()});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(d / "chip.txt"));
  const auto rows = data_lines(read_file(d / "chip.mismatch.csv"));
  CHECK(rows.front() == "neuron,row,value");
  CHECK(rows.size() == 1 + 60 * 30);
}

TEST_CASE("train / eval / stream / roc on the easy set") {
  TempDir d("cli-train");
  const std::string data = (d / "data").string();
  REQUIRE(run(with({"gen", "--out", data}, kEasy)).code == 0);

  SUBCASE("missing dataset is a data error naming the path") {
    const Run r = run({"train", "--data", (d / "nowhere").string(), "--out", (d / "m.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("nowhere") != std::string::npos);
  }

  SUBCASE("T1 reaches high training accuracy") {
    const std::string model = (d / "m.json").string();
    const Run r = run(with({"train", "--data", data, "--out", model}, kEasy));
    REQUIRE(r.code == 0);
    const auto rep = nlohmann::json::parse(read_file(d / "m.report.json"));
    CHECK(rep["method"] == "T1");
    CHECK(rep["training_accuracy"].get<double>() >= 0.95);
    CHECK(rep["config"]["synth.peak_hz"] == "200");

    const Run e = run(with({"eval", "--data", data, "--model", model}, kEasy));
    REQUIRE(e.code == 0);
    CHECK(e.out.find("# type_accuracy = ") != std::string::npos);

    const std::string stream_csv = (d / "s.csv").string();
    const Run s = run({"stream", "--data", data, "--model", model, "--trial", "t0005", "--out", stream_csv});
    REQUIRE(s.code == 0);
    const auto rows = data_lines(read_file(stream_csv));
    CHECK(rows.front() == "tick_ms,o_1,o_2,o_3,o_4,o_5,o_6,o_7,o_8,o_9,o_10,o_11,o_12,o_13,s,G,G_track,F");
    CHECK(rows.size() == 101);
    CHECK(run({"stream", "--data", data, "--model", model, "--trial", "nope"}).code == 1);

    const Run roc = run({"roc", "--data", data, "--model", model});
    REQUIRE(roc.code == 0);
    const auto pts = data_lines(roc.out);
    REQUIRE(pts.size() == 21);
    double prev = -1e300;
    for (std::size_t k = 1; k < pts.size(); ++k) {
      const double theta = std::stod(pts[k].substr(0, pts[k].find(',')));
      CHECK(theta > prev);
      prev = theta;
    }
  }

  SUBCASE("T2 respects the target sparsity") {
    const Run r = run(with({"train", "--data", data, "--out", (d / "m2.json").string(), "--set", "train.method=T2",
                            "--set", "train.target_sparsity=0.5"},
                           kEasy));
    REQUIRE(r.code == 0);
    const auto rep = nlohmann::json::parse(read_file(d / "m2.report.json"));
    CHECK(rep["support_size"].get<int>() <= 30);
    const auto model = elmsim::load_model(d / "m2.json");
    int kept = 0;
    for (bool s : model.weights.support) kept += s;
    CHECK(kept == rep["support_size"].get<int>());
  }

  SUBCASE("echoed config reproduces the run") {
    const Run first = run(with({"budget", "--seed", "3", "--set", "budget.hidden=77"}, {}));
    REQUIRE(first.code == 0);
    std::string cfg;
    std::istringstream in(first.out);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("# ", 0) == 0 && line.find(" = ") != std::string::npos) cfg += line.substr(2) + "\n";
    }
    testutil::write_file(d / "echo.cfg", cfg);
    const Run second = run({"budget", "--config", (d / "echo.cfg").string()});
    REQUIRE(second.code == 0);
    CHECK(data_lines(second.out) == data_lines(first.out));
    CHECK(second.out == first.out);
  }
}

TEST_CASE("sweep: one row per grid point") {
  TempDir d("cli-sweep");
  const std::string data = (d / "data").string();
  REQUIRE(run({"gen", "--out", data, "--set", "synth.trials_per_class=4"}).code == 0);
  const Run r = run({"sweep", "--data", data, "--set", "synth.trials_per_class=4", "--set", "sweep.hidden=10,20,40,60",
                     "--set", "sweep.seeds=2", "--set", "sweep.channels=10"});
  REQUIRE(r.code == 0);
  const auto rows = data_lines(r.out);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "method,hidden,channels,taps,seeds,mean_accuracy,std_accuracy,mean_support");
  CHECK(rows[1].rfind("T1,10,10,1,2,", 0) == 0);
  CHECK(rows[4].rfind("T1,60,10,1,2,", 0) == 0);
  CHECK(run({"sweep", "--data", data, "--set", "sweep.channels=41"}).code == 1);
}

TEST_CASE("budget prints the chip energy figure") {
  const Run r = run({"budget"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("3.4500 pJ/MAC") != std::string::npos);
  const Run j = run({"budget", "--set", "budget.format=json"});
  REQUIRE(j.code == 0);
}
