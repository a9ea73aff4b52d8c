#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "copho/cli.hpp"
#include "copho/datasets.hpp"
#include "copho/errors.hpp"
#include "copho/graph.hpp"
#include "copho/neural.hpp"
#include "copho/properties.hpp"
#include "copho/serialize.hpp"

using namespace copho;
using nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream err;
  const int code = cli::run(args, err);
  return {code, err.str()};
}

const std::filesystem::path& root_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() / "copho_cli_test";
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::string sub_dir(const std::string& name) {
  const auto d = root_dir() / name;
  std::filesystem::create_directories(d);
  return d.string();
}

std::string tiny_train_config() {
  static const std::string path = [] {
    const std::string p = (root_dir() / "train.json").string();
    write_text_file(p, R"({
      "dataset": {"kind": "community-small", "count": 10, "n_min": 8, "n_max": 8},
      "train": {"T": 6, "epochs": 3, "layers": 1, "hidden": 4, "time_dim": 4}
    })");
    return p;
  }();
  return path;
}

/// Shared tiny backbone + clustering classifier, trained once.
struct Pipeline {
  std::string model, schedule, clustering_clf;
};

const Pipeline& pipeline() {
  static const Pipeline p = [] {
    Pipeline out;
    const std::string bdir = sub_dir("backbone");
    auto r = run_cli({"train-diffusion", "--config", tiny_train_config(), "--seed", "3", "--out", bdir});
    REQUIRE(r.code == 0);
    out.model = bdir + "/model.bin";
    out.schedule = bdir + "/schedule.bin";
    const std::string cdir = sub_dir("clf_clustering");
    r = run_cli({"train-classifier", "--config", tiny_train_config(), "--property", "clustering",
                 "--seed", "4", "--out", cdir});
    REQUIRE(r.code == 0);
    out.clustering_clf = cdir + "/classifier.bin";
    return out;
  }();
  return p;
}

json load_json(const std::string& path) { return json::parse(read_text_file(path)); }

}  // namespace

TEST_CASE("cli: help exits 0 and unknown input exits 2") {
  auto help = run_cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.err.find("Usage") != std::string::npos);

  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"generate", "--no-such-flag"}).code == 2);
  CHECK(run_cli({}).code == 2);  // missing command
  // positional files only belong to evaluate
  CHECK(run_cli({"generate", "a.txt"}).code == 2);
}

TEST_CASE("cli: train-diffusion writes artifacts with a reproducible loss curve") {
  const Pipeline& p = pipeline();
  CHECK(std::filesystem::exists(p.model));
  CHECK(std::filesystem::exists(p.schedule));
  const std::string bdir = root_dir() / "backbone";
  CHECK(std::filesystem::exists(bdir + "/manifest.json"));

  const std::string log = read_text_file(bdir + "/train_log.csv");
  std::istringstream is(log);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "epoch,loss");
  int prev = 0, rows = 0;
  while (std::getline(is, line)) {
    const int epoch = std::stoi(line.substr(0, line.find(',')));
    CHECK(epoch == prev + 1);  // monotone 1..E
    prev = epoch;
    ++rows;
  }
  CHECK(rows == 3);

  // identical invocation reproduces the model and the loss curve bit for bit
  const std::string bdir2 = sub_dir("backbone_again");
  REQUIRE(run_cli({"train-diffusion", "--config", tiny_train_config(), "--seed", "3", "--out", bdir2})
              .code == 0);
  CHECK(read_text_file(bdir2 + "/train_log.csv") == log);
  CHECK(read_text_file(bdir2 + "/model.bin") == read_text_file(p.model));
}

TEST_CASE("cli: missing dataset file exits 2 and names the path") {
  const std::string missing = (root_dir() / "no_such_dataset.txt").string();
  auto r = run_cli({"train-diffusion", "--dataset", missing, "--out", sub_dir("junk")});
  CHECK(r.code == 2);
  CHECK(r.err.find(missing) != std::string::npos);
}

TEST_CASE("cli: density classifier reaches held-out MAE below 0.1") {
  const std::string cfg_path = (root_dir() / "clf_train.json").string();
  write_text_file(cfg_path, R"({
    "dataset": {"kind": "community-small", "count": 40, "n_min": 8, "n_max": 12},
    "train": {"epochs": 40, "lr": 0.05, "layers": 2, "hidden": 8}
  })");
  const std::string cdir = sub_dir("clf_density");
  REQUIRE(run_cli({"train-classifier", "--config", cfg_path, "--property", "density", "--seed",
                   "12", "--out", cdir})
              .code == 0);
  const MpnnModel m = load_model(cdir + "/classifier.bin");
  CHECK(m.config.head == MpnnConfig::Head::Regression);

  DatasetSpec held;
  held.kind = DatasetKind::CommunitySmall;
  held.count = 30;
  held.n_min = 8;
  held.n_max = 12;
  held.seed = 99;
  double mae = 0.0;
  const std::vector<Graph> probe = generate_dataset(held);
  for (const Graph& g : probe) {
    const double pred = forward(m, RelaxedGraph::from(g)).value;
    mae += std::abs(pred - eval_property(g, PropertyKind::Density));
  }
  mae /= probe.size();
  CHECK(mae < 0.1);
}

TEST_CASE("cli: train-classifier rejects unknown properties and reproduces itself") {
  auto r = run_cli({"train-classifier", "--config", tiny_train_config(), "--property", "woozle",
                    "--out", sub_dir("junk2")});
  CHECK(r.code == 2);
  CHECK(r.err.find("woozle") != std::string::npos);

  const std::string d1 = sub_dir("clf_a"), d2 = sub_dir("clf_b");
  REQUIRE(run_cli({"train-classifier", "--config", tiny_train_config(), "--property", "density",
                   "--seed", "8", "--out", d1})
              .code == 0);
  REQUIRE(run_cli({"train-classifier", "--config", tiny_train_config(), "--property", "density",
                   "--seed", "8", "--out", d2})
              .code == 0);
  CHECK(read_text_file(d1 + "/classifier.bin") == read_text_file(d2 + "/classifier.bin"));
}

TEST_CASE("cli: unconditional generate is deterministic and replayable from its manifest") {
  const Pipeline& p = pipeline();
  const std::string gdir = sub_dir("gen_uncond");
  REQUIRE(run_cli({"generate", "--model", p.model, "--schedule", p.schedule, "--samples", "3",
                   "--nodes", "8", "--seed", "17", "--out", gdir})
              .code == 0);
  const std::vector<Graph> samples = load_edge_list(gdir + "/samples.txt");
  REQUIRE(samples.size() == 3);
  for (const Graph& g : samples) CHECK(g.n() == 8);

  const json manifest = load_json(gdir + "/manifest.json");
  CHECK(manifest.at("trace").empty());  // gate never opens without targets

  // re-running the same flags reproduces the file
  const std::string gdir2 = sub_dir("gen_uncond2");
  REQUIRE(run_cli({"generate", "--model", p.model, "--schedule", p.schedule, "--samples", "3",
                   "--nodes", "8", "--seed", "17", "--out", gdir2})
              .code == 0);
  CHECK(read_text_file(gdir2 + "/samples.txt") == read_text_file(gdir + "/samples.txt"));

  // the manifest's config snapshot replays the run exactly
  const std::string snap = (root_dir() / "replay.json").string();
  json cfg_snapshot = manifest.at("config");
  cfg_snapshot["out"] = sub_dir("gen_replay");
  write_text_file(snap, cfg_snapshot.dump());
  REQUIRE(run_cli({"generate", "--config", snap}).code == 0);
  CHECK(read_text_file(sub_dir("gen_replay") + "/samples.txt") ==
        read_text_file(gdir + "/samples.txt"));
}

TEST_CASE("cli: conditioned generate records per-step selections in the manifest") {
  const Pipeline& p = pipeline();
  const std::string cfg_path = (root_dir() / "gen_cond.json").string();
  write_text_file(cfg_path, json{
      {"model", p.model},
      {"schedule", p.schedule},
      {"classifiers", {{"clustering", p.clustering_clf}}},
      {"targets", json::array({{{"property", "clustering"}, {"value", 0.4}, {"epsilon", 0.2}}})},
      {"guidance", {{"t_homo", 3}, {"ph_timing", 0.0}}},
      {"samples", 2},
      {"nodes", 8}}.dump());
  const std::string gdir = sub_dir("gen_cond");
  REQUIRE(run_cli({"generate", "--config", cfg_path, "--seed", "21", "--out", gdir}).code == 0);
  CHECK(load_edge_list(gdir + "/samples.txt").size() == 2);

  const json manifest = load_json(gdir + "/manifest.json");
  const json& trace = manifest.at("trace");
  REQUIRE(trace.size() == 2);
  for (const json& steps : trace) {
    REQUIRE(steps.size() == 6);  // one record per reverse step (T = 6)
    for (const json& s : steps) {
      CHECK(s.at("active").get<bool>());  // ph_timing 0 with apply_every 1
      const int sel = s.at("selected").get<int>();
      CHECK(sel >= 0);
      CHECK(sel <= 3);  // ladder depth
      CHECK(s.contains("weight"));
      CHECK(s.contains("declined"));
    }
  }
}

TEST_CASE("cli: shortest-path targets thread through generation") {
  const Pipeline& p = pipeline();
  const std::string cdir = sub_dir("clf_path");
  const std::string cfg_path = (root_dir() / "path_train.json").string();
  write_text_file(cfg_path, R"({
    "dataset": {"kind": "community-small", "count": 12, "n_min": 8, "n_max": 8},
    "train": {"epochs": 5, "layers": 1, "hidden": 4}
  })");
  REQUIRE(run_cli({"train-classifier", "--config", cfg_path, "--property", "shortest_path",
                   "--seed", "6", "--out", cdir})
              .code == 0);
  const MpnnModel clf = load_model(cdir + "/classifier.bin");
  CHECK(clf.config.marker_channels);

  const std::string gcfg = (root_dir() / "gen_path.json").string();
  write_text_file(gcfg, json{
      {"model", p.model},
      {"schedule", p.schedule},
      {"classifiers", {{"shortest_path", cdir + "/classifier.bin"}}},
      {"targets", json::array({{{"property", "shortest_path"},
                                {"pairs", json::array({json::array({0, 5})})},
                                {"length", 3},
                                {"epsilon", 0.5}}})},
      {"guidance", {{"t_homo", 2}, {"ph_timing", 0.0}}},
      {"samples", 2},
      {"nodes", 8}}.dump());
  const std::string gdir = sub_dir("gen_path");
  REQUIRE(run_cli({"generate", "--config", gcfg, "--seed", "30", "--out", gdir}).code == 0);
  CHECK(load_edge_list(gdir + "/samples.txt").size() == 2);

  // a pair outside the generated node range is a config error
  json bad = load_json(gcfg);
  bad["targets"][0]["pairs"] = json::array({json::array({0, 40})});
  const std::string bad_path = (root_dir() / "gen_path_bad.json").string();
  write_text_file(bad_path, bad.dump());
  CHECK(run_cli({"generate", "--config", bad_path, "--out", sub_dir("junk3")}).code == 2);
}

TEST_CASE("cli: generate without artifacts exits 2") {
  CHECK(run_cli({"generate", "--model", (root_dir() / "nope.bin").string(), "--schedule",
                 (root_dir() / "nope2.bin").string(), "--out", sub_dir("junk4")})
            .code == 2);
}

TEST_CASE("cli: evaluate emits the exact schema and matches the metrics API") {
  const Pipeline& p = pipeline();
  const std::string gdir = sub_dir("gen_eval");
  REQUIRE(run_cli({"generate", "--model", p.model, "--schedule", p.schedule, "--samples", "4",
                   "--nodes", "8", "--seed", "40", "--out", gdir})
              .code == 0);
  const std::string samples_file = gdir + "/samples.txt";

  const std::string edir = sub_dir("eval_self");
  REQUIRE(run_cli({"evaluate", samples_file, samples_file, "--run", "selfcheck", "--targets",
                   R"([{"property":"density","value":0.3,"epsilon":0.1}])", "--out", edir})
              .code == 0);

  const std::string text = read_text_file(edir + "/metrics.csv");
  CHECK(text.rfind("run,metric,statistic,value\n", 0) == 0);

  const auto rows = cli::read_metrics_csv(edir + "/metrics.csv");
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) CHECK(r.run == "selfcheck");
  // identical multisets: every MMD statistic is exactly zero
  for (int i = 0; i < 3; ++i) {
    CHECK(rows[i].metric == "mmd");
    CHECK(rows[i].value == 0.0);
  }
  // the MAE row equals an independent recomputation
  PropertyTarget t;
  t.kind = PropertyKind::Density;
  t.value = 0.3;
  t.epsilon = 0.1;
  const double want = condition_mae(load_edge_list(samples_file), t);
  CHECK(rows[3].metric == "mae");
  CHECK(rows[3].statistic == "density");
  CHECK(rows[3].value == doctest::Approx(want).epsilon(1e-15));

  // reader rejects a wrong header and a missing file
  const std::string bad_csv = (root_dir() / "bad.csv").string();
  write_text_file(bad_csv, "foo,bar\n1,2\n");
  CHECK_THROWS_AS(cli::read_metrics_csv(bad_csv), FormatError);
  CHECK_THROWS_AS(cli::read_metrics_csv((root_dir() / "missing.csv").string()), FormatError);
}

TEST_CASE("cli: ablate sweeps the grid with one row per cell, deterministically") {
  const Pipeline& p = pipeline();
  const std::string cfg_path = (root_dir() / "ablate.json").string();
  write_text_file(cfg_path, json{
      {"model", p.model},
      {"schedule", p.schedule},
      {"classifiers", {{"clustering", p.clustering_clf}}},
      {"targets", json::array({{{"property", "clustering"}, {"value", 0.4}, {"epsilon", 0.2}}})},
      {"ablate", {{"t_homo", {1, 2}}, {"ph_timing", {0.0, 0.5}}, {"proposal", {"rand", "grad"}},
                  {"samples", 2}}},
      {"nodes", 8}}.dump());
  const std::string adir = sub_dir("ablate_run");
  REQUIRE(run_cli({"ablate", "--config", cfg_path, "--seed", "51", "--out", adir}).code == 0);

  const auto rows = cli::read_metrics_csv(adir + "/ablation.csv");
  REQUIRE(rows.size() == 8);  // 2 x 2 x 2 cells, one row each
  for (const auto& r : rows) {
    CHECK(r.metric == "mae");
    CHECK(r.statistic == "clustering");
    CHECK(r.run.rfind("t", 0) == 0);
  }
  CHECK(rows[0].run == "t1_p0_rand");
  CHECK(rows[7].run == "t2_p0.5_grad");

  const std::string adir2 = sub_dir("ablate_run2");
  REQUIRE(run_cli({"ablate", "--config", cfg_path, "--seed", "51", "--out", adir2}).code == 0);
  CHECK(read_text_file(adir2 + "/ablation.csv") == read_text_file(adir + "/ablation.csv"));
}

TEST_CASE("cli: diagnose histograms partition every edge slot") {
  // a zero-weight predictor concentrates all mass in a single bin at zero
  MpnnConfig zcfg;
  zcfg.layers = 1;
  zcfg.hidden = 4;
  zcfg.node_classes = 1;
  zcfg.edge_classes = 2;
  const std::string zero_path = (root_dir() / "zero_clf.bin").string();
  save_model(zero_path, make_zero_model(zcfg));

  const std::string ddir = sub_dir("diag_zero");
  REQUIRE(run_cli({"diagnose", "--model", zero_path, "--config", tiny_train_config(), "--seed",
                   "61", "--out", ddir})
              .code == 0);
  auto rows = cli::read_metrics_csv(ddir + "/gradient_histogram.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].metric == "grad-hist");
  CHECK(rows[0].statistic.find("t=0") != std::string::npos);
  // 10 graphs of 8 nodes: 10 * 28 edge slots
  CHECK(rows[0].value == 280.0);

  // a trained predictor over a noise schedule: one histogram per probed step,
  // each partitioning all 280 slots
  const Pipeline& p = pipeline();
  const std::string ddir2 = sub_dir("diag_steps");
  REQUIRE(run_cli({"diagnose", "--model", p.clustering_clf, "--schedule", p.schedule, "--config",
                   tiny_train_config(), "--bins", "10", "--seed", "61", "--out", ddir2})
              .code == 0);
  rows = cli::read_metrics_csv(ddir2 + "/gradient_histogram.csv");
  std::map<std::string, double> per_step;
  for (const auto& r : rows) {
    const std::string step = r.statistic.substr(0, r.statistic.find(';'));
    per_step[step] += r.value;
  }
  REQUIRE(per_step.size() == 4);  // T=6 probes t in {6, 4, 3, 1}
  for (const auto& [step, total] : per_step) CHECK(total == 280.0);
}

TEST_CASE("cli: divergent training exits 3") {
  // the unbounded regression head overflows under an absurd learning rate
  const std::string cfg_path = (root_dir() / "diverge.json").string();
  write_text_file(cfg_path, R"({
    "dataset": {"kind": "community-small", "count": 6, "n_min": 8, "n_max": 8},
    "train": {"epochs": 5, "lr": 1e200, "layers": 1, "hidden": 4}
  })");
  auto r = run_cli(
      {"train-classifier", "--config", cfg_path, "--property", "density", "--out", sub_dir("junk5")});
  CHECK(r.code == 3);
}

TEST_CASE("cli: flags override config values and unknown keys are rejected") {
  const Pipeline& p = pipeline();
  const std::string cfg_path = (root_dir() / "override.json").string();
  write_text_file(cfg_path, json{
      {"model", p.model},
      {"schedule", p.schedule},
      {"guidance", {{"t_homo", 2}, {"ph_timing", 0.5}, {"proposal", "rand"}}},
      {"samples", 1},
      {"nodes", 8}}.dump());
  const std::string gdir = sub_dir("gen_override");
  REQUIRE(run_cli({"generate", "--config", cfg_path, "--seed", "70", "--out", gdir, "--t-homo",
                   "4", "--ph-timing", "0.25", "--proposal", "gradient", "--selection",
                   "sample-proportional"})
              .code == 0);
  const json cfg = load_json(gdir + "/manifest.json").at("config");
  CHECK(cfg.at("guidance").at("t_homo") == 4);
  CHECK(cfg.at("guidance").at("ph_timing") == 0.25);
  CHECK(cfg.at("guidance").at("proposal") == "grad");  // canonical name for "gradient"
  CHECK(cfg.at("guidance").at("selection") == "sample-proportional");

  const std::string bad = (root_dir() / "badkey.json").string();
  write_text_file(bad, R"({"modle": "typo.bin"})");
  auto r = run_cli({"generate", "--config", bad, "--out", sub_dir("junk6")});
  CHECK(r.code == 2);
  CHECK(r.err.find("modle") != std::string::npos);
}
