#include "copho/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"

#include "copho/diffusion.hpp"
#include "copho/errors.hpp"
#include "copho/neural.hpp"
#include "copho/serialize.hpp"

namespace copho::cli {

using nlohmann::json;

namespace {

std::string fmt_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
  }
}

std::vector<PropertyTarget> parse_targets(const json& tj) {
  const json arr = tj.is_array() ? tj : json::array({tj});
  std::vector<PropertyTarget> out;
  for (const json& obj : arr) {
    if (!obj.is_object()) throw std::invalid_argument("config: each target must be an object");
    check_keys(obj, {"property", "value", "epsilon", "pairs", "length"}, "targets");
    PropertyTarget t;
    t.kind = property_from_name(obj.at("property").get<std::string>());
    t.value = obj.value("value", 0.0);
    t.epsilon = obj.value("epsilon", 0.0);
    if (t.kind == PropertyKind::ShortestPathSet) {
      if (!obj.contains("pairs")) {
        throw std::invalid_argument("config: shortest-path target needs a 'pairs' array");
      }
      const int shared_len = obj.value("length", 0);
      for (const json& p : obj.at("pairs")) {
        if (!p.is_array() || (p.size() != 2 && p.size() != 3)) {
          throw std::invalid_argument("config: each pair must be [source, target] or [source, target, length]");
        }
        PathTarget pt;
        pt.source = p.at(0).get<int>();
        pt.target = p.at(1).get<int>();
        pt.length = p.size() == 3 ? p.at(2).get<int>() : shared_len;
        if (pt.length <= 0) {
          throw std::invalid_argument("config: pair without a usable length (add 'length' or a third element)");
        }
        t.paths.push_back(pt);
      }
    } else if (obj.contains("pairs") || obj.contains("length")) {
      throw std::invalid_argument("config: 'pairs'/'length' only apply to shortest-path targets");
    }
    t.validate();
    out.push_back(std::move(t));
  }
  return out;
}

json targets_to_json(const std::vector<PropertyTarget>& targets) {
  json arr = json::array();
  for (const PropertyTarget& t : targets) {
    json obj;
    obj["property"] = property_name(t.kind);
    obj["value"] = t.value;
    obj["epsilon"] = t.epsilon;
    if (t.kind == PropertyKind::ShortestPathSet) {
      json pairs = json::array();
      for (const PathTarget& p : t.paths) pairs.push_back({p.source, p.target, p.length});
      obj["pairs"] = pairs;
    }
    arr.push_back(obj);
  }
  return arr;
}

void apply_config_json(RunConfig& cfg, const json& j, bool& dataset_seed_given) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
  check_keys(j,
             {"command", "run", "out", "seed", "dataset", "model", "schedule", "classifier",
              "classifiers", "property", "targets", "guidance", "train", "ablate", "samples",
              "nodes", "samples_path", "reference_path", "bins"},
             "the top level");
  if (j.contains("command")) cfg.command = j.at("command").get<std::string>();
  if (j.contains("run")) cfg.run = j.at("run").get<std::string>();
  if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, {"kind", "count", "n_min", "n_max", "p_in", "p_out", "seed", "path"}, "dataset");
    if (d.contains("kind")) cfg.dataset.kind = dataset_kind_from_name(d.at("kind").get<std::string>());
    if (d.contains("count")) cfg.dataset.count = d.at("count").get<int>();
    if (d.contains("n_min")) cfg.dataset.n_min = d.at("n_min").get<int>();
    if (d.contains("n_max")) cfg.dataset.n_max = d.at("n_max").get<int>();
    if (d.contains("p_in")) cfg.dataset.p_in = d.at("p_in").get<double>();
    if (d.contains("p_out")) cfg.dataset.p_out = d.at("p_out").get<double>();
    if (d.contains("path")) cfg.dataset.path = d.at("path").get<std::string>();
    if (d.contains("seed")) {
      cfg.dataset.seed = d.at("seed").get<std::uint64_t>();
      dataset_seed_given = true;
    }
  }
  if (j.contains("model")) cfg.model_path = j.at("model").get<std::string>();
  if (j.contains("schedule")) cfg.schedule_path = j.at("schedule").get<std::string>();
  if (j.contains("classifier")) cfg.classifier_path = j.at("classifier").get<std::string>();
  if (j.contains("classifiers")) {
    for (const auto& [name, path] : j.at("classifiers").items()) {
      property_from_name(name);  // reject typos early
      cfg.classifiers[name] = path.get<std::string>();
    }
  }
  if (j.contains("property")) cfg.property = j.at("property").get<std::string>();
  if (j.contains("targets")) cfg.targets = parse_targets(j.at("targets"));
  if (j.contains("guidance")) {
    const json& g = j.at("guidance");
    check_keys(g, {"t_homo", "ph_timing", "apply_every", "proposal", "selection"}, "guidance");
    if (g.contains("t_homo")) cfg.guidance.t_homo = g.at("t_homo").get<int>();
    if (g.contains("ph_timing")) cfg.guidance.ph_timing = g.at("ph_timing").get<double>();
    if (g.contains("apply_every")) cfg.guidance.apply_every = g.at("apply_every").get<int>();
    if (g.contains("proposal")) cfg.guidance.proposal = proposal_from_name(g.at("proposal").get<std::string>());
    if (g.contains("selection")) cfg.guidance.selection = selection_from_name(g.at("selection").get<std::string>());
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, {"T", "epochs", "lr", "batch", "layers", "hidden", "time_dim", "pairs", "noised"},
               "train");
    if (t.contains("T")) cfg.train.T = t.at("T").get<int>();
    if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
    if (t.contains("lr")) cfg.train.lr = t.at("lr").get<double>();
    if (t.contains("batch")) cfg.train.batch = t.at("batch").get<int>();
    if (t.contains("layers")) cfg.train.layers = t.at("layers").get<int>();
    if (t.contains("hidden")) cfg.train.hidden = t.at("hidden").get<int>();
    if (t.contains("time_dim")) cfg.train.time_dim = t.at("time_dim").get<int>();
    if (t.contains("pairs")) cfg.train.pairs = t.at("pairs").get<int>();
    if (t.contains("noised")) cfg.train.noised = t.at("noised").get<int>();
  }
  if (j.contains("ablate")) {
    const json& a = j.at("ablate");
    check_keys(a, {"t_homo", "ph_timing", "proposal", "samples"}, "ablate");
    if (a.contains("t_homo")) cfg.ablate.t_homo = a.at("t_homo").get<std::vector<int>>();
    if (a.contains("ph_timing")) cfg.ablate.ph_timing = a.at("ph_timing").get<std::vector<double>>();
    if (a.contains("proposal")) cfg.ablate.proposal = a.at("proposal").get<std::vector<std::string>>();
    if (a.contains("samples")) cfg.ablate.samples = a.at("samples").get<int>();
  }
  if (j.contains("samples")) cfg.samples = j.at("samples").get<int>();
  if (j.contains("nodes")) cfg.nodes = j.at("nodes").get<int>();
  if (j.contains("samples_path")) cfg.samples_path = j.at("samples_path").get<std::string>();
  if (j.contains("reference_path")) cfg.reference_path = j.at("reference_path").get<std::string>();
  if (j.contains("bins")) cfg.bins = j.at("bins").get<int>();
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["command"] = cfg.command;
  j["run"] = cfg.run;
  j["out"] = cfg.out;
  j["seed"] = cfg.seed;
  j["dataset"] = {{"kind", dataset_kind_name(cfg.dataset.kind)}, {"count", cfg.dataset.count},
                  {"n_min", cfg.dataset.n_min},                  {"n_max", cfg.dataset.n_max},
                  {"p_in", cfg.dataset.p_in},                    {"p_out", cfg.dataset.p_out},
                  {"seed", cfg.dataset.seed},                    {"path", cfg.dataset.path}};
  j["model"] = cfg.model_path;
  j["schedule"] = cfg.schedule_path;
  j["classifier"] = cfg.classifier_path;
  j["classifiers"] = cfg.classifiers;
  j["property"] = cfg.property;
  j["targets"] = targets_to_json(cfg.targets);
  j["guidance"] = {{"t_homo", cfg.guidance.t_homo},
                   {"ph_timing", cfg.guidance.ph_timing},
                   {"apply_every", cfg.guidance.apply_every},
                   {"proposal", proposal_name(cfg.guidance.proposal)},
                   {"selection", selection_name(cfg.guidance.selection)}};
  j["train"] = {{"T", cfg.train.T},         {"epochs", cfg.train.epochs},
                {"lr", cfg.train.lr},       {"batch", cfg.train.batch},
                {"layers", cfg.train.layers}, {"hidden", cfg.train.hidden},
                {"time_dim", cfg.train.time_dim}, {"pairs", cfg.train.pairs},
                {"noised", cfg.train.noised}};
  j["ablate"] = {{"t_homo", cfg.ablate.t_homo},
                 {"ph_timing", cfg.ablate.ph_timing},
                 {"proposal", cfg.ablate.proposal},
                 {"samples", cfg.ablate.samples}};
  j["samples"] = cfg.samples;
  j["nodes"] = cfg.nodes;
  j["samples_path"] = cfg.samples_path;
  j["reference_path"] = cfg.reference_path;
  j["bins"] = cfg.bins;
  return j;
}

std::string out_file(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out) / name).string();
}

std::string model_file(const RunConfig& cfg) {
  return cfg.model_path.empty() ? out_file(cfg, "model.bin") : cfg.model_path;
}

std::string schedule_file(const RunConfig& cfg) {
  return cfg.schedule_path.empty() ? out_file(cfg, "schedule.bin") : cfg.schedule_path;
}

std::string classifier_file(const RunConfig& cfg) {
  return cfg.classifier_path.empty() ? out_file(cfg, "classifier.bin") : cfg.classifier_path;
}

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec) throw FormatError("cannot create output directory '" + cfg.out + "': " + ec.message());
}

void write_manifest(const RunConfig& cfg, json extra) {
  extra["command"] = cfg.command;
  extra["config"] = config_to_json(cfg);
  write_text_file(out_file(cfg, "manifest.json"), extra.dump(2) + "\n");
}

void write_train_log(const RunConfig& cfg, const std::vector<double>& epoch_loss) {
  std::string s = "epoch,loss\n";
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
    s += std::to_string(e + 1) + "," + fmt_value(epoch_loss[e]) + "\n";
  }
  write_text_file(out_file(cfg, "train_log.csv"), s);
}

std::vector<Graph> load_dataset(const RunConfig& cfg) {
  std::vector<Graph> graphs = generate_dataset(cfg.dataset);
  if (graphs.empty()) throw std::invalid_argument(cfg.command + ": dataset is empty");
  const int a = graphs[0].node_classes(), b = graphs[0].edge_classes();
  for (const Graph& g : graphs) {
    if (g.node_classes() != a || g.edge_classes() != b) {
      throw std::invalid_argument(cfg.command + ": dataset mixes class counts");
    }
  }
  return graphs;
}

MpnnModel load_classifier_for(const RunConfig& cfg, PropertyKind kind) {
  const std::string name = property_name(kind);
  const auto it = cfg.classifiers.find(name);
  if (it == cfg.classifiers.end()) {
    throw std::invalid_argument("no classifier configured for property '" + name +
                                "' (add it under config key 'classifiers')");
  }
  MpnnModel m = load_model(it->second);
  if (m.config.head != MpnnConfig::Head::Regression) {
    throw std::invalid_argument("classifier '" + it->second + "' is not a property predictor");
  }
  return m;
}

std::vector<ConditionModel> build_conditions(const RunConfig& cfg) {
  std::vector<ConditionModel> conditions;
  for (const PropertyTarget& t : cfg.targets) {
    t.validate();
    conditions.push_back({t, load_classifier_for(cfg, t.kind)});
  }
  return conditions;
}

std::vector<ConditionModel> build_registry(const RunConfig& cfg) {
  std::vector<ConditionModel> registry;
  for (const auto& [name, path] : cfg.classifiers) {
    ConditionModel cm;
    cm.target.kind = property_from_name(name);
    cm.model = load_model(path);
    registry.push_back(std::move(cm));
  }
  return registry;
}

void check_path_targets_fit(const RunConfig& cfg) {
  for (const PropertyTarget& t : cfg.targets) {
    for (const PathTarget& p : t.paths) {
      if (p.source >= cfg.nodes || p.target >= cfg.nodes) {
        throw std::invalid_argument("conditioned pair (" + std::to_string(p.source) + ", " +
                                    std::to_string(p.target) + ") does not fit in " +
                                    std::to_string(cfg.nodes) + " nodes");
      }
    }
  }
}

json trace_to_json(const GuidanceTrace& trace) {
  json steps = json::array();
  for (const GuidanceStep& s : trace.steps) {
    steps.push_back({{"t", s.t},
                     {"active", s.active},
                     {"declined", s.declined},
                     {"selected", s.selected},
                     {"weight", s.weight}});
  }
  return steps;
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::string s = "run,metric,statistic,value\n";
  for (const MetricsRow& r : rows) {
    for (const std::string* field : {&r.run, &r.metric, &r.statistic}) {
      if (field->find_first_of(",\n\r") != std::string::npos) {
        throw std::invalid_argument("metrics csv: field contains a separator: '" + *field + "'");
      }
    }
    s += r.run + "," + r.metric + "," + r.statistic + "," + fmt_value(r.value) + "\n";
  }
  write_text_file(path, s);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("metrics csv: empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "run,metric,statistic,value") {
    throw FormatError("metrics csv: wrong header in '" + path + "': " + line);
  }
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 4) {
      throw FormatError("metrics csv: row " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields");
    }
    MetricsRow r;
    r.run = fields[0];
    r.metric = fields[1];
    r.statistic = fields[2];
    char* end = nullptr;
    r.value = std::strtod(fields[3].c_str(), &end);
    if (end == fields[3].c_str() || *end != '\0') {
      throw FormatError("metrics csv: row " + std::to_string(line_no) + " has a non-numeric value");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

RunConfig parse_run_config(const std::vector<std::string>& args) {
  CLI::App app{"graph diffusion workbench"};
  app.name("copho");

  std::string command;
  app.add_option("command", command,
                 "one of: train-diffusion, train-classifier, generate, evaluate, ablate, diagnose")
      ->required();
  std::vector<std::string> inputs;
  app.add_option("inputs", inputs, "evaluate only: <samples-file> <reference-file>");

  std::string config_path, out, run_name, dataset, targets_text, proposal, selection, model,
      schedule, classifier, property;
  std::uint64_t seed = 0;
  int t_homo = 0, samples = 0, nodes = 0, bins = 0;
  double ph_timing = 0.0;

  app.add_option("--config", config_path, "JSON config file; flags override its values");
  auto* seed_opt = app.add_option("--seed", seed, "run seed");
  auto* out_opt = app.add_option("--out", out, "output directory");
  auto* run_opt = app.add_option("--run", run_name, "row label for CSV outputs");
  auto* dataset_opt =
      app.add_option("--dataset", dataset, "dataset kind (community-small, planar) or a file path");
  auto* targets_opt = app.add_option("--targets", targets_text, "inline JSON target list");
  auto* t_homo_opt = app.add_option("--t-homo", t_homo, "candidate-ladder depth");
  auto* ph_timing_opt =
      app.add_option("--ph-timing", ph_timing, "fraction of reverse steps before guidance starts");
  auto* proposal_opt =
      app.add_option("--proposal", proposal, "grad | loop-grad | ebc | neg-ebc | rand");
  auto* selection_opt =
      app.add_option("--selection", selection, "argmax-weight | sample-proportional");
  auto* model_opt = app.add_option("--model", model, "diffusion model file (or model under test)");
  auto* schedule_opt = app.add_option("--schedule", schedule, "noise schedule file");
  auto* classifier_opt = app.add_option("--classifier", classifier, "classifier output file");
  auto* property_opt = app.add_option("--property", property, "train-classifier target property");
  auto* samples_opt = app.add_option("--samples", samples, "number of graphs to generate");
  auto* nodes_opt = app.add_option("--nodes", nodes, "generated graph size");
  auto* bins_opt = app.add_option("--bins", bins, "diagnose histogram bins");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::Error& e) {
    throw std::invalid_argument(std::string("argument error: ") + e.what());
  }

  static const std::set<std::string> kCommands = {"train-diffusion", "train-classifier", "generate",
                                                  "evaluate", "ablate", "diagnose"};
  if (!kCommands.count(command)) throw std::invalid_argument("unknown command '" + command + "'");

  RunConfig cfg;
  bool dataset_seed_given = false;
  if (!config_path.empty()) {
    apply_config_json(cfg, json::parse(read_text_file(config_path)), dataset_seed_given);
  }
  cfg.command = command;

  if (seed_opt->count()) cfg.seed = seed;
  if (out_opt->count()) cfg.out = out;
  if (run_opt->count()) cfg.run = run_name;
  if (dataset_opt->count()) {
    const bool looks_like_path = dataset.find('/') != std::string::npos ||
                                 dataset.find('.') != std::string::npos ||
                                 std::filesystem::exists(dataset);
    if (looks_like_path) {
      cfg.dataset.kind = DatasetKind::File;
      cfg.dataset.path = dataset;
    } else {
      cfg.dataset.kind = dataset_kind_from_name(dataset);
    }
  }
  if (targets_opt->count()) cfg.targets = parse_targets(json::parse(targets_text));
  if (t_homo_opt->count()) cfg.guidance.t_homo = t_homo;
  if (ph_timing_opt->count()) cfg.guidance.ph_timing = ph_timing;
  if (proposal_opt->count()) cfg.guidance.proposal = proposal_from_name(proposal);
  if (selection_opt->count()) cfg.guidance.selection = selection_from_name(selection);
  if (model_opt->count()) cfg.model_path = model;
  if (schedule_opt->count()) cfg.schedule_path = schedule;
  if (classifier_opt->count()) cfg.classifier_path = classifier;
  if (property_opt->count()) cfg.property = property;
  if (samples_opt->count()) cfg.samples = samples;
  if (nodes_opt->count()) cfg.nodes = nodes;
  if (bins_opt->count()) cfg.bins = bins;
  if (!dataset_seed_given) cfg.dataset.seed = cfg.seed;

  if (!inputs.empty()) {
    if (command != "evaluate") {
      throw std::invalid_argument("positional input files only apply to 'evaluate'");
    }
    if (inputs.size() > 2) throw std::invalid_argument("evaluate takes at most two input files");
    cfg.samples_path = inputs[0];
    if (inputs.size() > 1) cfg.reference_path = inputs[1];
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

void cmd_train_diffusion(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  const std::vector<Graph> graphs = load_dataset(cfg);
  const int a = graphs[0].node_classes(), b = graphs[0].edge_classes();
  const NoiseSchedule schedule = make_schedule(cfg.train.T, a, b);

  MpnnConfig mcfg;
  mcfg.layers = cfg.train.layers;
  mcfg.hidden = cfg.train.hidden;
  mcfg.node_classes = a;
  mcfg.edge_classes = b;
  mcfg.time_dim = cfg.train.time_dim;
  mcfg.head = MpnnConfig::Head::Denoiser;

  TrainConfig tcfg;
  tcfg.lr = cfg.train.lr;
  tcfg.epochs = cfg.train.epochs;
  tcfg.batch_size = cfg.train.batch;
  tcfg.seed = cfg.seed;
  tcfg.loss = TrainConfig::Loss::CrossEntropy;

  const TrainResult res = train_denoiser(graphs, schedule, mcfg, tcfg);
  save_model(model_file(cfg), res.model);
  save_schedule(schedule_file(cfg), schedule);
  write_train_log(cfg, res.epoch_loss);
  write_manifest(cfg, {{"outputs", {model_file(cfg), schedule_file(cfg), out_file(cfg, "train_log.csv")}},
                       {"graphs", graphs.size()},
                       {"final_loss", res.epoch_loss.empty() ? 0.0 : res.epoch_loss.back()}});
}

namespace {

// Draws up to `count` labelled endpoint pairs on `g` into `examples`. Returns
// how many draws failed to find a usable pair.
int add_path_examples(const Graph& g, int count, Rng& gr, std::vector<RegressionExample>& examples) {
  int missed = 0;
  for (int k = 0; k < count; ++k) {
    bool made = false;
    for (int attempt = 0; attempt < 30 && !made; ++attempt) {
      const int u = gr.uniform_int(g.n());
      const int v = gr.uniform_int(g.n());
      if (u == v || !g.active(u) || !g.active(v)) continue;
      const int d = bfs_distances(g, u)[v];
      if (d == kUnreachable) continue;
      examples.push_back({g, {{u, v}}, static_cast<double>(d)});
      made = true;
    }
    if (!made) ++missed;
  }
  return missed;
}

// Adds one whole-graph property example unless the value is undefined on `g`.
int add_property_example(const Graph& g, PropertyKind kind, std::vector<RegressionExample>& examples) {
  try {
    const double y = eval_property(g, kind);
    if (std::isfinite(y)) {
      examples.push_back({g, {}, y});
      return 0;
    }
  } catch (const std::domain_error&) {
  }
  return 1;
}

}  // namespace

void cmd_train_classifier(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  const PropertyKind kind = property_from_name(cfg.property);
  const std::vector<Graph> graphs = load_dataset(cfg);
  if (cfg.train.pairs < 1) throw std::invalid_argument("train-classifier: pairs must be positive");
  if (cfg.train.noised < 0) throw std::invalid_argument("train-classifier: noised must not be negative");
  NoiseSchedule schedule;
  if (cfg.train.noised > 0) {
    if (cfg.schedule_path.empty()) {
      throw std::invalid_argument("train-classifier: noised variants need a schedule artifact");
    }
    schedule = load_schedule(cfg.schedule_path);
  }

  Rng rng(cfg.seed);
  Rng pair_rng = rng.split("classifier-pairs");
  std::vector<RegressionExample> examples;
  int skipped = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = graphs[i];
    Rng gr = pair_rng.split(static_cast<std::uint64_t>(i));
    if (kind == PropertyKind::ShortestPathSet) {
      skipped += add_path_examples(g, cfg.train.pairs, gr, examples) == cfg.train.pairs ? 1 : 0;
    } else {
      skipped += add_property_example(g, kind, examples);
    }
    // Forward-noised variants keep the regressor accurate on the denser
    // intermediate graphs that guidance differentiates; labels come from the
    // noised graph itself.
    for (int k = 0; k < cfg.train.noised; ++k) {
      const int t = 1 + gr.uniform_int(std::max(1, schedule.T * 7 / 10));
      const Graph noisy = forward_noise(g, t, schedule, gr);
      if (kind == PropertyKind::ShortestPathSet) {
        add_path_examples(noisy, std::max(1, cfg.train.pairs / 2), gr, examples);
      } else {
        add_property_example(noisy, kind, examples);
      }
    }
  }
  if (examples.empty()) {
    throw std::invalid_argument("train-classifier: no graph in the dataset yields a usable label");
  }

  MpnnConfig mcfg;
  mcfg.layers = cfg.train.layers;
  mcfg.hidden = cfg.train.hidden;
  mcfg.node_classes = graphs[0].node_classes();
  mcfg.edge_classes = graphs[0].edge_classes();
  mcfg.time_dim = 0;
  mcfg.marker_channels = kind == PropertyKind::ShortestPathSet;
  mcfg.head = MpnnConfig::Head::Regression;

  TrainConfig tcfg;
  tcfg.lr = cfg.train.lr;
  tcfg.epochs = cfg.train.epochs;
  tcfg.batch_size = cfg.train.batch;
  tcfg.seed = cfg.seed;

  const TrainResult res = train_regressor(examples, mcfg, tcfg);
  save_model(classifier_file(cfg), res.model);
  write_train_log(cfg, res.epoch_loss);
  write_manifest(cfg, {{"outputs", {classifier_file(cfg), out_file(cfg, "train_log.csv")}},
                       {"property", cfg.property},
                       {"examples", examples.size()},
                       {"skipped", skipped},
                       {"final_loss", res.epoch_loss.empty() ? 0.0 : res.epoch_loss.back()}});
}

void cmd_generate(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  const MpnnModel dm = load_model(model_file(cfg));
  if (dm.config.head != MpnnConfig::Head::Denoiser) {
    throw std::invalid_argument("generate: '" + model_file(cfg) + "' is not a denoiser model");
  }
  const NoiseSchedule schedule = load_schedule(schedule_file(cfg));
  const DenoiserFn denoiser = make_denoiser(dm);
  if (cfg.samples <= 0) throw std::invalid_argument("generate: samples must be positive");
  if (cfg.nodes <= 0) throw std::invalid_argument("generate: nodes must be positive");
  check_path_targets_fit(cfg);

  Rng rng(cfg.seed);
  std::vector<Graph> out;
  json traces = json::array();
  if (cfg.targets.empty()) {
    for (int i = 0; i < cfg.samples; ++i) {
      Rng sr = rng.split(static_cast<std::uint64_t>(i));
      out.push_back(sample_unconditional(denoiser, schedule, cfg.nodes, sr));
    }
  } else {
    cfg.guidance.validate();
    std::vector<ConditionModel> conditions = build_conditions(cfg);
    if (cfg.guidance.proposal == ProposalKind::LoopGradient) {
      conditions = loop_mismatched(conditions, build_registry(cfg));
    }
    for (int i = 0; i < cfg.samples; ++i) {
      Rng sr = rng.split(static_cast<std::uint64_t>(i));
      GuidanceTrace trace;
      out.push_back(
          conditioned_sample(denoiser, conditions, schedule, cfg.guidance, cfg.nodes, sr, &trace));
      traces.push_back(trace_to_json(trace));
    }
  }
  const std::string samples_path = out_file(cfg, "samples.txt");
  save_edge_list(samples_path, out);
  write_manifest(cfg, {{"outputs", {samples_path}}, {"trace", traces}});
}

void cmd_evaluate(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  if (cfg.samples_path.empty()) {
    throw std::invalid_argument("evaluate: needs a samples file (first positional or samples_path)");
  }
  if (cfg.reference_path.empty()) {
    throw std::invalid_argument(
        "evaluate: needs a reference file (second positional or reference_path)");
  }
  const std::vector<Graph> samples = load_edge_list(cfg.samples_path);
  const std::vector<Graph> reference = load_edge_list(cfg.reference_path);

  std::vector<MetricsRow> rows;
  rows.push_back({cfg.run, "mmd", "degree", mmd(samples, reference, MmdStatistic::Degree)});
  rows.push_back({cfg.run, "mmd", "clustering", mmd(samples, reference, MmdStatistic::Clustering)});
  rows.push_back({cfg.run, "mmd", "orbit", mmd(samples, reference, MmdStatistic::Orbit)});
  for (const PropertyTarget& t : cfg.targets) {
    t.validate();
    rows.push_back({cfg.run, "mae", property_name(t.kind), condition_mae(samples, t)});
    if (t.kind == PropertyKind::ShortestPathSet) {
      rows.push_back({cfg.run, "kl", property_name(t.kind), path_kl(samples, t)});
      std::vector<std::pair<int, int>> pairs;
      for (const PathTarget& p : t.paths) pairs.push_back({p.source, p.target});
      double ol_sum = 0.0;
      int ol_n = 0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const Graph& orig = reference[i % reference.size()];
        try {
          ol_sum += overlap_rate(samples[i], orig, pairs);
          ++ol_n;
        } catch (const std::invalid_argument&) {
          // pair disconnected in this sample or reference; not scorable
        }
      }
      if (ol_n > 0) rows.push_back({cfg.run, "ol", property_name(t.kind), ol_sum / ol_n});
    }
  }
  const std::string metrics_path = out_file(cfg, "metrics.csv");
  write_metrics_csv(metrics_path, rows);
  write_manifest(cfg, {{"outputs", {metrics_path}}, {"rows", rows.size()}});
}

void cmd_ablate(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  if (cfg.targets.empty()) throw std::invalid_argument("ablate: needs at least one target");
  if (cfg.ablate.samples <= 0) throw std::invalid_argument("ablate: samples must be positive");
  if (cfg.ablate.t_homo.empty() || cfg.ablate.ph_timing.empty() || cfg.ablate.proposal.empty()) {
    throw std::invalid_argument("ablate: every sweep axis needs at least one value");
  }
  const MpnnModel dm = load_model(model_file(cfg));
  if (dm.config.head != MpnnConfig::Head::Denoiser) {
    throw std::invalid_argument("ablate: '" + model_file(cfg) + "' is not a denoiser model");
  }
  const NoiseSchedule schedule = load_schedule(schedule_file(cfg));
  const DenoiserFn denoiser = make_denoiser(dm);
  check_path_targets_fit(cfg);
  const std::vector<ConditionModel> base = build_conditions(cfg);
  const bool wants_loop =
      std::find(cfg.ablate.proposal.begin(), cfg.ablate.proposal.end(), "loop-grad") !=
      cfg.ablate.proposal.end();
  const std::vector<ConditionModel> looped =
      wants_loop ? loop_mismatched(base, build_registry(cfg)) : std::vector<ConditionModel>{};

  Rng root(cfg.seed);
  std::vector<MetricsRow> rows;
  int cell = 0;
  for (const int th : cfg.ablate.t_homo) {
    for (const double pt : cfg.ablate.ph_timing) {
      for (const std::string& pname : cfg.ablate.proposal) {
        GuidanceConfig gcfg = cfg.guidance;
        gcfg.t_homo = th;
        gcfg.ph_timing = pt;
        gcfg.proposal = proposal_from_name(pname);
        gcfg.validate();
        const std::vector<ConditionModel>& conds =
            gcfg.proposal == ProposalKind::LoopGradient ? looped : base;
        Rng cell_rng = root.split(static_cast<std::uint64_t>(cell));
        std::vector<Graph> cell_samples;
        for (int s = 0; s < cfg.ablate.samples; ++s) {
          Rng sr = cell_rng.split(static_cast<std::uint64_t>(s));
          cell_samples.push_back(
              conditioned_sample(denoiser, conds, schedule, gcfg, cfg.nodes, sr));
        }
        const std::string label = "t" + std::to_string(th) + "_p" + fmt_short(pt) + "_" + pname;
        rows.push_back({label, "mae", property_name(cfg.targets[0].kind),
                        condition_mae(cell_samples, cfg.targets[0])});
        ++cell;
      }
    }
  }
  const std::string csv_path = out_file(cfg, "ablation.csv");
  write_metrics_csv(csv_path, rows);
  write_manifest(cfg, {{"outputs", {csv_path}}, {"cells", cell}});
}

void cmd_diagnose(const RunConfig& cfg) {
  ensure_out_dir(cfg);
  const MpnnModel model = load_model(model_file(cfg));
  if (model.config.head != MpnnConfig::Head::Regression) {
    throw std::invalid_argument("diagnose: '" + model_file(cfg) + "' is not a property predictor");
  }
  if (cfg.bins <= 0) throw std::invalid_argument("diagnose: bins must be positive");
  const std::vector<Graph> graphs = load_dataset(cfg);

  ConditionModel cm;
  if (!cfg.targets.empty()) cm.target = cfg.targets[0];
  cm.model = model;

  std::vector<int> steps;
  NoiseSchedule schedule;
  const bool noisy = !cfg.schedule_path.empty();
  if (noisy) {
    schedule = load_schedule(cfg.schedule_path);
    const int T = schedule.T;
    for (const int t : {T, std::max(1, (3 * T) / 4), std::max(1, T / 2), std::max(1, T / 4), 1}) {
      if (std::find(steps.begin(), steps.end(), t) == steps.end()) steps.push_back(t);
    }
    std::sort(steps.rbegin(), steps.rend());
  } else {
    steps.push_back(0);  // score the clean graphs
  }

  Rng rng(cfg.seed);
  std::vector<MetricsRow> rows;
  for (const int t : steps) {
    std::vector<double> values;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      Graph gt = graphs[i];
      if (t > 0) {
        Rng nr = rng.split(static_cast<std::uint64_t>(t)).split(static_cast<std::uint64_t>(i));
        gt = forward_noise(graphs[i], t, schedule, nr);
      }
      const ScoredGraph sg = gradient_scores({cm}, gt);
      for (Eigen::Index p = 0; p < sg.edge_score.size(); ++p) values.push_back(sg.edge_score(p));
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    const std::string prefix = "t=" + std::to_string(t) + ";";
    if (!(hi > lo)) {
      rows.push_back({cfg.run, "grad-hist",
                      prefix + "bin=0;lo=" + fmt_value(lo) + ";hi=" + fmt_value(hi),
                      static_cast<double>(values.size())});
      continue;
    }
    std::vector<int> counts(cfg.bins, 0);
    for (const double v : values) {
      const int k = std::min(cfg.bins - 1, static_cast<int>((v - lo) / (hi - lo) * cfg.bins));
      ++counts[k];
    }
    for (int k = 0; k < cfg.bins; ++k) {
      const double bl = lo + (hi - lo) * k / cfg.bins;
      const double bh = lo + (hi - lo) * (k + 1) / cfg.bins;
      rows.push_back({cfg.run, "grad-hist",
                      prefix + "bin=" + std::to_string(k) + ";lo=" + fmt_value(bl) +
                          ";hi=" + fmt_value(bh),
                      static_cast<double>(counts[k])});
    }
  }
  const std::string csv_path = out_file(cfg, "gradient_histogram.csv");
  write_metrics_csv(csv_path, rows);
  write_manifest(cfg, {{"outputs", {csv_path}}, {"steps", steps}});
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& err) {
  try {
    const RunConfig cfg = parse_run_config(args);
    if (cfg.command == "train-diffusion") {
      cmd_train_diffusion(cfg);
    } else if (cfg.command == "train-classifier") {
      cmd_train_classifier(cfg);
    } else if (cfg.command == "generate") {
      cmd_generate(cfg);
    } else if (cfg.command == "evaluate") {
      cmd_evaluate(cfg);
    } else if (cfg.command == "ablate") {
      cmd_ablate(cfg);
    } else {
      cmd_diagnose(cfg);
    }
    return kExitOk;
  } catch (const HelpRequested& h) {
    err << h.text;
    return kExitOk;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ScheduleError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const GenerationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cerr);
}

}  // namespace copho::cli
