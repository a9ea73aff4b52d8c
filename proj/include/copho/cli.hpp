#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "copho/datasets.hpp"
#include "copho/guidance.hpp"
#include "copho/properties.hpp"

namespace copho::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;   // bad flags, configs, or input files
inline constexpr int kExitNumeric = 3;  // training/sampling failures

/// Knobs for the two training commands and for schedule construction.
struct TrainKnobs {
  int T = 48;  // diffusion steps
  int epochs = 60;
  double lr = 0.05;
  int batch = 8;
  int layers = 2;
  int hidden = 16;
  int time_dim = 8;  // denoiser step-embedding width; classifiers use 0
  int pairs = 1;     // train-classifier, path targets: endpoint pairs drawn per graph
  int noised = 0;    // train-classifier: forward-noised variants mixed in per graph
                     // (labels recomputed on the noised graph; requires `schedule`)
};

/// Sweep axes for the ablation command. Defaults cover the full grid the
/// ablation tables report.
struct AblateGrid {
  std::vector<int> t_homo = {1, 5, 10, 20};
  std::vector<double> ph_timing = {0.0, 0.2, 0.4, 0.6, 0.8};
  std::vector<std::string> proposal = {"rand", "ebc", "neg-ebc", "loop-grad", "grad"};
  int samples = 4;  // conditioned samples per grid cell
};

/// Fully resolved invocation: JSON config file first, then flag overrides.
struct RunConfig {
  std::string command;
  std::string run = "run";  // row label used in CSV outputs
  std::string out = "out";
  std::uint64_t seed = 0;

  DatasetSpec dataset;
  std::string model_path;       // diffusion model artifact (in or out)
  std::string schedule_path;    // noise schedule artifact
  std::string classifier_path;  // train-classifier output
  std::map<std::string, std::string> classifiers;  // property name -> model file

  std::string property = "density";  // train-classifier target kind
  std::vector<PropertyTarget> targets;
  GuidanceConfig guidance;
  TrainKnobs train;
  AblateGrid ablate;

  int samples = 8;  // graphs to generate
  int nodes = 16;   // generated graph size
  std::string samples_path;    // evaluate: generated graphs
  std::string reference_path;  // evaluate: reference graphs
  int bins = 20;               // diagnose histogram resolution
};

/// Parses "<verb> [positional inputs] [flags]". Throws std::invalid_argument
/// on unknown verbs/flags/config keys and HelpRequested for --help.
RunConfig parse_run_config(const std::vector<std::string>& args);

struct HelpRequested {
  std::string text;
};

/// One row of the shared metrics schema. Files carry the exact header
/// "run,metric,statistic,value".
struct MetricsRow {
  std::string run;
  std::string metric;
  std::string statistic;
  double value = 0.0;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
/// Rejects missing files, a wrong header, or malformed rows (FormatError).
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

// Individual commands; they throw on failure and leave exit-code mapping to
// run(). Each writes its artifacts plus a manifest.json snapshot that is
// sufficient to replay the invocation.
void cmd_train_diffusion(const RunConfig& cfg);
void cmd_train_classifier(const RunConfig& cfg);
void cmd_generate(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg);
void cmd_ablate(const RunConfig& cfg);
void cmd_diagnose(const RunConfig& cfg);

/// Parses, dispatches, and maps exceptions to exit codes. Diagnostics go to
/// `err` (defaults to std::cerr in the argc/argv overload).
int run(const std::vector<std::string>& args, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace copho::cli
