#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ptycho/forward.hpp"
#include "ptycho/pim.hpp"
#include "ptycho/recon.hpp"

namespace ptycho {

/// Synthetic-instance parameters shared by all scenarios.
struct ModelConfig {
  int side = 32;
  std::vector<double> lambda = {1.0, 1.25, 1.5};
  std::vector<double> weights = {0.2, 0.5, 0.3};  // spectral energies, sum to 1
  int support = 12;
  double spacing = 2.0;      // Fermat spiral radius scale
  double photons = 0.0;      // Poisson budget per pixel area; 0 = noiseless
  double perturbation = 0.05;
  std::uint64_t seed = 1;

  int blocks() const { return static_cast<int>(lambda.size()); }
  void validate() const;
};

/// Fully resolved description of a run: what to do, on which instance, with
/// which solver settings, and where to write.
struct ExperimentConfig {
  std::string scenario = "simulate";
  std::string input_dir;  // dataset directory for recon/pim scenarios
  std::string out_dir = "out";
  int threads = 1;
  bool check = false;  // enable runtime certificate verification

  ModelConfig model;
  ReconConfig recon;
  PimConfig pim;

  std::string resume_dir;  // optional checkpoint to continue a blind run from

  void validate() const;
};

/// Flat key-value sections; unknown sections or keys are rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// Named parameter presets (paper-scale and desk-scale pipelines).
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Applies PTYCHO_<SECTION>_<KEY> environment overrides in place.
void apply_env_overrides(ExperimentConfig& cfg);

/// A simulated dataset on disk or in memory.
struct Dataset {
  MeasurementStack data;
  WavelengthSpec spec;
  int support = 0;
  std::optional<BlockVector> object_true;
  std::optional<BlockVector> probe_true;
};

Dataset build_dataset(const ModelConfig& model);
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset, const ModelConfig& model);
Dataset load_dataset(const std::filesystem::path& dir);

/// Executes the configured scenario; returns a process exit status and
/// prints a short progress line per stage. On certificate violations the
/// partial trace is dumped next to the outputs before returning nonzero.
int run_experiment(const ExperimentConfig& cfg);

/// Summarizes one or more trace CSVs: per-run final/minimum statistics
/// ordered by final objective, plus a merged long-form CSV for plotting.
/// `skip_first` drops the leading outer iterations from the merged export,
/// mirroring the usual warm-up exclusion in convergence plots.
int run_report(const std::vector<std::filesystem::path>& traces, int skip_first,
               const std::filesystem::path& out_dir);

}  // namespace ptycho
