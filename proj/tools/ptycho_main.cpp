#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ptycho/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string preset;
  std::string out;
  std::string input;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool check = false;
  int threads = 0;
  std::string resume;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "configuration file (key = value sections)");
  cmd->add_option("--preset", args.preset, "named parameter preset");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--seed", args.seed, "model seed override")->each([&](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_flag("--check", args.check, "verify decrease/step certificates while running");
  cmd->add_option("--threads", args.threads, "worker threads for shift-parallel loops");
}

ptycho::ExperimentConfig resolve(const CommonArgs& args, const std::string& scenario) {
  ptycho::ExperimentConfig cfg;
  if (!args.preset.empty()) cfg = ptycho::preset_config(args.preset);
  if (!args.config.empty()) {
    ptycho::ExperimentConfig from_file = ptycho::parse_config_file(args.config);
    if (!args.preset.empty()) {
      // preset supplies defaults; an explicit config file wins wholesale
      std::cerr << "note: --config overrides --preset values\n";
    }
    cfg = from_file;
  }
  ptycho::apply_env_overrides(cfg);
  if (!scenario.empty()) cfg.scenario = scenario;
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (!args.input.empty()) cfg.input_dir = args.input;
  if (args.seed_set) cfg.model.seed = args.seed;
  if (args.check) cfg.check = true;
  if (args.threads > 0) cfg.threads = args.threads;
  if (!args.resume.empty()) cfg.resume_dir = args.resume;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polychromatic ptychography simulation and reconstruction"};
  app.require_subcommand(1);

  struct SubSpec {
    const char* name;
    const char* scenario;
    const char* help;
  };
  const std::vector<SubSpec> subs = {
      {"simulate", "simulate", "synthesize a measurement dataset"},
      {"recon-object", "recon-object", "recover the object stack at known probe"},
      {"recon-window", "recon-window", "recover the probe stack at known object"},
      {"recon-blind", "recon-blind", "recover object and probe jointly"},
      {"pim", "pim", "run the information-multiplexing baseline"},
      {"run", "", "run whatever scenario the config or preset selects"},
  };

  std::vector<CommonArgs> args(subs.size());
  std::vector<CLI::App*> cmds;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
    add_common(cmd, args[i]);
    if (std::string(subs[i].scenario) != "simulate") {
      cmd->add_option("--input", args[i].input, "dataset directory produced by simulate");
    }
    if (std::string(subs[i].name) == "recon-blind") {
      cmd->add_option("--resume", args[i].resume, "checkpoint directory to continue from");
    }
    cmds.push_back(cmd);
  }

  CLI::App* report = app.add_subcommand("report", "summarize trace CSVs into comparison tables");
  std::vector<std::string> trace_files;
  int skip_first = 0;
  std::string report_out = "report";
  report->add_option("traces", trace_files, "trace.csv files")->required();
  report->add_option("--skip-first", skip_first, "exclude the first k outer iterations");
  report->add_option("--out", report_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> paths(trace_files.begin(), trace_files.end());
      return ptycho::run_report(paths, skip_first, report_out);
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (cmds[i]->parsed()) {
        return ptycho::run_experiment(resolve(args[i], subs[i].scenario));
      }
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
