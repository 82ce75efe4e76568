#include "ptycho/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "ptycho/io.hpp"
#include "ptycho/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ptycho {

void ModelConfig::validate() const {
  if (side < 2) throw std::invalid_argument("model: n must be >= 2");
  WavelengthSpec{lambda}.validate();
  if (weights.size() != lambda.size())
    throw std::invalid_argument("model: weights must match lambda in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("model: weights must be > 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("model: weights must sum to 1");
  if (support < 1 || support > side) throw std::invalid_argument("model: support must be in [1, n]");
  if (!(spacing > 0.0)) throw std::invalid_argument("model: spacing must be > 0");
  if (photons < 0.0) throw std::invalid_argument("model: photons must be >= 0");
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> known = {"simulate",   "recon-object", "recon-window",
                                                 "recon-blind", "pim",          "suite-nonblind",
                                                 "suite-blind"};
  if (std::find(known.begin(), known.end(), scenario) == known.end())
    throw std::invalid_argument("unknown scenario: " + scenario);
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  model.validate();
  recon.validate(model.blocks());
  pim.validate();
  if (out_dir.empty()) throw std::invalid_argument("out directory must be set");
}

// --- config text format -------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

std::string format_list(const std::vector<double>& v) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    out << v[i];
  }
  return out.str();
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct KeyBinding {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeyBinding>& bindings() {
  static const std::vector<KeyBinding> table = {
      {"experiment", "scenario", [](ExperimentConfig& c, const std::string& v) { c.scenario = v; },
       [](const ExperimentConfig& c) { return c.scenario; }},
      {"experiment", "input", [](ExperimentConfig& c, const std::string& v) { c.input_dir = v; },
       [](const ExperimentConfig& c) { return c.input_dir; }},
      {"experiment", "out", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
       [](const ExperimentConfig& c) { return c.out_dir; }},
      {"experiment", "threads",
       [](ExperimentConfig& c, const std::string& v) { c.threads = std::stoi(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.threads); }},
      {"experiment", "check", [](ExperimentConfig& c, const std::string& v) { c.check = parse_bool(v); },
       [](const ExperimentConfig& c) { return c.check ? "true" : "false"; }},
      {"experiment", "resume", [](ExperimentConfig& c, const std::string& v) { c.resume_dir = v; },
       [](const ExperimentConfig& c) { return c.resume_dir; }},

      {"model", "n", [](ExperimentConfig& c, const std::string& v) { c.model.side = std::stoi(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.model.side); }},
      {"model", "lambda", [](ExperimentConfig& c, const std::string& v) { c.model.lambda = parse_list(v); },
       [](const ExperimentConfig& c) { return format_list(c.model.lambda); }},
      {"model", "weights", [](ExperimentConfig& c, const std::string& v) { c.model.weights = parse_list(v); },
       [](const ExperimentConfig& c) { return format_list(c.model.weights); }},
      {"model", "support",
       [](ExperimentConfig& c, const std::string& v) { c.model.support = std::stoi(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.model.support); }},
      {"model", "spacing",
       [](ExperimentConfig& c, const std::string& v) { c.model.spacing = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.model.spacing); }},
      {"model", "photons",
       [](ExperimentConfig& c, const std::string& v) { c.model.photons = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.model.photons); }},
      {"model", "perturbation",
       [](ExperimentConfig& c, const std::string& v) { c.model.perturbation = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.model.perturbation); }},
      {"model", "seed",
       [](ExperimentConfig& c, const std::string& v) { c.model.seed = std::stoull(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.model.seed); }},

      {"recon", "eps", [](ExperimentConfig& c, const std::string& v) { c.recon.eps = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.recon.eps); }},
      {"recon", "alpha_t",
       [](ExperimentConfig& c, const std::string& v) { c.recon.alpha_t = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.recon.alpha_t); }},
      {"recon", "alpha_s",
       [](ExperimentConfig& c, const std::string& v) { c.recon.alpha_s = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.recon.alpha_s); }},
      {"recon", "beta_t",
       [](ExperimentConfig& c, const std::string& v) { c.recon.beta_t = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.recon.beta_t); }},
      {"recon", "beta_s",
       [](ExperimentConfig& c, const std::string& v) { c.recon.beta_s = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.recon.beta_s); }},
      {"recon", "kappa",
       [](ExperimentConfig& c, const std::string& v) { c.recon.kappa = parse_list(v); },
       [](const ExperimentConfig& c) { return format_list(c.recon.kappa); }},
      {"recon", "outer",
       [](ExperimentConfig& c, const std::string& v) { c.recon.outer_iters = std::stoi(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.recon.outer_iters); }},
      {"recon", "object_iters",
       [](ExperimentConfig& c, const std::string& v) { c.recon.object_iters = std::stoi(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.recon.object_iters); }},
      {"recon", "probe_iters",
       [](ExperimentConfig& c, const std::string& v) { c.recon.probe_iters = std::stoi(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.recon.probe_iters); }},
      {"recon", "rule",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "aga")
           c.recon.use_backtracking = true;
         else if (v == "constant")
           c.recon.use_backtracking = false;
         else
           throw std::invalid_argument("recon.rule must be 'aga' or 'constant'");
       },
       [](const ExperimentConfig& c) { return c.recon.use_backtracking ? "aga" : "constant"; }},
      {"recon", "tau", [](ExperimentConfig& c, const std::string& v) { c.recon.tau = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.recon.tau); }},
      {"recon", "depth",
       [](ExperimentConfig& c, const std::string& v) { c.recon.backtrack_depth = std::stoi(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.recon.backtrack_depth); }},
      {"recon", "stop_grad_sq",
       [](ExperimentConfig& c, const std::string& v) { c.recon.stop_grad_sq = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.recon.stop_grad_sq); }},

      {"pim", "alpha", [](ExperimentConfig& c, const std::string& v) { c.pim.alpha = std::stod(v); },
       [](const ExperimentConfig& c) { return format_double(c.pim.alpha); }},
      {"pim", "sweeps",
       [](ExperimentConfig& c, const std::string& v) { c.pim.sweeps = std::stoi(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.pim.sweeps); }},
      {"pim", "blind", [](ExperimentConfig& c, const std::string& v) { c.pim.blind = parse_bool(v); },
       [](const ExperimentConfig& c) { return c.pim.blind ? "true" : "false"; }},
      {"pim", "order",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "random")
           c.pim.randomize_order = true;
         else if (v == "sequential")
           c.pim.randomize_order = false;
         else
           throw std::invalid_argument("pim.order must be 'sequential' or 'random'");
       },
       [](const ExperimentConfig& c) { return c.pim.randomize_order ? "random" : "sequential"; }},
      {"pim", "seed", [](ExperimentConfig& c, const std::string& v) { c.pim.seed = std::stoull(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.pim.seed); }},
  };
  return table;
}

const KeyBinding* find_binding(const std::string& section, const std::string& key) {
  for (const KeyBinding& b : bindings()) {
    if (section == b.section && key == b.key) return &b;
  }
  return nullptr;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[' && s.back() == ']') {
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const KeyBinding* b = find_binding(section, key);
    if (b == nullptr)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key [" +
                                  section + "] " + key);
    b->set(cfg, value);
  }
  return cfg;
}

ExperimentConfig parse_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const KeyBinding& b : bindings()) {
    if (section != b.section) {
      if (!section.empty()) out << '\n';
      section = b.section;
      out << '[' << section << "]\n";
    }
    out << b.key << " = " << b.get(cfg) << '\n';
  }
  return out.str();
}

void apply_env_overrides(ExperimentConfig& cfg) {
  for (const KeyBinding& b : bindings()) {
    std::string name = std::string("PTYCHO_") + b.section + "_" + b.key;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
    if (const char* v = std::getenv(name.c_str())) b.set(cfg, v);
  }
}

// --- presets -------------------------------------------------------------------

std::vector<std::string> preset_names() {
  return {"desk-nonblind", "desk-blind", "paper-nonblind", "paper-blind"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.recon.eps = 1e-8;
  cfg.recon.alpha_t = 1e-2;
  cfg.recon.alpha_s = 0.1;
  cfg.recon.beta_t = 10.0;
  cfg.recon.beta_s = 0.0;
  cfg.recon.use_backtracking = true;
  cfg.recon.tau = 0.5;
  cfg.recon.backtrack_depth = 1;

  cfg.threads = 4;

  if (name == "desk-nonblind") {
    cfg.scenario = "suite-nonblind";
    cfg.model = ModelConfig{32, {1.0, 1.25, 1.5}, {0.2, 0.5, 0.3}, 12, 2.0, 1e6, 0.05, 7};
    cfg.recon.outer_iters = 200;
    cfg.pim.sweeps = 200;
    cfg.out_dir = "runs/desk-nonblind";
  } else if (name == "desk-blind") {
    cfg.scenario = "suite-blind";
    cfg.model = ModelConfig{32, {1.0, 1.25, 1.5}, {0.2, 0.5, 0.3}, 12, 2.0, 0.0, 0.05, 7};
    cfg.recon.outer_iters = 100;
    cfg.pim.sweeps = 100;
    cfg.pim.blind = true;
    cfg.out_dir = "runs/desk-blind";
  } else if (name == "paper-nonblind") {
    cfg.scenario = "suite-nonblind";
    cfg.model = ModelConfig{100, {1.0, 1.25, 1.5}, {0.2, 0.5, 0.3}, 40, 4.9, 1e6, 0.05, 1};
    cfg.recon.outer_iters = 1000;
    cfg.pim.sweeps = 1000;
    cfg.out_dir = "runs/paper-nonblind";
  } else if (name == "paper-blind") {
    cfg.scenario = "suite-blind";
    cfg.model = ModelConfig{100, {1.0, 1.25, 1.5}, {0.2, 0.5, 0.3}, 40, 4.9, 1e6, 0.05, 1};
    cfg.recon.outer_iters = 1000;
    cfg.pim.sweeps = 1000;
    cfg.pim.blind = true;
    cfg.out_dir = "runs/paper-blind";
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return cfg;
}

// --- datasets --------------------------------------------------------------------

Dataset build_dataset(const ModelConfig& model) {
  model.validate();
  Dataset ds;
  ds.spec = WavelengthSpec{model.lambda};
  ds.support = model.support;
  ds.object_true = synthetic_object(model.side, model.blocks(), model.perturbation);
  ds.probe_true = gaussian_probe(model.side, model.support, model.weights);

  const ShiftList shifts = fermat_shifts(model.side, model.support, model.spacing);
  const ScaledDftPlan plan(model.side, ds.spec);
  ds.data = simulate(*ds.object_true, *ds.probe_true, shifts, ds.spec, plan);
  if (model.photons > 0.0) {
    ds.data = add_poisson_noise(ds.data, model.photons, model.seed);
  }
  return ds;
}

void save_dataset(const fs::path& dir, const Dataset& ds, const ModelConfig& model) {
  fs::create_directories(dir);
  write_real_tensor(dir / "measurements.tns", ds.data.values,
                    static_cast<int>(ds.data.shifts.size()), ds.data.side);

  json side_car;
  side_car["side"] = ds.data.side;
  side_car["lambda"] = model.lambda;
  side_car["weights"] = model.weights;
  side_car["support"] = model.support;
  side_car["spacing"] = model.spacing;
  side_car["photons"] = model.photons;
  side_car["perturbation"] = model.perturbation;
  side_car["seed"] = model.seed;
  json shift_list = json::array();
  for (const Shift& m : ds.data.shifts) shift_list.push_back({m.dr, m.dc});
  side_car["shifts"] = shift_list;
  std::ofstream out(dir / "measurements.json", std::ios::trunc);
  out << side_car.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + (dir / "measurements.json").string());

  if (ds.object_true) write_tensor(dir / "object_true.tns", *ds.object_true);
  if (ds.probe_true) write_tensor(dir / "probe_true.tns", *ds.probe_true);
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "measurements.json");
  if (!in) throw std::runtime_error("dataset sidecar missing: " + (dir / "measurements.json").string());
  json side_car = json::parse(in);

  Dataset ds;
  ds.spec.lambda = side_car.at("lambda").get<std::vector<double>>();
  ds.support = side_car.at("support").get<int>();

  RealTensor values = read_real_tensor(dir / "measurements.tns");
  ds.data.side = values.side;
  ds.data.values = std::move(values.values);
  for (const auto& pair : side_car.at("shifts"))
    ds.data.shifts.push_back({pair.at(0).get<int>(), pair.at(1).get<int>()});
  if (ds.data.shifts.size() != static_cast<std::size_t>(values.count))
    throw std::runtime_error("dataset shift count does not match measurement frames");
  ds.data.validate();

  if (fs::exists(dir / "object_true.tns")) ds.object_true = read_tensor(dir / "object_true.tns");
  if (fs::exists(dir / "probe_true.tns")) ds.probe_true = read_tensor(dir / "probe_true.tns");
  return ds;
}

// --- runners ----------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json final_row_json(const RunTrace& trace) {
  json j;
  if (trace.rows.empty()) return j;
  const TraceRow& r = trace.rows.back();
  j["outer"] = r.outer;
  j["sub"] = r.sub;
  j["objective"] = r.objective;
  j["data_loss"] = r.data_loss;
  j["grad_sq"] = r.grad_sq;
  if (std::isfinite(r.rel_err_raw)) {
    j["rel_err_raw"] = r.rel_err_raw;
    j["rel_err_aligned"] = r.rel_err_aligned;
  }
  return j;
}

Dataset obtain_dataset(const ExperimentConfig& cfg) {
  if (!cfg.input_dir.empty()) return load_dataset(cfg.input_dir);
  return build_dataset(cfg.model);
}

int run_simulate(const ExperimentConfig& cfg) {
  const Dataset ds = build_dataset(cfg.model);
  save_dataset(cfg.out_dir, ds, cfg.model);
  export_stack_images(fs::path(cfg.out_dir) / "img", "object_true", *ds.object_true);
  export_stack_images(fs::path(cfg.out_dir) / "img", "probe_true", *ds.probe_true);

  json summary;
  summary["scenario"] = "simulate";
  summary["side"] = ds.data.side;
  summary["shifts"] = ds.data.shifts.size();
  summary["photons"] = cfg.model.photons;
  if (cfg.model.photons > 0.0) {
    // relative amplitude noise vs the clean synthesis
    ModelConfig clean_model = cfg.model;
    clean_model.photons = 0.0;
    const Dataset clean = build_dataset(clean_model);
    KahanSum num, den;
    for (std::size_t i = 0; i < ds.data.values.size(); ++i) {
      const double d = std::sqrt(ds.data.values[i]) - std::sqrt(clean.data.values[i]);
      num.add(d * d);
      den.add(clean.data.values[i]);
    }
    summary["relative_noise"] = std::sqrt(num.value() / den.value());
  }
  write_json(fs::path(cfg.out_dir) / "summary.json", summary);
  std::cout << "simulate: " << ds.data.shifts.size() << " shifts, side " << ds.data.side << " -> "
            << cfg.out_dir << "\n";
  return 0;
}

ReconConfig recon_with_check(const ExperimentConfig& cfg) {
  ReconConfig rc = cfg.recon;
  rc.certify = rc.certify || cfg.check;
  return rc;
}

int run_recon_object(const ExperimentConfig& cfg) {
  const Dataset ds = obtain_dataset(cfg);
  if (!ds.probe_true) throw std::runtime_error("recon-object requires probe_true.tns in the dataset");
  const ScaledDftPlan plan(ds.data.side, ds.spec);
  const BlockVector init = BlockVector::filled(ds.spec.count(), ds.data.side, cplx(1.0, 0.0));
  ErrorRefs refs;
  if (ds.object_true) refs.object = &*ds.object_true;

  const auto t0 = Clock::now();
  const NonblindResult result =
      reconstruct_object(ds.data, *ds.probe_true, init, recon_with_check(cfg), ds.spec, plan, refs);
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  write_tensor(fs::path(cfg.out_dir) / "object_est.tns", result.estimate);
  write_trace_csv(fs::path(cfg.out_dir) / "trace.csv", result.trace);
  export_stack_images(fs::path(cfg.out_dir) / "img", "object_est", result.estimate);

  json summary;
  summary["scenario"] = cfg.scenario;
  summary["runtime_ms"] = ms;
  summary["step_bound"] = result.step_bound;
  summary["initial_objective"] = result.trace.initial_objective;
  summary["final"] = final_row_json(result.trace);
  if (!result.descent.steps.empty()) {
    const Certificate cert =
        min_grad_certificate(result.descent, 1.0 / result.step_bound, result.trace.initial_objective);
    summary["min_grad_certificate"] = {{"lhs", cert.lhs}, {"rhs", cert.rhs}, {"holds", cert.holds()}};
  }
  write_json(fs::path(cfg.out_dir) / "summary.json", summary);
  std::cout << cfg.scenario << ": " << result.trace.rows.size() << " steps in " << ms / 1000.0
            << " s -> " << cfg.out_dir << "\n";
  return 0;
}

int run_recon_window(const ExperimentConfig& cfg) {
  const Dataset ds = obtain_dataset(cfg);
  if (!ds.object_true) throw std::runtime_error("recon-window requires object_true.tns in the dataset");
  const ScaledDftPlan plan(ds.data.side, ds.spec);
  const BlockVector init = stepped_disk_probe(ds.data.side, ds.support, ds.spec.count());
  ErrorRefs refs;
  if (ds.probe_true) refs.probe = &*ds.probe_true;

  const auto t0 = Clock::now();
  const NonblindResult result =
      reconstruct_probe(ds.data, *ds.object_true, init, recon_with_check(cfg), ds.spec, plan, refs);
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  write_tensor(fs::path(cfg.out_dir) / "probe_est.tns", result.estimate);
  write_trace_csv(fs::path(cfg.out_dir) / "trace.csv", result.trace);
  export_stack_images(fs::path(cfg.out_dir) / "img", "probe_est", result.estimate);

  json summary;
  summary["scenario"] = cfg.scenario;
  summary["runtime_ms"] = ms;
  summary["step_bound"] = result.step_bound;
  summary["initial_objective"] = result.trace.initial_objective;
  summary["final"] = final_row_json(result.trace);
  if (!result.descent.steps.empty()) {
    const Certificate cert =
        min_grad_certificate(result.descent, 1.0 / result.step_bound, result.trace.initial_objective);
    summary["min_grad_certificate"] = {{"lhs", cert.lhs}, {"rhs", cert.rhs}, {"holds", cert.holds()}};
  }
  write_json(fs::path(cfg.out_dir) / "summary.json", summary);
  std::cout << cfg.scenario << ": " << result.trace.rows.size() << " steps in " << ms / 1000.0
            << " s -> " << cfg.out_dir << "\n";
  return 0;
}

void save_checkpoint(const fs::path& dir, const BlindResult& result, const ExperimentConfig& cfg) {
  fs::create_directories(dir);
  write_tensor(dir / "object.tns", result.object);
  write_tensor(dir / "probe.tns", result.probe);
  json meta;
  meta["completed_outer"] = result.outer.empty() ? 0 : result.outer.back().iteration;
  meta["seed"] = cfg.model.seed;
  meta["config"] = serialize_config(cfg);
  write_json(dir / "state.json", meta);
}

int run_recon_blind(const ExperimentConfig& cfg) {
  const Dataset ds = obtain_dataset(cfg);
  const ScaledDftPlan plan(ds.data.side, ds.spec);

  BlockVector object0 = BlockVector::filled(ds.spec.count(), ds.data.side, cplx(1.0, 0.0));
  BlockVector probe0 = stepped_disk_probe(ds.data.side, ds.support, ds.spec.count());
  if (!cfg.resume_dir.empty()) {
    object0 = read_tensor(fs::path(cfg.resume_dir) / "object.tns");
    probe0 = read_tensor(fs::path(cfg.resume_dir) / "probe.tns");
  }

  ErrorRefs refs;
  if (ds.object_true) refs.object = &*ds.object_true;
  if (ds.probe_true) refs.probe = &*ds.probe_true;

  const auto t0 = Clock::now();
  const BlindResult result =
      reconstruct_blind(ds.data, object0, probe0, recon_with_check(cfg), ds.spec, plan, refs);
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  write_tensor(fs::path(cfg.out_dir) / "object_est.tns", result.object);
  write_tensor(fs::path(cfg.out_dir) / "probe_est.tns", result.probe);
  write_trace_csv(fs::path(cfg.out_dir) / "trace.csv", result.trace);
  export_stack_images(fs::path(cfg.out_dir) / "img", "object_est", result.object);
  export_stack_images(fs::path(cfg.out_dir) / "img", "probe_est", result.probe);
  save_checkpoint(fs::path(cfg.out_dir) / "checkpoint", result, cfg);

  json summary;
  summary["scenario"] = "recon-blind";
  summary["runtime_ms"] = ms;
  summary["initial_objective"] = result.trace.initial_objective;
  summary["final"] = final_row_json(result.trace);
  if (ds.object_true) {
    summary["final"]["object_rel_err_raw"] = relative_error(result.object, *ds.object_true, false);
    summary["final"]["object_rel_err_aligned"] =
        relative_error(result.object, *ds.object_true, true);
  }
  if (ds.probe_true) {
    summary["final"]["probe_rel_err_aligned"] = relative_error(result.probe, *ds.probe_true, true);
  }
  if (cfg.recon.alpha_t > 0.0 && cfg.recon.beta_t > 0.0 && !result.outer.empty()) {
    const RateCertificate cert = rate_certificate(result, cfg.recon, ds.spec, plan);
    summary["rate_certificate"] = {{"min_stat", cert.min_stat}, {"bound", cert.bound}, {"holds", cert.holds()}};
  }
  if (!result.outer.empty()) {
    summary["first_object_bound"] = result.outer.front().object_bound;
    summary["first_probe_bound"] = result.outer.front().probe_bound;
  }
  write_json(fs::path(cfg.out_dir) / "summary.json", summary);
  std::cout << "recon-blind: " << result.trace.rows.size() << " subiterations in " << ms / 1000.0
            << " s -> " << cfg.out_dir << "\n";
  return 0;
}

int run_pim(const ExperimentConfig& cfg) {
  const Dataset ds = obtain_dataset(cfg);
  const ScaledDftPlan plan(ds.data.side, ds.spec);
  const BlockVector object0 = BlockVector::filled(ds.spec.count(), ds.data.side, cplx(1.0, 0.0));
  BlockVector probe0(ds.spec.count(), ds.data.side);
  if (cfg.pim.blind) {
    probe0 = stepped_disk_probe(ds.data.side, ds.support, ds.spec.count());
  } else {
    if (!ds.probe_true) throw std::runtime_error("non-blind pim requires probe_true.tns in the dataset");
    probe0 = *ds.probe_true;
  }

  ErrorRefs refs;
  if (ds.object_true) refs.object = &*ds.object_true;

  const auto t0 = Clock::now();
  const PimResult result = pim_reconstruct(ds.data, object0, probe0, cfg.pim, ds.spec, plan, refs);
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

  write_tensor(fs::path(cfg.out_dir) / "object_est.tns", result.object);
  if (cfg.pim.blind) write_tensor(fs::path(cfg.out_dir) / "probe_est.tns", result.probe);
  write_trace_csv(fs::path(cfg.out_dir) / "trace.csv", result.trace);
  export_stack_images(fs::path(cfg.out_dir) / "img", "object_est", result.object);

  json summary;
  summary["scenario"] = "pim";
  summary["alpha"] = cfg.pim.alpha;
  summary["blind"] = cfg.pim.blind;
  summary["runtime_ms"] = ms;
  summary["initial_objective"] = result.trace.initial_objective;
  summary["final"] = final_row_json(result.trace);
  write_json(fs::path(cfg.out_dir) / "summary.json", summary);
  std::cout << "pim(alpha=" << cfg.pim.alpha << "): " << result.trace.rows.size() << " sweeps in "
            << ms / 1000.0 << " s -> " << cfg.out_dir << "\n";
  return 0;
}

int run_single(ExperimentConfig cfg);  // forward declaration

int run_suite_nonblind(const ExperimentConfig& cfg) {
  const fs::path root(cfg.out_dir);
  ExperimentConfig sim = cfg;
  sim.scenario = "simulate";
  sim.out_dir = (root / "dataset").string();
  if (int rc = run_single(sim); rc != 0) return rc;

  struct Variant {
    const char* name;
    bool smooth;
    bool backtrack;
    bool pim;
    double pim_alpha;
  };
  const Variant variants[] = {
      {"af-const", false, false, false, 0.0},
      {"af-smooth", true, false, false, 0.0},
      {"af-smooth-aga", true, true, false, 0.0},
      {"pim-1.0", false, false, true, 1.0},
  };

  std::vector<fs::path> traces;
  for (const Variant& v : variants) {
    ExperimentConfig run = cfg;
    run.input_dir = sim.out_dir;
    run.out_dir = (root / v.name).string();
    if (v.pim) {
      run.scenario = "pim";
      run.pim.alpha = v.pim_alpha;
      run.pim.blind = false;
      run.pim.sweeps = cfg.pim.sweeps;
    } else {
      run.scenario = "recon-object";
      run.recon.alpha_s = v.smooth ? cfg.recon.alpha_s : 0.0;
      run.recon.use_backtracking = v.backtrack;
    }
    if (int rc = run_single(run); rc != 0) return rc;
    traces.push_back(fs::path(run.out_dir) / "trace.csv");
  }
  return run_report(traces, 0, root / "report");
}

int run_suite_blind(const ExperimentConfig& cfg) {
  const fs::path root(cfg.out_dir);
  ExperimentConfig sim = cfg;
  sim.scenario = "simulate";
  sim.out_dir = (root / "dataset").string();
  if (int rc = run_single(sim); rc != 0) return rc;

  std::vector<fs::path> traces;
  {
    ExperimentConfig run = cfg;
    run.scenario = "recon-blind";
    run.input_dir = sim.out_dir;
    run.out_dir = (root / "af-blind").string();
    if (int rc = run_single(run); rc != 0) return rc;
    traces.push_back(fs::path(run.out_dir) / "trace.csv");
  }
  for (double alpha : {0.1, 1.0}) {
    ExperimentConfig run = cfg;
    run.scenario = "pim";
    run.input_dir = sim.out_dir;
    run.pim.alpha = alpha;
    run.pim.blind = true;
    run.pim.sweeps = cfg.pim.sweeps;
    std::ostringstream name;
    name << "pim-" << alpha;
    run.out_dir = (root / name.str()).string();
    if (int rc = run_single(run); rc != 0) return rc;
    traces.push_back(fs::path(run.out_dir) / "trace.csv");
  }
  return run_report(traces, 0, root / "report");
}

int run_single(ExperimentConfig cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "config.resolved", serialize_config(cfg));

  try {
    if (cfg.scenario == "simulate") return run_simulate(cfg);
    if (cfg.scenario == "recon-object") return run_recon_object(cfg);
    if (cfg.scenario == "recon-window") return run_recon_window(cfg);
    if (cfg.scenario == "recon-blind") return run_recon_blind(cfg);
    if (cfg.scenario == "pim") return run_pim(cfg);
    if (cfg.scenario == "suite-nonblind") return run_suite_nonblind(cfg);
    if (cfg.scenario == "suite-blind") return run_suite_blind(cfg);
  } catch (const CertificateError& err) {
    write_trace_csv(fs::path(cfg.out_dir) / "trace.csv", err.trace);
    std::cerr << "certificate violation: " << err.what() << "\n"
              << "partial trace dumped to " << (fs::path(cfg.out_dir) / "trace.csv").string() << "\n";
    return 3;
  }
  throw std::invalid_argument("unknown scenario: " + cfg.scenario);
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
  try {
    set_max_threads(cfg.threads);
    return run_single(cfg);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

int run_report(const std::vector<fs::path>& traces, int skip_first, const fs::path& out_dir) {
  if (traces.empty()) throw std::invalid_argument("report: no trace files given");

  struct Entry {
    std::string label;
    RunTrace trace;
  };
  std::vector<Entry> entries;
  for (const fs::path& p : traces) {
    Entry e;
    e.label = p.stem() == "trace" ? p.parent_path().filename().string() : p.stem().string();
    e.trace = read_trace_csv(p);
    if (e.trace.rows.empty()) throw std::runtime_error("report: empty trace " + p.string());
    entries.push_back(std::move(e));
  }

  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.trace.rows.back().objective < b.trace.rows.back().objective;
  });

  fs::create_directories(out_dir);
  std::ofstream table(out_dir / "summary_table.csv", std::ios::trunc);
  table.precision(17);
  table << "label,rows,final_outer,final_objective,final_data_loss,final_grad_sq,"
           "final_rel_err_raw,final_rel_err_aligned,min_objective,min_grad_sq,wall_ms\n";

  std::cout << "report (" << entries.size() << " runs, skip_first=" << skip_first << "):\n";
  for (const Entry& e : entries) {
    const TraceRow& last = e.trace.rows.back();
    double min_obj = std::numeric_limits<double>::infinity();
    double min_grad = std::numeric_limits<double>::infinity();
    for (const TraceRow& r : e.trace.rows) {
      if (r.outer <= skip_first) continue;
      min_obj = std::min(min_obj, r.objective);
      min_grad = std::min(min_grad, r.grad_sq);
    }
    table << e.label << ',' << e.trace.rows.size() << ',' << last.outer << ',' << last.objective
          << ',' << last.data_loss << ',' << last.grad_sq << ',' << last.rel_err_raw << ','
          << last.rel_err_aligned << ',' << min_obj << ',' << min_grad << ',' << last.wall_ms << '\n';
    std::cout << "  " << e.label << ": final objective " << last.objective << ", data loss "
              << last.data_loss;
    if (std::isfinite(last.rel_err_aligned)) std::cout << ", aligned error " << last.rel_err_aligned;
    std::cout << "\n";
  }
  if (!table) throw std::runtime_error("write failed: summary_table.csv");

  std::ofstream merged(out_dir / "merged.csv", std::ios::trunc);
  merged.precision(17);
  merged << "label,outer,sub,variable,objective,data_loss,grad_sq,step,rel_err_raw,rel_err_aligned,"
            "wall_ms\n";
  for (const Entry& e : entries) {
    for (const TraceRow& r : e.trace.rows) {
      if (r.outer <= skip_first) continue;
      merged << e.label << ',' << r.outer << ',' << r.sub << ',' << r.variable << ',' << r.objective
             << ',' << r.data_loss << ',' << r.grad_sq << ',' << r.step << ',' << r.rel_err_raw
             << ',' << r.rel_err_aligned << ',' << r.wall_ms << '\n';
    }
  }
  if (!merged) throw std::runtime_error("write failed: merged.csv");
  return 0;
}

}  // namespace ptycho
