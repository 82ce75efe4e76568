#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "oracles.hpp"
#include "ptycho/experiment.hpp"
#include "ptycho/io.hpp"
#include "ptycho/recon.hpp"

using namespace ptycho;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ptychoaf_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.side = 16;
  m.lambda = {1.0, 1.25};
  m.weights = {0.4, 0.6};
  m.support = 6;
  m.spacing = 1.2;
  m.photons = 0.0;
  m.seed = 5;
  return m;
}

}  // namespace

TEST_CASE("config text round-trips through parse and serialize") {
  ExperimentConfig cfg = preset_config("desk-blind");
  cfg.model.seed = 123;
  cfg.recon.kappa = {0.5, 1.5};
  const std::string text = serialize_config(cfg);
  const ExperimentConfig back = parse_config_text(text);
  CHECK(back.scenario == cfg.scenario);
  CHECK(back.model.side == cfg.model.side);
  CHECK(back.model.seed == 123);
  CHECK(back.recon.kappa == cfg.recon.kappa);
  CHECK(back.recon.outer_iters == cfg.recon.outer_iters);
  CHECK(back.pim.blind == cfg.pim.blind);
  CHECK(serialize_config(back) == text);
}

TEST_CASE("unknown config keys are rejected") {
  CHECK_THROWS_AS(parse_config_text("[model]\nbogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[nosuch]\nn = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[model]\nn 32\n"), std::invalid_argument);
}

TEST_CASE("environment overrides change single keys") {
  ExperimentConfig cfg = preset_config("desk-blind");
  const int before = cfg.model.side;
  setenv("PTYCHO_MODEL_N", "24", 1);
  setenv("PTYCHO_RECON_OUTER", "3", 1);
  apply_env_overrides(cfg);
  unsetenv("PTYCHO_MODEL_N");
  unsetenv("PTYCHO_RECON_OUTER");
  CHECK(cfg.model.side == 24);
  CHECK(cfg.model.side != before);
  CHECK(cfg.recon.outer_iters == 3);
}

TEST_CASE("presets resolve and validate") {
  for (const std::string& name : preset_names()) {
    const ExperimentConfig cfg = preset_config(name);
    CHECK_NOTHROW(cfg.validate());
  }
  CHECK_THROWS_AS(preset_config("nope"), std::invalid_argument);
}

TEST_CASE("tensor dumps round-trip bit-exactly") {
  Rng rng(401);
  const BlockVector stack = oracle::random_stack(rng, 3, 8);
  const fs::path dir = temp_dir("tensor");
  write_tensor(dir / "t.tns", stack);
  const BlockVector back = read_tensor(dir / "t.tns");
  REQUIRE(back.same_shape(stack));
  for (std::size_t i = 0; i < stack.size(); ++i) CHECK(back[i] == stack[i]);

  std::vector<double> values(2 * 9);
  for (auto& v : values) v = rng.uniform(0.0, 3.0);
  write_real_tensor(dir / "r.tns", values, 2, 3);
  const RealTensor rt = read_real_tensor(dir / "r.tns");
  CHECK(rt.count == 2);
  CHECK(rt.side == 3);
  for (std::size_t i = 0; i < values.size(); ++i) CHECK(rt.values[i] == values[i]);

  // complex reader refuses a real file and vice versa
  CHECK_THROWS_AS(read_tensor(dir / "r.tns"), std::runtime_error);
  CHECK_THROWS_AS(read_real_tensor(dir / "t.tns"), std::runtime_error);
}

TEST_CASE("trace CSV round-trips") {
  RunTrace trace;
  trace.initial_objective = 10.0;
  TraceRow row;
  row.outer = 1;
  row.sub = 2;
  row.variable = 'w';
  row.objective = 3.25;
  row.data_loss = 3.0;
  row.grad_sq = 0.5;
  row.step = 0.01;
  row.rel_err_raw = 0.7;
  row.rel_err_aligned = 0.6;
  row.wall_ms = 12.5;
  trace.rows.push_back(row);
  row.outer = 2;
  row.variable = 'z';
  row.rel_err_raw = std::numeric_limits<double>::quiet_NaN();
  row.rel_err_aligned = std::numeric_limits<double>::quiet_NaN();
  trace.rows.push_back(row);

  const fs::path dir = temp_dir("csv");
  write_trace_csv(dir / "trace.csv", trace);
  const RunTrace back = read_trace_csv(dir / "trace.csv");
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].objective == 3.25);
  CHECK(back.rows[0].variable == 'w');
  CHECK(back.rows[1].variable == 'z');
  CHECK(std::isnan(back.rows[1].rel_err_raw));
}

TEST_CASE("dataset save/load round-trips and reconstruction matches in-memory") {
  const ModelConfig model = tiny_model();
  const Dataset ds = build_dataset(model);
  const fs::path dir = temp_dir("dataset");
  save_dataset(dir, ds, model);
  const Dataset back = load_dataset(dir);

  REQUIRE(back.data.shifts.size() == ds.data.shifts.size());
  for (std::size_t i = 0; i < ds.data.values.size(); ++i)
    CHECK(back.data.values[i] == ds.data.values[i]);
  REQUIRE(back.object_true.has_value());
  REQUIRE(back.probe_true.has_value());

  // reconstruct through both routes; the trajectories must agree bit-exactly
  ReconConfig cfg;
  cfg.outer_iters = 3;
  cfg.alpha_t = 1e-2;
  cfg.alpha_s = 0.1;
  const ScaledDftPlan plan(model.side, ds.spec);
  const BlockVector init = BlockVector::filled(ds.spec.count(), model.side, cplx(1.0, 0.0));
  const NonblindResult mem = reconstruct_object(ds.data, *ds.probe_true, init, cfg, ds.spec, plan);
  const NonblindResult disk =
      reconstruct_object(back.data, *back.probe_true, init, cfg, back.spec, plan);
  for (std::size_t i = 0; i < mem.estimate.size(); ++i)
    CHECK(mem.estimate[i] == disk.estimate[i]);
}

TEST_CASE("simulate scenario is byte-identical across identical invocations") {
  ExperimentConfig cfg;
  cfg.scenario = "simulate";
  cfg.model = tiny_model();
  cfg.model.photons = 1e6;  // exercise the noisy path too

  const fs::path dir = temp_dir("determinism");
  cfg.out_dir = (dir / "run").string();
  REQUIRE(run_experiment(cfg) == 0);

  // collect all bytes, then rerun into the same path and compare
  std::map<std::string, std::vector<char>> first;
  for (const auto& entry : fs::recursive_directory_iterator(cfg.out_dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    first[entry.path().string()] =
        std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  fs::remove_all(cfg.out_dir);
  REQUIRE(run_experiment(cfg) == 0);
  for (const auto& [path, bytes] : first) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    const std::vector<char> again((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    CHECK(bytes == again);
  }
}

TEST_CASE("recon scenarios run end to end and echo their config") {
  const fs::path dir = temp_dir("endtoend");
  ExperimentConfig sim;
  sim.scenario = "simulate";
  sim.model = tiny_model();
  sim.out_dir = (dir / "ds").string();
  REQUIRE(run_experiment(sim) == 0);

  ExperimentConfig rec = sim;
  rec.scenario = "recon-blind";
  rec.input_dir = sim.out_dir;
  rec.out_dir = (dir / "blind").string();
  rec.check = true;
  rec.recon.outer_iters = 4;
  REQUIRE(run_experiment(rec) == 0);
  CHECK(fs::exists(dir / "blind" / "config.resolved"));
  CHECK(fs::exists(dir / "blind" / "trace.csv"));
  CHECK(fs::exists(dir / "blind" / "object_est.tns"));
  CHECK(fs::exists(dir / "blind" / "probe_est.tns"));
  CHECK(fs::exists(dir / "blind" / "checkpoint" / "state.json"));
  CHECK(fs::exists(dir / "blind" / "summary.json"));

  // resuming from the checkpoint continues without error
  ExperimentConfig more = rec;
  more.resume_dir = (dir / "blind" / "checkpoint").string();
  more.out_dir = (dir / "blind2").string();
  more.recon.outer_iters = 2;
  REQUIRE(run_experiment(more) == 0);

  ExperimentConfig window = rec;
  window.scenario = "recon-window";
  window.out_dir = (dir / "window").string();
  window.recon.outer_iters = 3;
  window.resume_dir.clear();
  REQUIRE(run_experiment(window) == 0);
  CHECK(fs::exists(dir / "window" / "probe_est.tns"));
}

TEST_CASE("report summarizes and orders traces") {
  const fs::path dir = temp_dir("report");

  auto write_fake = [&](const std::string& name, double final_objective) {
    RunTrace t;
    for (int i = 1; i <= 5; ++i) {
      TraceRow r;
      r.outer = i;
      r.sub = 1;
      r.variable = 'z';
      r.objective = final_objective + (5 - i);
      r.data_loss = r.objective;
      r.grad_sq = 1.0 / i;
      r.step = 0.1;
      r.wall_ms = i;
      t.rows.push_back(r);
    }
    fs::create_directories(dir / name);
    write_trace_csv(dir / name / "trace.csv", t);
    return dir / name / "trace.csv";
  };

  const fs::path a = write_fake("slow", 3.0);
  const fs::path b = write_fake("fast", 1.0);
  const fs::path c = write_fake("mid", 2.0);

  REQUIRE(run_report({a, b, c}, 2, dir / "out") == 0);
  std::ifstream table(dir / "out" / "summary_table.csv");
  std::string header, l1, l2, l3;
  std::getline(table, header);
  std::getline(table, l1);
  std::getline(table, l2);
  std::getline(table, l3);
  CHECK(l1.substr(0, 4) == "fast");
  CHECK(l2.substr(0, 3) == "mid");
  CHECK(l3.substr(0, 4) == "slow");

  SUBCASE("single trace summary equals its final row") {
    REQUIRE(run_report({b}, 0, dir / "single") == 0);
    std::ifstream t2(dir / "single" / "summary_table.csv");
    std::string h2, row;
    std::getline(t2, h2);
    std::getline(t2, row);
    // final row has outer 5, objective 1.0
    CHECK(row.find("fast,5,5,1,") == 0);
  }

  SUBCASE("empty input errors") {
    CHECK_THROWS_AS(run_report({}, 0, dir / "none"), std::invalid_argument);
  }
}
