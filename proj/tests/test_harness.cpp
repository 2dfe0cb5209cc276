#include <doctest.h>

#include <nlohmann/json.hpp>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dfca/experiment.hpp"
#include "dfca/verify.hpp"

using namespace dfca;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dfca_tests_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_config(const fs::path& root) {
  std::istringstream in(
      "# small and quick\n"
      "n_clients = 6\n"
      "k = 2\n"
      "topology.p = 0.6\n"
      "T = 3\n"
      "tau = 1\n"
      "model.hidden = 4\n"
      "data.samples_per_client = 40\n"
      "topology.on_disconnected = proceed\n");
  auto cfg = parse_config(in, "small");
  cfg.output_dir = root.string();
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DFCA_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream in("name = demo\nk=4 # trailing\n\n# comment\ninit_mode = LI\nmixing_kind = metropolis\n");
  const auto cfg = parse_config(in);
  CHECK(cfg.name == "demo");
  CHECK(cfg.k == 4);
  CHECK(cfg.init_mode == InitMode::local);
  CHECK(cfg.mixing_kind == MixingKind::metropolis);
  CHECK(cfg.n_clients == 20);

  ExperimentConfig c;
  try {
    set_config_value(c, "bogus", "1");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "bogus");
    CHECK(std::string(e.what()).find("unknown config key 'bogus'") != std::string::npos);
  }
  CHECK_THROWS_AS(set_config_value(c, "k", "two"), ConfigError);
  CHECK_THROWS_AS(apply_overrides(c, {"k"}), ConfigError);
  apply_overrides(c, {"gamma=0.05"});
  CHECK(c.gamma == 0.05);

  c.k = 3;
  CHECK_THROWS_AS(validate(c), ConfigError);  // synthetic rotations support k in {1, 2, 4}
  c.k = 2;
  c.participation_fraction = 0.0;
  CHECK_THROWS_AS(validate(c), ConfigError);

  std::istringstream round_trip(to_text(cfg));
  CHECK(to_text(parse_config(round_trip, "demo")) == to_text(cfg));
}

TEST_CASE("run writes one trace per seed and a consistent summary") {
  const auto root = scratch("run");
  auto cfg = small_config(root);
  cfg.n_seeds = 5;
  const auto out = cmd_run(cfg, Execution::parallel);
  REQUIRE(out.traces.size() == 5);
  int csv = 0, json = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "small")) {
    if (e.path().extension() == ".csv") ++csv;
    if (e.path().extension() == ".json") ++json;
  }
  CHECK(csv == 5);
  CHECK(json == 1);

  std::ifstream in(out.summary);
  const auto summary = nlohmann::json::parse(in);
  double sum = 0.0;
  for (const auto& s : summary["seeds"]) sum += s["final_test_acc"].get<double>();
  CHECK(summary["final_test_acc"]["mean"].get<double>() == doctest::Approx(sum / 5.0).epsilon(1e-15));
  CHECK(mean_std(out.final_test_accuracy).mean == doctest::Approx(sum / 5.0).epsilon(1e-15));

  // Trace: header plus T rows.
  std::istringstream trace(slurp(out.traces[0]));
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) ++lines;
  CHECK(lines == 1 + cfg.rounds);
}

TEST_CASE("traces are byte-identical across repeats and thread settings") {
  const auto root = scratch("determinism");
  auto cfg = small_config(root);
  cfg.init_mode = InitMode::local;
  cfg.participation_fraction = 0.5;
  cfg.name = "a";
  const auto a = cmd_run(cfg, Execution::parallel);
  cfg.name = "b";
  const auto b = cmd_run(cfg, Execution::parallel);
  cfg.name = "c";
  const auto c = cmd_run(cfg, Execution::serial);
  CHECK(slurp(a.traces[0]) == slurp(b.traces[0]));
  CHECK(slurp(a.traces[0]) == slurp(c.traces[0]));
  std::ifstream ja(a.summary), jb(b.summary);
  CHECK(nlohmann::json::parse(ja)["seeds"] == nlohmann::json::parse(jb)["seeds"]);
}

TEST_CASE("zero rounds give a header-only trace") {
  const auto root = scratch("zero");
  auto cfg = small_config(root);
  cfg.rounds = 0;
  const auto out = cmd_run(cfg);
  CHECK(slurp(out.traces[0]).find('\n') == slurp(out.traces[0]).size() - 1);
}

TEST_CASE("sweep writes one directory per value and a combined table") {
  const auto root = scratch("sweep");
  auto cfg = small_config(root);
  cfg.n_seeds = 2;
  const std::vector<std::string> values = {"0.3", "0.4", "0.5", "0.6", "0.7"};
  const auto table = cmd_sweep(cfg, "topology.p", values);
  for (const auto& v : values) CHECK(fs::exists(root / "small" / ("topology.p=" + v) / "summary.json"));
  std::istringstream in(slurp(table));
  std::string line;
  std::getline(in, line);
  CHECK(line == "value,mean,std");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);

  // A one-point sweep agrees with a plain run at that value.
  cfg.name = "single";
  cmd_sweep(cfg, "gamma", {"0.1"});
  cfg.name = "plain";
  const auto plain = cmd_run(cfg);
  CHECK(slurp(root / "single" / "gamma=0.1" / "seed_1" / "trace.csv") == slurp(plain.traces[1]));
  CHECK_THROWS_AS(cmd_sweep(cfg, "init_mode", {"GI"}), ConfigError);
}

TEST_CASE("disconnected topologies abort unless told to proceed") {
  const auto root = scratch("disconnected");
  auto cfg = small_config(root);
  cfg.topology_p = 0.0;
  cfg.on_disconnected = DisconnectedPolicy::abort;
  CHECK_THROWS_AS(cmd_run(cfg), DisconnectedGraphError);
  cfg.on_disconnected = DisconnectedPolicy::proceed;
  CHECK_NOTHROW(cmd_run(cfg));
}

TEST_CASE("property suite passes and catches an injected fault") {
  for (const auto& r : run_property_suite()) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
  VerifyOptions bad;
  bad.inject_fault = true;
  bool caught = false;
  for (const auto& r : run_property_suite(bad)) caught = caught || !r.passed;
  CHECK(caught);
}

TEST_CASE("command line exit codes") {
  const auto root = scratch("cli");
  const auto conf = root / "tiny.conf";
  {
    std::ofstream out(conf);
    out << "n_clients = 4\nT = 1\nmodel.hidden = 2\ndata.samples_per_client = 20\ntopology.p = 1\n"
        << "output_dir = " << (root / "runs").string() << "\n";
  }
  const auto log = root / "log.txt";
  CHECK(run_cli("run " + conf.string(), log) == 0);
  CHECK(fs::exists(root / "runs" / "tiny" / "seed_0" / "trace.csv"));

  CHECK(run_cli("run " + conf.string() + " --set bogus=1", log) == 2);
  CHECK(slurp(log).find("bogus") != std::string::npos);

  CHECK(run_cli("run " + conf.string() + " --set topology.p=0", log) == 3);
  CHECK(run_cli("verify", log) == 0);
  CHECK(run_cli("verify --inject-fault", log) != 0);
  CHECK(run_cli("run " + (root / "missing.conf").string(), log) != 0);
}
