// Command-line front end: run, sweep and verify.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "dfca/experiment.hpp"
#include "dfca/verify.hpp"

namespace {

dfca::ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  auto cfg = dfca::load_config(path);
  dfca::apply_overrides(cfg, overrides);
  dfca::validate(cfg);
  return cfg;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const dfca::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const dfca::DisconnectedGraphError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized federated clustering simulator"};
  app.require_subcommand(1);

  bool serial = false;
  app.add_flag("--serial", serial, "Run client loops on one thread");

  std::string config_path;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "Run an experiment config over n_seeds seeds");
  run->add_option("config", config_path, "Config file (key=value lines)")->required();
  run->add_option("--set", overrides, "Override a config key (key=value)");

  std::string sweep_key;
  std::vector<std::string> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Run a config once per value of one numeric key");
  sweep->add_option("config", config_path, "Config file (key=value lines)")->required();
  sweep->add_option("--key", sweep_key, "Config key to sweep")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--set", overrides, "Override a config key (key=value)");

  bool inject_fault = false;
  auto* verify = app.add_subcommand("verify", "Run the invariant suite");
  verify->add_flag("--inject-fault", inject_fault, "Swap the running-average weights (self-test of the suite)");

  CLI11_PARSE(app, argc, argv);
  const auto exec = serial ? dfca::Execution::serial : dfca::Execution::parallel;

  if (*run) {
    return guarded([&] {
      const auto out = dfca::cmd_run(load(config_path, overrides), exec);
      std::cout << "wrote " << out.traces.size() << " traces and " << out.summary.string() << '\n';
      return 0;
    });
  }
  if (*sweep) {
    return guarded([&] {
      const auto path = dfca::cmd_sweep(load(config_path, overrides), sweep_key, sweep_values, exec);
      std::cout << "wrote " << path.string() << '\n';
      return 0;
    });
  }
  if (*verify) {
    return guarded([&] {
      const auto results = dfca::run_property_suite({.inject_fault = inject_fault});
      int failed = 0;
      for (const auto& r : results) {
        std::printf("[%s] %s (%.2fs)%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                    r.detail.empty() ? "" : ": ", r.detail.c_str());
        failed += r.passed ? 0 : 1;
      }
      std::printf("%zu properties, %d failed\n", results.size(), failed);
      return failed == 0 ? 0 : 1;
    });
  }
  return 0;
}
