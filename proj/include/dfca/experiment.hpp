#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfca/config.hpp"
#include "dfca/metrics.hpp"

namespace dfca {

class DisconnectedGraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentResult {
  std::vector<RoundMetrics> trace;
  bool connected = true;
  int stabilization_round = 0;
  int k = 0;
};

/// Everything a run needs before round 0, built from one master seed.
struct ExperimentSetup {
  Topology topology;
  MixingMatrix mixing;
  std::vector<ClientState> states;
  Evaluation eval;
};

ExperimentSetup build_setup(const ExperimentConfig& cfg, std::uint64_t master_seed);

/// Runs cfg.rounds rounds of the configured algorithm. Deterministic per
/// (cfg, master_seed) and independent of the thread count.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::uint64_t master_seed,
                                Execution exec = Execution::parallel);

void write_trace_csv(const std::filesystem::path& path, const ExperimentResult& result);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};
MeanStd mean_std(const std::vector<double>& values);

/// Outcome of cmd_run: where things went and the per-seed final test accuracy.
struct RunOutput {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> traces;
  std::filesystem::path summary;
  std::vector<double> final_test_accuracy;
};

/// Runs seeds cfg.seed + 0 .. cfg.seed + n_seeds - 1 and writes
/// <root>/<name>/seed_<s>/trace.csv plus <root>/<name>/summary.json.
/// The root is cfg.output_dir unless DFCA_OUTPUT_ROOT is set.
RunOutput cmd_run(const ExperimentConfig& cfg, Execution exec = Execution::parallel);

/// One cmd_run per value under <root>/<name>/<key>=<value>/, then a combined
/// <root>/<name>/sweep_<key>.csv with columns value,mean,std of final test accuracy.
std::filesystem::path cmd_sweep(const ExperimentConfig& cfg, const std::string& key,
                                 const std::vector<std::string>& values, Execution exec = Execution::parallel);

std::filesystem::path output_root(const ExperimentConfig& cfg);

}  // namespace dfca
