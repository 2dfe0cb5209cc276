#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "dfca/core.hpp"

namespace dfca {

struct RoundMetrics {
  int round = 0;
  double f_global = 0.0;
  std::vector<double> f_cluster;
  std::vector<double> disp;
  double clustering_accuracy = 0.0;
  double test_accuracy = 0.0;
  /// Unweighted mean over clients of per-client test accuracy.
  double test_accuracy_client_mean = 0.0;
  std::vector<double> avg_drift;
  int assignments_changed = 0;

  bool operator==(const RoundMetrics&) const = default;
};

/// Σ over clients assigned to j of their training loss under model j.
double f_cluster(std::span<const ClientState> states, int j);

/// (1/N) Σ_i ||θ_ij − θ̄_j||² over every client's copy of model j.
double dispersion(std::span<const ClientState> states, int j);

/// Best match rate between predicted and true cluster labels over all
/// relabelings of the predictions.
double clustering_accuracy(std::span<const int> assignments, std::span<const int> truth, int k);
double clustering_accuracy(std::span<const ClientState> states, std::span<const int> truth);

struct TestAccuracy {
  double sample_weighted = 0.0;
  double client_mean = 0.0;
};

/// Each client scores its assigned model on its own test set.
TestAccuracy test_accuracy(std::span<const ClientState> states, std::span<const Dataset> test_sets);

/// Held-out data and ground truth used for scoring a round.
struct Evaluation {
  std::vector<Dataset> test_sets;
  std::vector<int> truth;
};

RoundMetrics compute_round_metrics(std::span<const ClientState> states, const Evaluation& eval, int round,
                                   const RoundOutcome& outcome, Execution exec = Execution::parallel);

/// Column header of the per-round trace for k clusters.
void write_trace_header(std::ostream& os, int k);
void write_trace_row(std::ostream& os, const RoundMetrics& m);

/// First round after which no assignment changes for the rest of the
/// trace. Equals trace.size() if the last round still changed something.
int stabilization_round(std::span<const RoundMetrics> trace);

/// Shortest-round-trip decimal rendering used in every output file.
std::string format_double(double v);

}  // namespace dfca
