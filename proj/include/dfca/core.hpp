#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfca/dataset.hpp"
#include "dfca/model.hpp"
#include "dfca/topology.hpp"

namespace dfca {

enum class InitMode { global, local };
enum class AggregationMode { batch, sequential };
enum class Execution { serial, parallel };

const char* to_string(InitMode m);
const char* to_string(AggregationMode m);
InitMode parse_init_mode(const std::string& s);
AggregationMode parse_aggregation_mode(const std::string& s);

/// The one model a client publishes in a round: its freshly trained copy
/// of its assigned cluster.
struct Outbox {
  int cluster = 0;
  FlatParams params;
};

/// Everything one client holds: k model copies, its current assignment,
/// its training data and what it sends this round.
struct ClientState {
  int client_id = 0;
  ModelShape shape;
  std::vector<FlatParams> models;
  int assignment = 0;
  Dataset data;
  std::optional<Outbox> outbox;

  int k() const { return static_cast<int>(models.size()); }
};

/// Builds n clients holding k models each and assigns every client with
/// assign_cluster. GI draws one shared model per cluster; LI gives each
/// client its own draws. Seeds follow derive_seed(seed, 0, j) for GI and
/// derive_seed(seed, 1 + i, j) for LI.
std::vector<ClientState> initialize(int k, InitMode mode, const ModelShape& shape, std::uint64_t seed,
                                    std::vector<Dataset> train_sets);

/// Per-cluster training losses of one client.
std::vector<double> cluster_losses(const ClientState& c);

/// Argmin over clusters of the training loss; ties go to the lowest index.
/// Non-finite losses are skipped; if every loss is non-finite the previous
/// assignment is kept. Updates c.assignment and returns it.
int assign_cluster(ClientState& c);
int assign_from_losses(std::span<const double> losses, int previous);

/// Trains the assigned model with sgd_epochs and fills the outbox. Every
/// other model is left untouched.
void local_update(ClientState& c, const SgdConfig& sgd, std::uint64_t seed);

/// Neighbors of client i currently assigned to cluster j, sorted.
std::vector<int> neighborhood_split(std::span<const ClientState> states, const Topology& t, int i, int j);

/// reporters[i][j]: neighbors of i whose outbox carries cluster j, sorted.
using Reporters = std::vector<std::vector<std::vector<int>>>;
Reporters collect_reporters(std::span<const ClientState> states, const Topology& t);

/// How a receiver folds incoming models in. `flipped` swaps the running
/// average weights and exists only to check that the verifier catches it.
enum class SequentialWeights { running_average, flipped };

struct AggregationOptions {
  /// Null selects the per-cluster uniform rule 1/(|N_ij|+1). A metropolis
  /// matrix selects θ_i += Σ_m w_im (θ_m − θ_i) over reporting neighbors.
  const MixingMatrix* mixing = nullptr;
  /// Per-client flag; empty means every client merges.
  std::vector<char> receives;
  Execution execution = Execution::parallel;
  SequentialWeights weights = SequentialWeights::running_average;
};

/// Synchronous neighbor averaging of every cluster's model, computed from
/// the pre-round snapshot of outboxes.
void aggregate_batch(std::vector<ClientState>& states, const Topology& t, const AggregationOptions& opts = {});

/// arrival[i][j] is the order in which client i merges the cluster-j
/// models it receives; it must permute the reporting neighbor set.
void aggregate_sequential(std::vector<ClientState>& states, const Topology& t,
                          const std::vector<std::vector<std::vector<int>>>& arrival,
                          const AggregationOptions& opts = {});

/// Running average merge of `incoming` into `own`, one arrival at a time.
void merge_running_average(std::span<double> own, std::span<const FlatParams* const> incoming,
                           SequentialWeights weights = SequentialWeights::running_average);

struct Hyperparams {
  SgdConfig sgd;
  Execution execution = Execution::parallel;
};

/// One round's schedule. Per-round randomness is derived from round_seed:
/// derive_seed(round_seed, 1, i) for client i's minibatches and
/// derive_seed(round_seed, 2, i, j) for the arrival order at (i, j).
struct RoundPlan {
  std::vector<char> participants;
  AggregationMode mode = AggregationMode::sequential;
  MixingKind mixing = MixingKind::paper_uniform;
  bool receive_nonparticipants = true;
  std::uint64_t round_seed = 0;

  static RoundPlan everyone(int n);
};

/// Draws participants as a seeded subset of round(fraction·n) clients (at least one).
std::vector<char> sample_participants(int n, double fraction, std::uint64_t seed);

/// Seeded arrival permutations for every (receiver, cluster).
std::vector<std::vector<std::vector<int>>> draw_arrival_orders(const Reporters& reporters, std::uint64_t round_seed);

/// Side effects of one round that metrics needs but cannot recover afterwards.
struct RoundOutcome {
  int assignments_changed = 0;
  std::vector<double> avg_drift;
};

/// Network averages θ̄_j over all clients, one vector per cluster.
std::vector<FlatParams> network_averages(std::span<const ClientState> states);

/// Assignment, local update and aggregation for every participant.
/// Non-participants keep their models and assignment, send nothing and
/// (unless the plan says otherwise) still merge what they receive.
RoundOutcome run_round(std::vector<ClientState>& states, const Topology& t, const MixingMatrix& mixing,
                       const RoundPlan& plan, const Hyperparams& hp);

namespace reference {

/// Serial, loop-for-loop transcription of one round, kept to check the
/// parallel kernels against.
RoundOutcome run_round(std::vector<ClientState>& states, const Topology& t, const MixingMatrix& mixing,
                       const RoundPlan& plan, const Hyperparams& hp);

}  // namespace reference

}  // namespace dfca
