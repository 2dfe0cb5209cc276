#pragma once

#include <cstdint>
#include <vector>

#include "dfca/core.hpp"

namespace dfca {

/// Global per-cluster models held by the IFCA server.
struct CentralServerState {
  std::vector<FlatParams> models;
};

/// One IFCA round with full participation. Every client receives all k
/// server models, assigns itself by training loss and trains its assigned
/// model; the server replaces model j with the unweighted mean of the
/// returned models assigned to j, or keeps it if nobody picked j.
/// On return every client holds the new server models.
RoundOutcome ifca_round(CentralServerState& server, std::vector<ClientState>& clients, const Hyperparams& hp,
                        std::uint64_t round_seed);

/// Decentralized averaging of a single shared model: a DFCA round with k = 1.
RoundOutcome decentralized_avg_round(std::vector<ClientState>& states, const Topology& t, const MixingMatrix& mixing,
                                     const RoundPlan& plan, const Hyperparams& hp);

}  // namespace dfca
