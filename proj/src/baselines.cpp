#include "dfca/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dfca/seed.hpp"

namespace dfca {

RoundOutcome ifca_round(CentralServerState& server, std::vector<ClientState>& clients, const Hyperparams& hp,
                        std::uint64_t round_seed) {
  if (server.models.empty()) throw std::invalid_argument("IFCA server holds no models");
  const int n = static_cast<int>(clients.size());
  const std::size_t k = server.models.size();
  std::vector<char> changed(clients.size(), 0);

#pragma omp parallel for schedule(dynamic) if (hp.execution == Execution::parallel)
  for (int i = 0; i < n; ++i) {
    auto& c = clients[static_cast<std::size_t>(i)];
    c.models = server.models;
    const int before = c.assignment;
    assign_cluster(c);
    changed[static_cast<std::size_t>(i)] = c.assignment != before;
    local_update(c, hp.sgd, derive_seed(round_seed, 1, i));
  }

  RoundOutcome out;
  out.assignments_changed = static_cast<int>(std::count(changed.begin(), changed.end(), 1));
  const auto before = network_averages(clients);

  for (std::size_t j = 0; j < k; ++j) {
    FlatParams sum(server.models[j].size(), 0.0);
    int members = 0;
    for (const auto& c : clients) {
      if (static_cast<std::size_t>(c.outbox->cluster) != j) continue;
      for (std::size_t x = 0; x < sum.size(); ++x) sum[x] += c.outbox->params[x];
      ++members;
    }
    if (members == 0) continue;
    for (auto& v : sum) v /= members;
    server.models[j] = std::move(sum);
  }
  for (auto& c : clients) c.models = server.models;

  const auto after = network_averages(clients);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t x = 0; x < after[j].size(); ++x) s += (after[j][x] - before[j][x]) * (after[j][x] - before[j][x]);
    out.avg_drift.push_back(std::sqrt(s));
  }
  return out;
}

RoundOutcome decentralized_avg_round(std::vector<ClientState>& states, const Topology& t, const MixingMatrix& mixing,
                                     const RoundPlan& plan, const Hyperparams& hp) {
  for (const auto& c : states) {
    if (c.k() != 1) throw std::invalid_argument("decentralized averaging expects a single model per client");
  }
  return run_round(states, t, mixing, plan, hp);
}

}  // namespace dfca
