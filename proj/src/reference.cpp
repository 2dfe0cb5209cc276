// Serial reference for one round. Written straight from the update rules
// with no shared kernels beyond the model math, so the parallel path in
// core.cpp can be checked against it.

#include <cmath>
#include <limits>

#include "dfca/core.hpp"
#include "dfca/seed.hpp"

namespace dfca::reference {

RoundOutcome run_round(std::vector<ClientState>& states, const Topology& t, const MixingMatrix& mixing,
                       const RoundPlan& plan, const Hyperparams& hp) {
  const std::size_t n = states.size();
  const std::size_t k = states.front().models.size();
  RoundOutcome out;

  for (std::size_t i = 0; i < n; ++i) {
    auto& c = states[i];
    c.outbox.reset();
    if (!plan.participants[i]) continue;

    int best = c.assignment;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const double loss = forward_loss(c.shape, c.models[j], c.data);
      if (std::isfinite(loss) && loss < best_loss) {
        best_loss = loss;
        best = static_cast<int>(j);
      }
    }
    if (best != c.assignment) ++out.assignments_changed;
    c.assignment = best;

    auto& theta = c.models[static_cast<std::size_t>(best)];
    theta = sgd_epochs(c.shape, theta, c.data, hp.sgd, derive_seed(plan.round_seed, 1, i));
    c.outbox = Outbox{best, theta};
  }

  // Frozen copy of what every client holds after local training.
  std::vector<std::vector<FlatParams>> snapshot(n);
  for (std::size_t i = 0; i < n; ++i) snapshot[i] = states[i].models;

  std::vector<std::vector<std::vector<int>>> reporters(n, std::vector<std::vector<int>>(k));
  for (std::size_t i = 0; i < n; ++i) {
    for (int m : t.neighbors(static_cast<int>(i))) {
      const auto& box = states[static_cast<std::size_t>(m)].outbox;
      if (box) reporters[i][static_cast<std::size_t>(box->cluster)].push_back(m);
    }
  }
  const auto arrival = plan.mode == AggregationMode::sequential ? draw_arrival_orders(reporters, plan.round_seed)
                                                                 : reporters;

  for (std::size_t i = 0; i < n; ++i) {
    if (!plan.receive_nonparticipants && !plan.participants[i]) continue;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& from = arrival[i][j];
      if (from.empty()) continue;
      auto& theta = states[i].models[j];
      const auto& self = snapshot[i][j];
      for (std::size_t x = 0; x < theta.size(); ++x) {
        if (plan.mixing == MixingKind::metropolis) {
          double self_weight = 1.0;
          double acc = 0.0;
          for (int m : from) {
            const double w = mixing(static_cast<int>(i), m);
            self_weight -= w;
            acc += w * snapshot[static_cast<std::size_t>(m)][j][x];
          }
          theta[x] = self_weight * self[x] + acc;
        } else if (plan.mode == AggregationMode::batch) {
          double sum = self[x];
          for (int m : from) sum += snapshot[static_cast<std::size_t>(m)][j][x];
          theta[x] = sum / static_cast<double>(from.size() + 1);
        } else {
          double value = self[x];
          int r = 0;
          for (int m : from) {
            r += 1;
            value = (r / (r + 1.0)) * value + (1.0 / (r + 1.0)) * snapshot[static_cast<std::size_t>(m)][j][x];
          }
          theta[x] = value;
        }
      }
    }
  }

  for (std::size_t j = 0; j < k; ++j) {
    double sq = 0.0;
    for (std::size_t x = 0; x < snapshot[0][j].size(); ++x) {
      double before = 0.0;
      double after = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        before += snapshot[i][j][x];
        after += states[i].models[j][x];
      }
      const double d = (after - before) / static_cast<double>(n);
      sq += d * d;
    }
    out.avg_drift.push_back(std::sqrt(sq));
  }
  return out;
}

}  // namespace dfca::reference
