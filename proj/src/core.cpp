#include "dfca/core.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "dfca/seed.hpp"

namespace dfca {

const char* to_string(InitMode m) { return m == InitMode::global ? "GI" : "LI"; }
const char* to_string(AggregationMode m) { return m == AggregationMode::batch ? "batch" : "sequential"; }

InitMode parse_init_mode(const std::string& s) {
  if (s == "GI") return InitMode::global;
  if (s == "LI") return InitMode::local;
  throw std::invalid_argument("unknown init mode '" + s + "' (expected GI or LI)");
}

AggregationMode parse_aggregation_mode(const std::string& s) {
  if (s == "batch") return AggregationMode::batch;
  if (s == "sequential") return AggregationMode::sequential;
  throw std::invalid_argument("unknown aggregation mode '" + s + "' (expected batch or sequential)");
}

std::vector<ClientState> initialize(int k, InitMode mode, const ModelShape& shape, std::uint64_t seed,
                                    std::vector<Dataset> train_sets) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  if (train_sets.empty()) throw std::invalid_argument("need at least one client");
  const int n = static_cast<int>(train_sets.size());
  std::vector<FlatParams> shared;
  if (mode == InitMode::global) {
    for (int j = 0; j < k; ++j) shared.push_back(init_params(shape, derive_seed(seed, 0, j)));
  }
  std::vector<ClientState> states(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& c = states[static_cast<std::size_t>(i)];
    c.client_id = i;
    c.shape = shape;
    c.data = std::move(train_sets[static_cast<std::size_t>(i)]);
    if (mode == InitMode::global) {
      c.models = shared;
    } else {
      for (int j = 0; j < k; ++j) {
        c.models.push_back(init_params(shape, derive_seed(seed, static_cast<std::uint64_t>(1 + i), j)));
      }
    }
    assign_cluster(c);
  }
  return states;
}

std::vector<double> cluster_losses(const ClientState& c) {
  std::vector<double> losses;
  losses.reserve(c.models.size());
  for (const auto& m : c.models) losses.push_back(forward_loss(c.shape, m, c.data));
  return losses;
}

int assign_from_losses(std::span<const double> losses, int previous) {
  int best = -1;
  for (std::size_t j = 0; j < losses.size(); ++j) {
    if (!std::isfinite(losses[j])) continue;
    if (best < 0 || losses[j] < losses[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  }
  return best < 0 ? previous : best;
}

int assign_cluster(ClientState& c) {
  const auto losses = cluster_losses(c);
  const int next = assign_from_losses(losses, c.assignment);
  if (std::none_of(losses.begin(), losses.end(), [](double v) { return std::isfinite(v); })) {
    std::clog << "warning: client " << c.client_id << " has no finite cluster loss; keeping assignment "
              << c.assignment << '\n';
  }
  c.assignment = next;
  return next;
}

void local_update(ClientState& c, const SgdConfig& sgd, std::uint64_t seed) {
  auto& theta = c.models.at(static_cast<std::size_t>(c.assignment));
  theta = sgd_epochs(c.shape, std::move(theta), c.data, sgd, seed);
  c.outbox = Outbox{c.assignment, theta};
}

std::vector<int> neighborhood_split(std::span<const ClientState> states, const Topology& t, int i, int j) {
  std::vector<int> out;
  for (int m : t.neighbors(i)) {
    if (states[static_cast<std::size_t>(m)].assignment == j) out.push_back(m);
  }
  return out;
}

Reporters collect_reporters(std::span<const ClientState> states, const Topology& t) {
  const int n = t.n_clients();
  if (static_cast<int>(states.size()) != n) throw std::invalid_argument("state count does not match topology");
  const int k = states.front().k();
  Reporters out(static_cast<std::size_t>(n), std::vector<std::vector<int>>(static_cast<std::size_t>(k)));
  for (int i = 0; i < n; ++i) {
    for (int m : t.neighbors(i)) {
      const auto& box = states[static_cast<std::size_t>(m)].outbox;
      if (box) out[static_cast<std::size_t>(i)].at(static_cast<std::size_t>(box->cluster)).push_back(m);
    }
  }
  return out;
}

void merge_running_average(std::span<double> own, std::span<const FlatParams* const> incoming,
                           SequentialWeights weights) {
  double count = 1.0;
  for (const FlatParams* in : incoming) {
    count += 1.0;
    const double keep = weights == SequentialWeights::running_average ? (count - 1.0) / count : 1.0 / count;
    const double take = weights == SequentialWeights::running_average ? 1.0 / count : (count - 1.0) / count;
    for (std::size_t x = 0; x < own.size(); ++x) own[x] = keep * own[x] + take * (*in)[x];
  }
}

namespace {

bool receives(const AggregationOptions& opts, int i) {
  return opts.receives.empty() || opts.receives[static_cast<std::size_t>(i)] != 0;
}

void check_mixing(const AggregationOptions& opts, const Topology& t) {
  if (opts.mixing == nullptr) return;
  if (opts.mixing->kind != MixingKind::metropolis || opts.mixing->n != t.n_clients()) {
    throw std::invalid_argument("aggregation expects a metropolis matrix matching the topology");
  }
}

// θ_i + Σ_m w_im (θ_m − θ_i), with θ_i the pre-merge value and m in `order`.
void merge_metropolis(std::span<double> own, int i, std::span<const int> order,
                      std::span<const ClientState> states, const MixingMatrix& w) {
  for (std::size_t x = 0; x < own.size(); ++x) {
    const double base = own[x];
    double delta = 0.0;
    for (int m : order) delta += w(i, m) * ((*states[static_cast<std::size_t>(m)].outbox).params[x] - base);
    own[x] = base + delta;
  }
}

template <class Body>
void for_each_client(int n, Execution exec, Body&& body) {
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) body(i);
  } else {
    for (int i = 0; i < n; ++i) body(i);
  }
}

}  // namespace

void aggregate_batch(std::vector<ClientState>& states, const Topology& t, const AggregationOptions& opts) {
  check_mixing(opts, t);
  const auto reporters = collect_reporters(states, t);
  const int n = t.n_clients();
  for_each_client(n, opts.execution, [&](int i) {
    if (!receives(opts, i)) return;
    auto& me = states[static_cast<std::size_t>(i)];
    for (int j = 0; j < me.k(); ++j) {
      const auto& from = reporters[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (from.empty()) continue;
      auto& own = me.models[static_cast<std::size_t>(j)];
      if (opts.mixing != nullptr) {
        merge_metropolis(own, i, from, states, *opts.mixing);
        continue;
      }
      const double scale = 1.0 / static_cast<double>(from.size() + 1);
      for (std::size_t x = 0; x < own.size(); ++x) {
        double sum = own[x];
        for (int m : from) sum += (*states[static_cast<std::size_t>(m)].outbox).params[x];
        own[x] = sum * scale;
      }
    }
  });
}

void aggregate_sequential(std::vector<ClientState>& states, const Topology& t,
                          const std::vector<std::vector<std::vector<int>>>& arrival,
                          const AggregationOptions& opts) {
  check_mixing(opts, t);
  const auto reporters = collect_reporters(states, t);
  const int n = t.n_clients();
  for (int i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < reporters[static_cast<std::size_t>(i)].size(); ++j) {
      auto order = arrival.at(static_cast<std::size_t>(i)).at(j);
      std::sort(order.begin(), order.end());
      if (order != reporters[static_cast<std::size_t>(i)][j]) {
        throw std::invalid_argument("arrival order for client " + std::to_string(i) + ", cluster " +
                                    std::to_string(j) + " is not a permutation of its reporting neighbors");
      }
    }
  }
  for_each_client(n, opts.execution, [&](int i) {
    if (!receives(opts, i)) return;
    auto& me = states[static_cast<std::size_t>(i)];
    for (int j = 0; j < me.k(); ++j) {
      const auto& order = arrival[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (order.empty()) continue;
      auto& own = me.models[static_cast<std::size_t>(j)];
      if (opts.mixing != nullptr) {
        merge_metropolis(own, i, order, states, *opts.mixing);
        continue;
      }
      std::vector<const FlatParams*> incoming;
      incoming.reserve(order.size());
      for (int m : order) incoming.push_back(&(*states[static_cast<std::size_t>(m)].outbox).params);
      merge_running_average(own, incoming, opts.weights);
    }
  });
}

RoundPlan RoundPlan::everyone(int n) {
  RoundPlan p;
  p.participants.assign(static_cast<std::size_t>(n), 1);
  return p;
}

std::vector<char> sample_participants(int n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("participation fraction must lie in (0, 1]");
  std::vector<char> out(static_cast<std::size_t>(n), 0);
  if (fraction >= 1.0) {
    std::fill(out.begin(), out.end(), 1);
    return out;
  }
  const auto count = std::max<long long>(1, std::llround(fraction * n));
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  for (long long s = 0; s < count; ++s) out[static_cast<std::size_t>(ids[static_cast<std::size_t>(s)])] = 1;
  return out;
}

std::vector<std::vector<std::vector<int>>> draw_arrival_orders(const Reporters& reporters, std::uint64_t round_seed) {
  auto orders = reporters;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    for (std::size_t j = 0; j < orders[i].size(); ++j) {
      Rng rng(derive_seed(round_seed, 2, i, j));
      std::shuffle(orders[i][j].begin(), orders[i][j].end(), rng);
    }
  }
  return orders;
}

std::vector<FlatParams> network_averages(std::span<const ClientState> states) {
  const auto k = states.front().models.size();
  std::vector<FlatParams> avg(k, FlatParams(states.front().models.front().size(), 0.0));
  for (const auto& c : states) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t x = 0; x < avg[j].size(); ++x) avg[j][x] += c.models[j][x];
    }
  }
  const double inv = 1.0 / static_cast<double>(states.size());
  for (auto& a : avg) {
    for (auto& v : a) v *= inv;
  }
  return avg;
}

namespace {

std::vector<double> drift_between(const std::vector<FlatParams>& before, const std::vector<FlatParams>& after) {
  std::vector<double> out;
  for (std::size_t j = 0; j < before.size(); ++j) {
    double s = 0.0;
    for (std::size_t x = 0; x < before[j].size(); ++x) {
      const double d = after[j][x] - before[j][x];
      s += d * d;
    }
    out.push_back(std::sqrt(s));
  }
  return out;
}

void check_plan(const std::vector<ClientState>& states, const Topology& t, const MixingMatrix& mixing,
                const RoundPlan& plan) {
  if (static_cast<int>(states.size()) != t.n_clients()) throw std::invalid_argument("state count does not match topology");
  if (plan.participants.size() != states.size()) throw std::invalid_argument("participant mask has wrong length");
  if (plan.mixing == MixingKind::metropolis && mixing.kind != MixingKind::metropolis) {
    throw std::invalid_argument("plan asks for metropolis mixing but was given a " +
                                std::string(to_string(mixing.kind)) + " matrix");
  }
}

}  // namespace

RoundOutcome run_round(std::vector<ClientState>& states, const Topology& t, const MixingMatrix& mixing,
                       const RoundPlan& plan, const Hyperparams& hp) {
  check_plan(states, t, mixing, plan);
  const int n = t.n_clients();
  std::vector<char> changed(states.size(), 0);

  // Steps 1 and 2 only touch the client's own models, so clients are independent.
  for_each_client(n, hp.execution, [&](int i) {
    auto& c = states[static_cast<std::size_t>(i)];
    c.outbox.reset();
    if (!plan.participants[static_cast<std::size_t>(i)]) return;
    const int before = c.assignment;
    assign_cluster(c);
    changed[static_cast<std::size_t>(i)] = c.assignment != before;
    local_update(c, hp.sgd, derive_seed(plan.round_seed, 1, i));
  });

  RoundOutcome out;
  out.assignments_changed = static_cast<int>(std::count(changed.begin(), changed.end(), 1));

  AggregationOptions opts;
  opts.mixing = plan.mixing == MixingKind::metropolis ? &mixing : nullptr;
  opts.execution = hp.execution;
  if (!plan.receive_nonparticipants) opts.receives = plan.participants;

  const auto before = network_averages(states);
  if (plan.mode == AggregationMode::batch) {
    aggregate_batch(states, t, opts);
  } else {
    aggregate_sequential(states, t, draw_arrival_orders(collect_reporters(states, t), plan.round_seed), opts);
  }
  out.avg_drift = drift_between(before, network_averages(states));
  return out;
}

}  // namespace dfca
