#include "dfca/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "dfca/core.hpp"
#include "dfca/metrics.hpp"
#include "dfca/seed.hpp"

namespace dfca {

namespace {

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

Dataset random_dataset(Rng& rng, int dim, int classes, int samples) {
  Dataset d;
  d.dim = static_cast<std::size_t>(dim);
  for (int s = 0; s < samples; ++s) {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (auto& v : x) v = uniform(rng, -2.0, 2.0);
    d.push_back(x, static_cast<int>(rng() % static_cast<std::uint64_t>(classes)));
  }
  return d;
}

// Clients with random models, assignments and outboxes carrying their assigned model.
std::vector<ClientState> random_senders(Rng& rng, int n, int k, std::size_t len) {
  std::vector<ClientState> states(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& c = states[static_cast<std::size_t>(i)];
    c.client_id = i;
    c.models.assign(static_cast<std::size_t>(k), FlatParams(len));
    for (auto& m : c.models) {
      for (auto& v : m) v = uniform(rng, -5.0, 5.0);
    }
    c.assignment = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    c.outbox = Outbox{c.assignment, c.models[static_cast<std::size_t>(c.assignment)]};
  }
  return states;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t x = 0; x < a.size(); ++x) worst = std::max(worst, std::abs(a[x] - b[x]));
  return worst;
}

struct Check {
  bool ok = true;
  std::ostringstream detail;
  void fail(const std::string& why) {
    if (ok) detail << why;
    ok = false;
  }
};

Check sequential_equals_batch(const VerifyOptions& opts) {
  Check c;
  Rng rng(101);
  int compared = 0;
  for (int trial = 0; trial < 60 && c.ok; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    const int k = 1 + static_cast<int>(rng() % 3);
    const auto t = generate_erdos_renyi(n, uniform(rng, 0.3, 1.0), rng());
    auto states = random_senders(rng, n, k, 3);
    auto batch = states;
    AggregationOptions serial;
    serial.execution = Execution::serial;
    aggregate_batch(batch, t, serial);
    const auto reporters = collect_reporters(states, t);
    for (int i = 0; i < n && c.ok; ++i) {
      for (int j = 0; j < k && c.ok; ++j) {
        auto order = reporters[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (order.empty() || order.size() > 5) continue;
        std::sort(order.begin(), order.end());
        do {
          FlatParams own = states[static_cast<std::size_t>(i)].models[static_cast<std::size_t>(j)];
          std::vector<const FlatParams*> in;
          for (int m : order) in.push_back(&states[static_cast<std::size_t>(m)].outbox->params);
          merge_running_average(own, in,
                                opts.inject_fault ? SequentialWeights::flipped : SequentialWeights::running_average);
          const double err = max_abs_diff(own, batch[static_cast<std::size_t>(i)].models[static_cast<std::size_t>(j)]);
          ++compared;
          if (err > 1e-9) {
            c.fail("client " + std::to_string(i) + " cluster " + std::to_string(j) + " differs by " + format_double(err));
            break;
          }
        } while (std::next_permutation(order.begin(), order.end()));
      }
    }
  }
  if (c.ok) c.detail << compared << " arrival orders matched";
  return c;
}

Check assignment_descent() {
  Check c;
  Rng rng(202);
  const ModelShape shape{3, 4, 3};
  for (int trial = 0; trial < 40 && c.ok; ++trial) {
    const int n = 4;
    const int k = 1 + static_cast<int>(rng() % 4);
    std::vector<ClientState> states(n);
    double before = 0.0;
    for (int i = 0; i < n; ++i) {
      auto& s = states[static_cast<std::size_t>(i)];
      s.shape = shape;
      s.data = random_dataset(rng, 3, 3, 6);
      for (int j = 0; j < k; ++j) s.models.push_back(init_params(shape, rng()));
      s.assignment = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
      before += forward_loss(shape, s.models[static_cast<std::size_t>(s.assignment)], s.data);
    }
    double after = 0.0;
    for (auto& s : states) {
      assign_cluster(s);
      after += forward_loss(shape, s.models[static_cast<std::size_t>(s.assignment)], s.data);
    }
    if (after > before + 1e-12) c.fail("trial " + std::to_string(trial) + ": loss rose from " + format_double(before));
  }
  if (c.ok) c.detail << "40 random states";
  return c;
}

Check gossip_preserves_average() {
  Check c;
  Rng rng(303);
  for (int trial = 0; trial < 20 && c.ok; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 8);
    const auto t = generate_erdos_renyi(n, 0.5, rng());
    const auto w = build_mixing_matrix(t, MixingKind::metropolis);
    auto states = random_senders(rng, n, 1, 4);
    const auto before = network_averages(states);
    AggregationOptions opts;
    opts.mixing = &w;
    opts.execution = Execution::serial;
    aggregate_batch(states, t, opts);
    const double err = max_abs_diff(before[0], network_averages(states)[0]);
    if (err > 1e-9) c.fail("average moved by " + format_double(err));
  }
  if (c.ok) c.detail << "20 metropolis gossip steps";
  return c;
}

Check consensus_contraction() {
  Check c;
  Rng rng(404);
  const ModelShape shape{2, 0, 2};
  int graphs = 0;
  for (std::uint64_t seed = 0; graphs < 4 && seed < 100 && c.ok; ++seed) {
    const auto t = generate_erdos_renyi(12, 0.35, seed);
    if (!is_connected(t)) continue;
    ++graphs;
    const auto w = build_mixing_matrix(t, MixingKind::metropolis);
    const double lambda = 1.0 - spectral_gap(w);
    std::vector<Dataset> data;
    for (int i = 0; i < 12; ++i) data.push_back(random_dataset(rng, 2, 2, 4));
    auto states = initialize(1, InitMode::local, shape, seed, std::move(data));
    RoundPlan plan = RoundPlan::everyone(12);
    plan.mixing = MixingKind::metropolis;
    plan.mode = AggregationMode::batch;
    const Hyperparams hp{SgdConfig{0.0, 1, 4}, Execution::serial};
    for (int round = 0; round < 15; ++round) {
      const double before = dispersion(states, 0);
      run_round(states, t, w, plan, hp);
      const double after = dispersion(states, 0);
      if (after > lambda * lambda * before + 1e-9) {
        c.fail("graph seed " + std::to_string(seed) + " round " + std::to_string(round) + ": " + format_double(after) +
               " > lambda^2 * " + format_double(before));
      }
    }
  }
  if (c.ok) c.detail << graphs << " connected graphs, 15 rounds each";
  return c;
}

Check gi_zero_dispersion() {
  Check c;
  Rng rng(505);
  std::vector<Dataset> data;
  for (int i = 0; i < 6; ++i) data.push_back(random_dataset(rng, 3, 2, 5));
  const auto states = initialize(3, InitMode::global, ModelShape{3, 4, 2}, 9, std::move(data));
  for (int j = 0; j < 3; ++j) {
    if (dispersion(states, j) != 0.0) c.fail("cluster " + std::to_string(j) + " starts dispersed");
  }
  return c;
}

Check gradient_matches_finite_differences() {
  Check c;
  Rng rng(606);
  const ModelShape shapes[] = {{3, 4, 3}, {2, 0, 2}, {4, 3, 2}};
  for (const auto& shape : shapes) {
    const auto d = random_dataset(rng, shape.input_dim, shape.n_classes, 5);
    auto p = init_params(shape, rng());
    const auto g = gradient(shape, p, d);
    const double h = 1e-5;
    for (std::size_t x = 0; x < p.size(); ++x) {
      const double keep = p[x];
      p[x] = keep + h;
      const double up = forward_loss(shape, p, d);
      p[x] = keep - h;
      const double down = forward_loss(shape, p, d);
      p[x] = keep;
      const double fd = (up - down) / (2 * h);
      if (std::abs(fd - g[x]) > 1e-4 * std::max(1.0, std::abs(fd))) {
        c.fail("coordinate " + std::to_string(x) + ": backprop " + format_double(g[x]) + " vs " + format_double(fd));
      }
    }
  }
  return c;
}

Check mixing_matrices_stochastic() {
  Check c;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = generate_erdos_renyi(9, 0.4, seed);
    for (auto kind : {MixingKind::paper_uniform, MixingKind::metropolis}) {
      const auto w = build_mixing_matrix(t, kind);
      for (int i = 0; i < w.n; ++i) {
        double row = 0.0;
        for (int m = 0; m < w.n; ++m) {
          row += w(i, m);
          if (w(i, m) < 0.0) c.fail("negative weight");
          if (m != i && !t.adjacent(i, m) && w(i, m) != 0.0) c.fail("weight off the graph");
          if (kind == MixingKind::metropolis && std::abs(w(i, m) - w(m, i)) > 1e-12) c.fail("asymmetric metropolis");
        }
        if (std::abs(row - 1.0) > 1e-12) c.fail("row sum " + format_double(row));
      }
    }
  }
  return c;
}

Check spectral_gap_tracks_connectivity() {
  Check c;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto t = generate_erdos_renyi(10, 0.2, seed);
    const double gap = spectral_gap(build_mixing_matrix(t, MixingKind::metropolis));
    if (is_connected(t) && !(gap > 0.0)) c.fail("connected graph with zero gap, seed " + std::to_string(seed));
    if (!is_connected(t) && std::abs(gap) > 1e-8) c.fail("disconnected graph with gap " + format_double(gap));
  }
  return c;
}

Check local_update_is_confined() {
  Check c;
  Rng rng(707);
  const ModelShape shape{3, 4, 2};
  ClientState s;
  s.shape = shape;
  s.data = random_dataset(rng, 3, 2, 10);
  for (int j = 0; j < 3; ++j) s.models.push_back(init_params(shape, rng()));
  s.assignment = 1;
  const auto before = s.models;
  local_update(s, SgdConfig{0.1, 2, 4}, 5);
  if (s.models[0] != before[0] || s.models[2] != before[2]) c.fail("an unassigned model changed");
  if (s.models[1] == before[1]) c.fail("assigned model did not train");
  return c;
}

Check rotations_compose() {
  Check c;
  std::vector<double> img(9);
  for (std::size_t x = 0; x < img.size(); ++x) img[x] = static_cast<double>(x);
  auto r = img;
  for (int q = 0; q < 4; ++q) r = rotate_image(r, 90);
  if (r != img) c.fail("four quarter turns are not the identity");
  if (rotate_image(rotate_image(img, 180), 180) != img) c.fail("two half turns are not the identity");
  return c;
}

Check metric_invariances() {
  Check c;
  Rng rng(808);
  auto states = random_senders(rng, 7, 3, 5);
  const double disp = dispersion(states, 1);
  for (auto& s : states) {
    for (std::size_t x = 0; x < s.models[1].size(); ++x) s.models[1][x] += 3.5 * static_cast<double>(x + 1);
  }
  if (std::abs(dispersion(states, 1) - disp) > 1e-9) c.fail("dispersion changed under translation");
  const std::vector<int> truth = {0, 0, 1, 1, 2, 2, 2};
  const std::vector<int> pred = {1, 1, 2, 0, 0, 0, 2};
  const std::vector<int> relabeled = {2, 2, 0, 1, 1, 1, 0};
  if (clustering_accuracy(pred, truth, 3) != clustering_accuracy(relabeled, truth, 3)) {
    c.fail("clustering accuracy depends on label names");
  }
  return c;
}

}  // namespace

std::vector<PropertyResult> run_property_suite(const VerifyOptions& opts) {
  const std::vector<std::pair<std::string, std::function<Check()>>> props = {
      {"sequential aggregation equals batch aggregation", [&] { return sequential_equals_batch(opts); }},
      {"assignment never increases the global loss", assignment_descent},
      {"metropolis gossip preserves the network average", gossip_preserves_average},
      {"gossip contracts disagreement by lambda^2", consensus_contraction},
      {"global initialization starts with zero dispersion", gi_zero_dispersion},
      {"backprop matches central finite differences", gradient_matches_finite_differences},
      {"mixing matrices are row-stochastic and respect the graph", mixing_matrices_stochastic},
      {"spectral gap is positive iff the graph is connected", spectral_gap_tracks_connectivity},
      {"local update leaves unassigned models untouched", local_update_is_confined},
      {"image rotations compose to the identity", rotations_compose},
      {"dispersion and clustering accuracy invariances", metric_invariances},
  };
  std::vector<PropertyResult> out;
  for (const auto& [name, run] : props) {
    const auto start = std::chrono::steady_clock::now();
    PropertyResult r;
    r.name = name;
    try {
      auto check = run();
      r.passed = check.ok;
      r.detail = check.detail.str();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dfca
