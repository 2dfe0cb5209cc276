// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dfca/experiment.hpp"
#include "dfca/seed.hpp"

using namespace dfca;

namespace {

// Tolerances and thresholds.
constexpr double kSeqBatchTol = 1e-9;
constexpr double kDescentTol = 1e-12;
constexpr double kContractionTol = 1e-9;
constexpr double kAverageTol = 1e-9;
constexpr double kClusteringTarget = 0.95;
constexpr double kGoldenBand = 0.02;
constexpr double kIfcaGap = 0.02;
constexpr double kBaselineMargin = 0.03;
constexpr double kConnectivityBand = 0.01;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdFloor = 1e-6;  // denominators below this are treated as this

// Values recorded on the first full run of the desk-scale config (seeds 0..4).
constexpr double kGoldenGiClustering = 0.99;
constexpr double kGoldenLiClustering = 0.91;
constexpr double kGoldenGiTestAcc = 0.7068;
constexpr double kGoldenLiTestAcc = 0.6868;
constexpr double kGoldenIfcaTestAcc = 0.6900;
constexpr double kGoldenDavgTestAcc = 0.5906;

constexpr int kDeskSeeds = 5;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %2d %-28s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

std::vector<ClientState> random_senders(Rng& rng, int n, int k, std::size_t len) {
  std::vector<ClientState> states(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& c = states[static_cast<std::size_t>(i)];
    c.client_id = i;
    c.models.assign(static_cast<std::size_t>(k), FlatParams(len));
    for (auto& m : c.models)
      for (auto& v : m) v = uniform(rng, -5.0, 5.0);
    c.assignment = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    c.outbox = Outbox{c.assignment, c.models[static_cast<std::size_t>(c.assignment)]};
  }
  return states;
}

Topology graph_from_mask(int n, std::uint64_t mask) {
  std::vector<std::pair<int, int>> edges;
  int bit = 0;
  for (int i = 0; i < n; ++i)
    for (int m = i + 1; m < n; ++m, ++bit)
      if (mask >> bit & 1U) edges.emplace_back(i, m);
  return Topology(n, edges);
}

// Every arrival order at every (receiver, cluster) with at most five
// reporters, one (i, j) at a time, against the batch result.
double worst_seq_batch(const Topology& t, int k, Rng& rng, long& orders) {
  auto states = random_senders(rng, t.n_clients(), k, 3);
  auto batch = states;
  aggregate_batch(batch, t);
  const auto reporters = collect_reporters(states, t);
  double worst = 0.0;
  for (int i = 0; i < t.n_clients(); ++i) {
    for (int j = 0; j < k; ++j) {
      auto order = reporters[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (order.size() > 5) continue;
      do {
        auto arrival = reporters;
        arrival[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = order;
        auto seq = states;
        aggregate_sequential(seq, t, arrival);
        for (std::size_t c = 0; c < seq.size(); ++c)
          for (std::size_t jj = 0; jj < seq[c].models.size(); ++jj)
            for (std::size_t x = 0; x < 3; ++x)
              worst = std::max(worst, std::abs(seq[c].models[jj][x] - batch[c].models[jj][x]));
        ++orders;
      } while (std::next_permutation(order.begin(), order.end()));
    }
  }
  return worst;
}

void criterion_seq_batch() {
  const auto t0 = Clock::now();
  Rng rng(1);
  double worst = 0.0;
  long orders = 0;
  int graphs = 0;
  // Every labeled graph up to five clients, then random graphs up to eight.
  for (int n = 1; n <= 5; ++n) {
    const int pairs = n * (n - 1) / 2;
    for (std::uint64_t mask = 0; mask < (1ULL << pairs); ++mask) {
      const auto t = graph_from_mask(n, mask);
      for (int k = 1; k <= 4; ++k) worst = std::max(worst, worst_seq_batch(t, k, rng, orders));
      ++graphs;
    }
  }
  for (int n = 6; n <= 8; ++n) {
    for (int trial = 0; trial < 40; ++trial) {
      const auto t = generate_erdos_renyi(n, uniform(rng, 0.1, 1.0), rng());
      for (int k = 1; k <= 4; ++k) worst = std::max(worst, worst_seq_batch(t, k, rng, orders));
      ++graphs;
    }
  }
  const double secs = seconds_since(t0);
  report(1, "sequential-equals-batch", worst <= kSeqBatchTol && secs < 10.0,
         std::to_string(graphs) + " graphs, " + std::to_string(orders) + " orders, max diff " + fmt("%.3g", worst) +
             ", " + fmt("%.2f", secs) + " s");
}

double global_loss(const std::vector<ClientState>& states) {
  double f = 0.0;
  for (const auto& c : states) f += cluster_losses(c)[static_cast<std::size_t>(c.assignment)];
  return f;
}

void criterion_descent() {
  const auto t0 = Clock::now();
  Rng rng(2);
  double worst = -INFINITY;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int k = 1 + static_cast<int>(rng() % 4);
    const ModelShape shape{3, static_cast<int>(rng() % 5), 3};
    std::vector<Dataset> sets;
    for (int i = 0; i < n; ++i) {
      Dataset d;
      d.dim = 3;
      for (int s = 0; s < 8; ++s) {
        std::vector<double> x(3);
        for (auto& v : x) v = uniform(rng, -2.0, 2.0);
        d.push_back(x, static_cast<int>(rng() % 3));
      }
      sets.push_back(std::move(d));
    }
    auto states = initialize(k, InitMode::local, shape, rng(), std::move(sets));
    for (auto& c : states) c.assignment = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
    const double before = global_loss(states);
    for (auto& c : states) assign_cluster(c);
    worst = std::max(worst, global_loss(states) - before);
  }
  const double secs = seconds_since(t0);
  report(2, "assignment-descent", worst <= kDescentTol && secs < 10.0,
         "100 states, max increase " + fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s");
}

void criterion_contraction() {
  const auto t0 = Clock::now();
  const ModelShape shape{16, 8, 4};
  double worst_excess = -INFINITY, worst_avg = 0.0;
  int graphs = 0;
  for (std::uint64_t seed = 0; graphs < 10; ++seed) {
    const auto t = generate_erdos_renyi(20, 0.3, seed);
    if (!is_connected(t)) continue;
    ++graphs;
    const auto w = build_mixing_matrix(t, MixingKind::metropolis);
    const double lambda = 1.0 - spectral_gap(w);
    SyntheticSpec spec;
    spec.samples_per_client = 20;
    std::vector<Dataset> sets;
    for (int i = 0; i < 20; ++i) sets.push_back(generate_rotated_synthetic(spec, 1, 0, derive_seed(seed, i)));
    auto states = initialize(1, InitMode::local, shape, seed, std::move(sets));
    const auto avg0 = network_averages(states)[0];
    Hyperparams hp;
    hp.sgd.gamma = 0.0;
    double disp = dispersion(states, 0);
    for (int r = 0; r < 40; ++r) {
      RoundPlan plan = RoundPlan::everyone(20);
      plan.mixing = MixingKind::metropolis;
      plan.round_seed = derive_seed(seed, 100 + r);
      run_round(states, t, w, plan, hp);
      const double next = dispersion(states, 0);
      worst_excess = std::max(worst_excess, next - (lambda * lambda * disp + kContractionTol));
      disp = next;
      const auto avg = network_averages(states)[0];
      for (std::size_t x = 0; x < avg.size(); ++x) worst_avg = std::max(worst_avg, std::abs(avg[x] - avg0[x]));
    }
  }
  const double secs = seconds_since(t0);
  report(3, "consensus-contraction", worst_excess <= 0.0 && worst_avg <= kAverageTol && secs < 10.0,
         "10 graphs x 40 rounds, max excess " + fmt("%.3g", worst_excess) + ", average drift " +
             fmt("%.3g", worst_avg) + ", " + fmt("%.2f", secs) + " s");
}

void criterion_gi_zero_dispersion() {
  bool ok = true;
  int checked = 0;
  for (int k : {1, 2, 4}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ExperimentConfig cfg;
      cfg.k = k;
      cfg.init_mode = InitMode::global;
      const auto setup = build_setup(cfg, seed);
      for (int j = 0; j < k; ++j) {
        ok = ok && dispersion(setup.states, j) == 0.0;
        ++checked;
      }
    }
  }
  report(4, "gi-zero-dispersion", ok, std::to_string(checked) + " (seed, cluster) pairs exactly zero");
}

struct DeskRuns {
  std::vector<ExperimentResult> runs;
  double mean_final_test = 0.0;
  double mean_final_clustering = 0.0;
  double mean_stabilization = 0.0;
};

DeskRuns desk_runs(Algorithm algorithm, InitMode init) {
  ExperimentConfig cfg;  // defaults are the desk-scale setup
  cfg.algorithm = algorithm;
  cfg.init_mode = init;
  DeskRuns out;
  for (int s = 0; s < kDeskSeeds; ++s) {
    out.runs.push_back(run_experiment(cfg, static_cast<std::uint64_t>(s)));
    const auto& last = out.runs.back().trace.back();
    out.mean_final_test += last.test_accuracy / kDeskSeeds;
    out.mean_final_clustering += last.clustering_accuracy / kDeskSeeds;
    out.mean_stabilization += static_cast<double>(out.runs.back().stabilization_round) / kDeskSeeds;
  }
  return out;
}

bool within_golden(double value, double golden) { return std::abs(value - golden) <= kGoldenBand; }

void criterion_desk(const DeskRuns& gi, const DeskRuns& li, double secs) {
  const std::size_t rounds = gi.runs.front().trace.size();
  int li_reach = -1;
  for (std::size_t t = 0; t < rounds && li_reach < 0; ++t) {
    double mean = 0.0;
    for (const auto& r : li.runs) mean += r.trace[t].clustering_accuracy / kDeskSeeds;
    if (mean >= kClusteringTarget) li_reach = static_cast<int>(t);
  }
  const double deadline = 2.0 * gi.mean_stabilization;
  const bool gi_ok = gi.mean_final_clustering >= kClusteringTarget;
  const bool li_ok = li_reach >= 0 && li_reach <= deadline;
  const bool golden_ok = within_golden(gi.mean_final_clustering, kGoldenGiClustering) &&
                         within_golden(li.mean_final_clustering, kGoldenLiClustering) &&
                         within_golden(gi.mean_final_test, kGoldenGiTestAcc) &&
                         within_golden(li.mean_final_test, kGoldenLiTestAcc);
  report(5, "desk-clustering-recovery", gi_ok && li_ok && golden_ok && secs < 300.0,
         "GI clustering " + fmt("%.4f", gi.mean_final_clustering) + " (stabilizes at " +
             fmt("%.1f", gi.mean_stabilization) + "), LI clustering " + fmt("%.4f", li.mean_final_clustering) +
             ", LI mean reaches 0.95 at " + (li_reach < 0 ? std::string("never") : std::to_string(li_reach)) +
             " vs deadline " + fmt("%.1f", deadline) + ", test acc GI " + fmt("%.4f", gi.mean_final_test) + " LI " +
             fmt("%.4f", li.mean_final_test) + (golden_ok ? ", golden ok" : ", golden drift") + ", " +
             fmt("%.1f", secs) + " s");
}

void criterion_ifca(const DeskRuns& gi, const DeskRuns& ifca) {
  const double gap = std::abs(gi.mean_final_test - ifca.mean_final_test);
  const bool golden_ok = within_golden(ifca.mean_final_test, kGoldenIfcaTestAcc);
  report(6, "dfca-matches-ifca", gap <= kIfcaGap && golden_ok,
         "DFCA-GI " + fmt("%.4f", gi.mean_final_test) + " vs IFCA " + fmt("%.4f", ifca.mean_final_test) + ", gap " +
             fmt("%.2f", 100 * gap) + " points");
}

void criterion_baseline(const DeskRuns& gi, const DeskRuns& davg) {
  const double margin = gi.mean_final_test - davg.mean_final_test;
  const bool golden_ok = within_golden(davg.mean_final_test, kGoldenDavgTestAcc);
  report(7, "clustering-beats-single", margin >= kBaselineMargin && golden_ok,
         "DFCA-GI " + fmt("%.4f", gi.mean_final_test) + " vs single model " + fmt("%.4f", davg.mean_final_test) +
             ", margin " + fmt("%.2f", 100 * margin) + " points");
}

void criterion_connectivity() {
  const auto t0 = Clock::now();
  const std::vector<double> ps = {0.05, 0.1, 0.15, 0.2, 0.3};
  std::vector<double> means;
  std::ostringstream detail;
  for (double p : ps) {
    ExperimentConfig cfg;
    cfg.n_clients = 50;
    cfg.topology_p = p;
    cfg.on_disconnected = DisconnectedPolicy::proceed;
    double mean = 0.0;
    for (int s = 0; s < kDeskSeeds; ++s) mean += run_experiment(cfg, static_cast<std::uint64_t>(s)).trace.back().test_accuracy / kDeskSeeds;
    means.push_back(mean);
    detail << "p=" << p << ':' << fmt("%.4f", mean) << ' ';
  }
  const auto [lo, hi] = std::minmax_element(means.begin() + 2, means.end());
  const double spread = *hi - *lo;
  const double secs = seconds_since(t0);
  detail << "spread(p>=0.15) " << fmt("%.2f", 100 * spread) << " points, " << fmt("%.1f", secs) << " s";
  report(8, "connectivity-sufficiency", spread <= kConnectivityBand && secs < 900.0, detail.str());
}

void criterion_gradient() {
  const ModelShape shapes[] = {{4, 5, 3}, {6, 0, 4}, {3, 8, 2}, {16, 6, 4}};
  Rng rng(9);
  double worst = 0.0;
  std::size_t coords = 0;
  for (const auto& shape : shapes) {
    Dataset d;
    d.dim = static_cast<std::size_t>(shape.input_dim);
    for (int s = 0; s < 10; ++s) {
      std::vector<double> x(d.dim);
      for (auto& v : x) v = uniform(rng, -2.0, 2.0);
      d.push_back(x, static_cast<int>(rng() % static_cast<std::uint64_t>(shape.n_classes)));
    }
    auto p = init_params(shape, rng());
    const auto g = gradient(shape, p, d);
    for (std::size_t x = 0; x < p.size(); ++x, ++coords) {
      const double keep = p[x];
      p[x] = keep + kFdStep;
      const double up = forward_loss(shape, p, d);
      p[x] = keep - kFdStep;
      const double down = forward_loss(shape, p, d);
      p[x] = keep;
      const double fd = (up - down) / (2 * kFdStep);
      worst = std::max(worst, std::abs(g[x] - fd) / std::max({std::abs(g[x]), std::abs(fd), kFdFloor}));
    }
  }
  report(9, "gradient-finite-difference", worst <= kFdRelTol,
         "4 models, " + std::to_string(coords) + " coordinates, max relative error " + fmt("%.3g", worst));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_determinism() {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "dfca_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::function<void(ExperimentConfig&)>> variants = {
      [](ExperimentConfig&) {},
      [](ExperimentConfig& c) { c.init_mode = InitMode::local; },
      [](ExperimentConfig& c) { c.aggregation_mode = AggregationMode::batch; },
      [](ExperimentConfig& c) { c.mixing_kind = MixingKind::metropolis; },
      [](ExperimentConfig& c) {
        c.participation_fraction = 0.5;
        c.receive_nonparticipants = false;
      },
      [](ExperimentConfig& c) { c.algorithm = Algorithm::ifca; },
      [](ExperimentConfig& c) { c.algorithm = Algorithm::davg; },
      [](ExperimentConfig& c) { c.k = 4; },
  };
  bool ok = true;
  int compared = 0;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    ExperimentConfig cfg;
    cfg.rounds = 10;
    cfg.n_seeds = 2;
    cfg.output_dir = root.string();
    variants[v](cfg);
    std::vector<RunOutput> outs;
    for (int rep = 0; rep < 3; ++rep) {
      cfg.name = "v" + std::to_string(v) + "_" + std::to_string(rep);
      outs.push_back(cmd_run(cfg, rep == 2 ? Execution::serial : Execution::parallel));
    }
    for (std::size_t s = 0; s < outs[0].traces.size(); ++s) {
      const auto ref = slurp(outs[0].traces[s]);
      ok = ok && !ref.empty() && ref == slurp(outs[1].traces[s]) && ref == slurp(outs[2].traces[s]);
      compared += 2;
    }
  }
  fs::remove_all(root);
  report(10, "byte-identical-traces", ok,
         std::to_string(variants.size()) + " configs, " + std::to_string(compared) +
             " trace comparisons (repeat and serial vs parallel)");
}

}  // namespace

int main() {
  criterion_seq_batch();
  criterion_descent();
  criterion_contraction();
  criterion_gi_zero_dispersion();

  const auto t0 = Clock::now();
  const auto gi = desk_runs(Algorithm::dfca, InitMode::global);
  const auto li = desk_runs(Algorithm::dfca, InitMode::local);
  criterion_desk(gi, li, seconds_since(t0));
  criterion_ifca(gi, desk_runs(Algorithm::ifca, InitMode::global));
  criterion_baseline(gi, desk_runs(Algorithm::davg, InitMode::global));

  criterion_connectivity();
  criterion_gradient();
  criterion_determinism();

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
