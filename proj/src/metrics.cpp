#include "dfca/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace dfca {

double f_cluster(std::span<const ClientState> states, int j) {
  double total = 0.0;
  for (const auto& c : states) {
    if (c.assignment == j) total += forward_loss(c.shape, c.models.at(static_cast<std::size_t>(j)), c.data);
  }
  return total;
}

double dispersion(std::span<const ClientState> states, int j) {
  if (states.empty()) return 0.0;
  const auto jj = static_cast<std::size_t>(j);
  const auto& anchor = states.front().models.at(jj);
  const std::size_t dim = anchor.size();
  // Work with offsets from the first copy: identical copies then give exactly zero.
  std::vector<double> mean(dim, 0.0);
  for (const auto& c : states) {
    for (std::size_t x = 0; x < dim; ++x) mean[x] += c.models[jj][x] - anchor[x];
  }
  for (auto& v : mean) v /= static_cast<double>(states.size());
  double total = 0.0;
  for (const auto& c : states) {
    for (std::size_t x = 0; x < dim; ++x) {
      const double d = (c.models[jj][x] - anchor[x]) - mean[x];
      total += d * d;
    }
  }
  return total / static_cast<double>(states.size());
}

double clustering_accuracy(std::span<const int> assignments, std::span<const int> truth, int k) {
  if (assignments.size() != truth.size()) throw std::invalid_argument("assignment/truth length mismatch");
  if (assignments.empty()) return 0.0;
  int labels = k;
  for (int t : truth) labels = std::max(labels, t + 1);
  for (int a : assignments) labels = std::max(labels, a + 1);
  // counts[a][t]: clients predicted a with truth t.
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(labels), std::vector<int>(static_cast<std::size_t>(labels), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++counts[static_cast<std::size_t>(assignments[i])][static_cast<std::size_t>(truth[i])];
  }
  std::vector<int> perm(static_cast<std::size_t>(labels));
  std::iota(perm.begin(), perm.end(), 0);
  int best = 0;
  do {
    int hits = 0;
    for (std::size_t a = 0; a < perm.size(); ++a) hits += counts[a][static_cast<std::size_t>(perm[a])];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

double clustering_accuracy(std::span<const ClientState> states, std::span<const int> truth) {
  std::vector<int> assigned;
  assigned.reserve(states.size());
  for (const auto& c : states) assigned.push_back(c.assignment);
  return clustering_accuracy(assigned, truth, states.empty() ? 1 : states.front().k());
}

TestAccuracy test_accuracy(std::span<const ClientState> states, std::span<const Dataset> test_sets) {
  if (states.size() != test_sets.size()) throw std::invalid_argument("one test set per client required");
  std::size_t hits = 0;
  std::size_t total = 0;
  double client_sum = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& c = states[i];
    const std::size_t h = count_correct(c.shape, c.models.at(static_cast<std::size_t>(c.assignment)), test_sets[i]);
    hits += h;
    total += test_sets[i].size();
    client_sum += test_sets[i].empty() ? 0.0 : static_cast<double>(h) / static_cast<double>(test_sets[i].size());
  }
  TestAccuracy out;
  out.sample_weighted = total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
  out.client_mean = states.empty() ? 0.0 : client_sum / static_cast<double>(states.size());
  return out;
}

RoundMetrics compute_round_metrics(std::span<const ClientState> states, const Evaluation& eval, int round,
                                   const RoundOutcome& outcome, Execution exec) {
  const int n = static_cast<int>(states.size());
  const int k = states.front().k();
  std::vector<double> loss(states.size());
  std::vector<std::size_t> hits(states.size());
  // Per-client work in parallel; reductions below run in client order so the result does not depend on threads.
#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
  for (int i = 0; i < n; ++i) {
    const auto& c = states[static_cast<std::size_t>(i)];
    const auto& theta = c.models[static_cast<std::size_t>(c.assignment)];
    loss[static_cast<std::size_t>(i)] = forward_loss(c.shape, theta, c.data);
    hits[static_cast<std::size_t>(i)] = count_correct(c.shape, theta, eval.test_sets[static_cast<std::size_t>(i)]);
  }

  RoundMetrics m;
  m.round = round;
  m.f_cluster.assign(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < states.size(); ++i) {
    m.f_cluster[static_cast<std::size_t>(states[i].assignment)] += loss[i];
  }
  for (double f : m.f_cluster) m.f_global += f;
  for (int j = 0; j < k; ++j) m.disp.push_back(dispersion(states, j));

  std::size_t hit_total = 0;
  std::size_t sample_total = 0;
  double client_sum = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto size = eval.test_sets[i].size();
    hit_total += hits[i];
    sample_total += size;
    client_sum += size == 0 ? 0.0 : static_cast<double>(hits[i]) / static_cast<double>(size);
  }
  m.test_accuracy = sample_total == 0 ? 0.0 : static_cast<double>(hit_total) / static_cast<double>(sample_total);
  m.test_accuracy_client_mean = client_sum / static_cast<double>(n);
  m.clustering_accuracy = clustering_accuracy(states, eval.truth);
  m.avg_drift = outcome.avg_drift;
  m.assignments_changed = outcome.assignments_changed;
  return m;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace_header(std::ostream& os, int k) {
  os << "round,f_global";
  for (int j = 0; j < k; ++j) os << ",f_cluster_" << j;
  for (int j = 0; j < k; ++j) os << ",disp_" << j;
  os << ",clustering_acc,test_acc";
  for (int j = 0; j < k; ++j) os << ",avg_drift_" << j;
  os << ",assignments_changed\n";
}

void write_trace_row(std::ostream& os, const RoundMetrics& m) {
  os << m.round << ',' << format_double(m.f_global);
  for (double v : m.f_cluster) os << ',' << format_double(v);
  for (double v : m.disp) os << ',' << format_double(v);
  os << ',' << format_double(m.clustering_accuracy) << ',' << format_double(m.test_accuracy);
  for (double v : m.avg_drift) os << ',' << format_double(v);
  os << ',' << m.assignments_changed << '\n';
}

int stabilization_round(std::span<const RoundMetrics> trace) {
  int last = -1;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    if (trace[t].assignments_changed != 0) last = static_cast<int>(t);
  }
  return last + 1;
}

}  // namespace dfca
