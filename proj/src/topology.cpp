#include "dfca/topology.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>

#include "dfca/seed.hpp"

namespace dfca {

Topology::Topology(int n_clients, std::span<const Edge> edges)
    : n_(n_clients),
      adjacency_(static_cast<std::size_t>(n_clients) * static_cast<std::size_t>(n_clients), 0),
      neighborhoods_(static_cast<std::size_t>(n_clients)) {
  if (n_clients < 1) throw std::invalid_argument("topology needs at least one client");
  for (auto [i, m] : edges) {
    if (i < 0 || m < 0 || i >= n_ || m >= n_) {
      throw std::invalid_argument("edge (" + std::to_string(i) + ", " + std::to_string(m) +
                                  ") out of range for n=" + std::to_string(n_));
    }
    if (i == m) throw std::invalid_argument("self-loop at client " + std::to_string(i));
    if (adjacency_[index(i, m)]) continue;
    adjacency_[index(i, m)] = 1;
    adjacency_[index(m, i)] = 1;
    ++edge_count_;
  }
  for (int i = 0; i < n_; ++i) {
    auto& nb = neighborhoods_[static_cast<std::size_t>(i)];
    for (int m = 0; m < n_; ++m) {
      if (adjacency_[index(i, m)]) nb.push_back(m);
    }
  }
}

std::vector<Topology::Edge> Topology::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (int i = 0; i < n_; ++i) {
    for (int m : neighbors(i)) {
      if (i < m) out.emplace_back(i, m);
    }
  }
  return out;
}

Topology generate_erdos_renyi(int n, double p, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("erdos-renyi: n must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("erdos-renyi: p must lie in [0, 1]");
  Rng rng(seed);
  std::vector<Topology::Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int m = i + 1; m < n; ++m) {
      // 53-bit uniform in [0, 1); spelled out so the draw is bit-exact across standard libraries.
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      if (u < p) edges.emplace_back(i, m);
    }
  }
  return Topology(n, edges);
}

Topology complete_graph(int n) { return generate_erdos_renyi(n, 1.0, 0); }

Topology path_graph(int n) {
  std::vector<Topology::Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return Topology(n, edges);
}

Topology cycle_graph(int n) {
  std::vector<Topology::Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  if (n > 2) edges.emplace_back(0, n - 1);
  return Topology(n, edges);
}

Topology star_graph(int n) {
  std::vector<Topology::Edge> edges;
  for (int m = 1; m < n; ++m) edges.emplace_back(0, m);
  return Topology(n, edges);
}

bool is_connected(const Topology& t) {
  const int n = t.n_clients();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int reached = 1;
  while (!frontier.empty()) {
    const int i = frontier.front();
    frontier.pop();
    for (int m : t.neighbors(i)) {
      if (!seen[static_cast<std::size_t>(m)]) {
        seen[static_cast<std::size_t>(m)] = 1;
        ++reached;
        frontier.push(m);
      }
    }
  }
  return reached == n;
}

void write_edge_list(std::ostream& os, const Topology& t) {
  os << t.n_clients() << '\n';
  for (auto [i, m] : t.edges()) os << i << ' ' << m << '\n';
}

Topology read_edge_list(std::istream& is) {
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream head(line);
    if (!(head >> n)) throw std::invalid_argument("edge list: bad header line '" + line + "'");
    break;
  }
  if (n < 1) throw std::invalid_argument("edge list: missing or invalid client count");
  std::vector<Topology::Edge> edges;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    int i = 0;
    int m = 0;
    if (!(row >> i >> m)) throw std::invalid_argument("edge list: bad edge line '" + line + "'");
    if (i >= m) throw std::invalid_argument("edge list: expected i < m in '" + line + "'");
    edges.emplace_back(i, m);
  }
  return Topology(n, edges);
}

const char* to_string(MixingKind kind) {
  switch (kind) {
    case MixingKind::paper_uniform: return "paper-uniform";
    case MixingKind::metropolis: return "metropolis";
  }
  return "?";
}

MixingKind parse_mixing_kind(const std::string& s) {
  if (s == "paper-uniform") return MixingKind::paper_uniform;
  if (s == "metropolis") return MixingKind::metropolis;
  throw std::invalid_argument("unknown mixing kind '" + s + "' (expected paper-uniform or metropolis)");
}

MixingMatrix build_mixing_matrix(const Topology& t, MixingKind kind) {
  const int n = t.n_clients();
  MixingMatrix w{kind, n, std::vector<double>(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0)};
  auto at = [&](int i, int m) -> double& {
    return w.weights[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(m)];
  };
  for (int i = 0; i < n; ++i) {
    if (kind == MixingKind::paper_uniform) {
      const double share = 1.0 / (t.degree(i) + 1);
      at(i, i) = share;
      for (int m : t.neighbors(i)) at(i, m) = share;
    } else {
      double off = 0.0;
      for (int m : t.neighbors(i)) {
        const double wim = 1.0 / (1.0 + std::max(t.degree(i), t.degree(m)));
        at(i, m) = wim;
        off += wim;
      }
      at(i, i) = 1.0 - off;
    }
  }
  return w;
}

namespace {

// y = (W - J) x, with J the averaging projector.
void apply_deflated(const MixingMatrix& w, const std::vector<double>& x, std::vector<double>& y) {
  const int n = w.n;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int m = 0; m < n; ++m) acc += w(i, m) * x[static_cast<std::size_t>(m)];
    y[static_cast<std::size_t>(i)] = acc - mean;
  }
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double second_eigenvalue_magnitude(const MixingMatrix& w, PowerIterationOptions opts) {
  const int n = w.n;
  if (n == 1) return 0.0;
  std::vector<double> v(static_cast<std::size_t>(n));
  Rng rng(0x5eedULL);
  for (auto& x : v) x = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  for (auto& x : v) x -= mean;

  std::vector<double> half(v.size());
  std::vector<double> next(v.size());
  double estimate = -1.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const double nv = norm2(v);
    if (nv == 0.0) return 0.0;
    for (auto& x : v) x /= nv;
    apply_deflated(w, v, half);
    apply_deflated(w, half, next);
    // Rayleigh quotient of (W-J)^2 for unit v.
    double rq = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) rq += v[i] * next[i];
    if (std::abs(rq - estimate) < opts.tolerance) return std::sqrt(std::max(rq, 0.0));
    estimate = rq;
    v.swap(next);
  }
  throw SpectralError("power iteration did not converge within " + std::to_string(opts.max_iterations) +
                      " iterations");
}

double spectral_gap(const MixingMatrix& w, PowerIterationOptions opts) {
  if (w.kind != MixingKind::metropolis) {
    throw std::invalid_argument("spectral_gap requires a symmetric (metropolis) mixing matrix");
  }
  return 1.0 - second_eigenvalue_magnitude(w, opts);
}

}  // namespace dfca
