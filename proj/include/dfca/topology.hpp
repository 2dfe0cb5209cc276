#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dfca {

/// Undirected simple graph over clients 0..n-1.
///
/// Immutable after construction. Neighborhood lists are sorted by client
/// index so that every iteration over them is canonical.
class Topology {
 public:
  using Edge = std::pair<int, int>;

  /// Builds a graph from an edge list. Duplicate edges are merged;
  /// self-loops and out-of-range endpoints throw std::invalid_argument.
  Topology(int n_clients, std::span<const Edge> edges);

  int n_clients() const { return n_; }
  bool adjacent(int i, int m) const { return adjacency_[index(i, m)] != 0; }
  std::span<const int> neighbors(int i) const { return neighborhoods_.at(i); }
  int degree(int i) const { return static_cast<int>(neighborhoods_.at(i).size()); }
  std::size_t edge_count() const { return edge_count_; }

  /// Edges with i < m, in lexicographic order.
  std::vector<Edge> edges() const;

 private:
  std::size_t index(int i, int m) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(m);
  }

  int n_;
  std::vector<std::uint8_t> adjacency_;
  std::vector<std::vector<int>> neighborhoods_;
  std::size_t edge_count_ = 0;
};

Topology generate_erdos_renyi(int n, double p, std::uint64_t seed);
Topology complete_graph(int n);
Topology path_graph(int n);
Topology cycle_graph(int n);
Topology star_graph(int n);

bool is_connected(const Topology& t);

/// Edge-list text format: first line `n`, then one `i m` pair per line,
/// 0-indexed with i < m.
void write_edge_list(std::ostream& os, const Topology& t);
Topology read_edge_list(std::istream& is);

enum class MixingKind {
  paper_uniform,  // 1/(|N_i|+1) on self and each neighbor
  metropolis,     // 1/(1+max(deg i, deg m)) per edge, self takes the rest
};

const char* to_string(MixingKind kind);
MixingKind parse_mixing_kind(const std::string& s);

/// Dense row-major n×n weight matrix respecting a topology.
struct MixingMatrix {
  MixingKind kind;
  int n;
  std::vector<double> weights;

  double operator()(int i, int m) const {
    return weights[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(m)];
  }
};

MixingMatrix build_mixing_matrix(const Topology& t, MixingKind kind);

class SpectralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PowerIterationOptions {
  double tolerance = 1e-10;
  int max_iterations = 200000;
};

/// Second-largest eigenvalue magnitude of a symmetric mixing matrix.
///
/// Power iteration on (W - J)^2 with J = (1/n)11^T; squaring keeps the
/// iteration monotone when the top of the spectrum holds a +/- pair.
/// Throws SpectralError if the iteration cap is hit first.
double second_eigenvalue_magnitude(const MixingMatrix& w, PowerIterationOptions opts = {});

/// 1 - second_eigenvalue_magnitude(w). Requires the metropolis kind.
double spectral_gap(const MixingMatrix& w, PowerIterationOptions opts = {});

}  // namespace dfca
