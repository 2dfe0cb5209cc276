#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "dfca/dataset.hpp"

namespace dfca {

/// Flat parameter vector. Aggregation, dispersion and serialization all
/// operate on this form.
using FlatParams = std::vector<double>;

/// Dimensions of a one-hidden-layer ReLU network with softmax output.
/// hidden == 0 selects the linear softmax model.
///
/// Flattening order:
///   hidden > 0:  w1 (hidden×d, row-major), b1 (hidden), w2 (C×hidden), b2 (C)
///   hidden == 0: w2 (C×d), b2 (C)
struct ModelShape {
  int input_dim = 16;
  int hidden = 32;
  int n_classes = 4;

  std::size_t param_count() const;
  bool operator==(const ModelShape&) const = default;
};

struct MlpModel {
  ModelShape shape;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  bool operator==(const MlpModel&) const = default;
};

FlatParams flatten(const MlpModel& m);
MlpModel unflatten(const ModelShape& shape, std::span<const double> params);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, biases included.
FlatParams init_params(const ModelShape& shape, std::uint64_t seed);

/// Mean softmax cross-entropy over all samples of d.
double forward_loss(const ModelShape& shape, std::span<const double> params, const Dataset& d);
double forward_loss(const MlpModel& m, const Dataset& d);

/// Gradient of the mean loss over the given rows of d.
FlatParams gradient(const ModelShape& shape, std::span<const double> params, const Dataset& d,
                    std::span<const std::size_t> rows);
FlatParams gradient(const ModelShape& shape, std::span<const double> params, const Dataset& d);

/// Argmax class; ties go to the lowest class index.
int predict(const ModelShape& shape, std::span<const double> params, std::span<const double> x);
std::size_t count_correct(const ModelShape& shape, std::span<const double> params, const Dataset& d);

struct SgdConfig {
  double gamma = 0.1;
  int tau = 5;
  int batch_size = 32;
};

/// Gradient of the mean loss over a minibatch of sample indices, written into `out`.
using BatchGradient = std::function<void(std::span<const double> params, std::span<const std::size_t> rows,
                                         std::span<double> out)>;

/// tau passes over seeded-shuffled minibatches of [0, n_samples), each
/// applying params -= gamma * grad. batch_size is clamped to n_samples.
void sgd_epochs(std::span<double> params, std::size_t n_samples, const SgdConfig& cfg, std::uint64_t seed,
                const BatchGradient& grad);

FlatParams sgd_epochs(const ModelShape& shape, FlatParams params, const Dataset& d, const SgdConfig& cfg,
                      std::uint64_t seed);

/// Length-prefixed little-endian float64 array: u64 count, then values.
void write_flat_params(std::ostream& os, std::span<const double> params);
FlatParams read_flat_params(std::istream& is);

}  // namespace dfca
