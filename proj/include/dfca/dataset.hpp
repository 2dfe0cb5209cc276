#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dfca {

/// Labeled samples held by one client, all drawn from one distribution.
///
/// Features are stored row-major, `dim` values per sample.
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<int> labels;
  int distribution_id = 0;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {features.data() + i * dim, dim}; }

  void push_back(std::span<const double> x, int label);
  Dataset subset(std::span<const std::size_t> rows) const;

  bool operator==(const Dataset&) const = default;
};

/// Throws std::invalid_argument if the dataset breaks its shape invariants.
void validate(const Dataset& d);

struct SyntheticSpec {
  int n_classes = 4;
  int dim = 16;
  int samples_per_client = 200;
  double class_separation = 3.0;
  double noise_std = 1.0;
  /// Seed for the class centers; shared by every client of an experiment.
  std::uint64_t center_seed = 0;
};

void validate(const SyntheticSpec& spec);

/// Class centers: C isotropic Gaussian directions in the plane of the first
/// two coordinates, scaled to norm `class_separation`. Row-major C×dim.
std::vector<double> class_centers(const SyntheticSpec& spec);

/// Draws `samples_per_client` points around uniformly chosen class centers,
/// then rotates the first two coordinates by cluster·(360/k) degrees.
/// The unrotated draw depends only on (spec, seed), so clusters differ by
/// the rotation alone. k must be 1, 2 or 4.
Dataset generate_rotated_synthetic(const SyntheticSpec& spec, int k, int cluster, std::uint64_t seed);

/// Rotates the first two coordinates of x in place by a multiple of 90 degrees.
void rotate_plane(std::span<double> x, int degrees);

/// Rotates a flattened square image clockwise by 0, 90, 180 or 270 degrees.
/// Pure pixel permutation.
std::vector<double> rotate_image(std::span<const double> pixels, int degrees);

class IdxError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, truncated, count_mismatch };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Parses an IDX image file (magic 0x00000803, dims count/rows/cols) and
/// label file (magic 0x00000801, count). Pixels are scaled to [0, 1].
Dataset load_idx_pair(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Image side length when features are square images, e.g. 28 for MNIST.
std::size_t square_side(std::size_t n_pixels);

/// Seeded disjoint split into (train, test). The test part receives
/// round(size·test_fraction) samples; both parts keep input order.
std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction, std::uint64_t seed);

}  // namespace dfca
