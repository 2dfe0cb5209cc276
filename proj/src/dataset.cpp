#include "dfca/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "dfca/seed.hpp"

namespace dfca {

void Dataset::push_back(std::span<const double> x, int label) {
  if (dim == 0 && empty()) dim = x.size();
  if (x.size() != dim) throw std::invalid_argument("sample dimension mismatch");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.dim = dim;
  out.distribution_id = distribution_id;
  out.features.reserve(rows.size() * dim);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    auto x = row(r);
    out.features.insert(out.features.end(), x.begin(), x.end());
    out.labels.push_back(labels.at(r));
  }
  return out;
}

void validate(const Dataset& d) {
  if (d.empty()) throw std::invalid_argument("dataset is empty");
  if (d.dim == 0) throw std::invalid_argument("dataset has zero feature dimension");
  if (d.features.size() != d.labels.size() * d.dim) {
    throw std::invalid_argument("dataset features/labels size mismatch");
  }
}

void validate(const SyntheticSpec& spec) {
  if (spec.n_classes < 1) throw std::invalid_argument("data.n_classes must be positive");
  if (spec.dim < 2) throw std::invalid_argument("data.dim must be at least 2");
  if (spec.samples_per_client < 1) throw std::invalid_argument("data.samples_per_client must be positive");
  if (!(spec.class_separation > 0)) throw std::invalid_argument("data.class_separation must be positive");
  if (!(spec.noise_std > 0)) throw std::invalid_argument("data.noise_std must be positive");
}

std::vector<double> class_centers(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.center_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto dim = static_cast<std::size_t>(spec.dim);
  std::vector<double> centers(static_cast<std::size_t>(spec.n_classes) * dim, 0.0);
  for (std::size_t c = 0; c < static_cast<std::size_t>(spec.n_classes); ++c) {
    double x = 0.0;
    double y = 0.0;
    double r = 0.0;
    while (r == 0.0) {
      x = gauss(rng);
      y = gauss(rng);
      r = std::hypot(x, y);
    }
    centers[c * dim] = spec.class_separation * x / r;
    centers[c * dim + 1] = spec.class_separation * y / r;
  }
  return centers;
}

void rotate_plane(std::span<double> x, int degrees) {
  const double a = x[0];
  const double b = x[1];
  switch (((degrees % 360) + 360) % 360) {
    case 0: break;
    case 90: x[0] = -b; x[1] = a; break;
    case 180: x[0] = -a; x[1] = -b; break;
    case 270: x[0] = b; x[1] = -a; break;
    default: throw std::invalid_argument("rotation must be a multiple of 90 degrees");
  }
}

Dataset generate_rotated_synthetic(const SyntheticSpec& spec, int k, int cluster, std::uint64_t seed) {
  if (k != 1 && k != 2 && k != 4) {
    throw std::invalid_argument("rotated synthetic data supports k in {1, 2, 4}, got " + std::to_string(k));
  }
  if (cluster < 0 || cluster >= k) throw std::invalid_argument("cluster index out of range");
  const auto centers = class_centers(spec);
  const auto dim = static_cast<std::size_t>(spec.dim);

  Rng rng(seed);
  std::uniform_int_distribution<int> pick_class(0, spec.n_classes - 1);
  std::normal_distribution<double> gauss(0.0, spec.noise_std);

  Dataset d;
  d.dim = dim;
  d.distribution_id = cluster;
  d.features.resize(static_cast<std::size_t>(spec.samples_per_client) * dim);
  d.labels.resize(static_cast<std::size_t>(spec.samples_per_client));
  const int degrees = cluster * (360 / k);
  for (std::size_t s = 0; s < d.labels.size(); ++s) {
    const int c = pick_class(rng);
    d.labels[s] = c;
    auto x = d.row(s);
    for (std::size_t f = 0; f < dim; ++f) x[f] = centers[static_cast<std::size_t>(c) * dim + f] + gauss(rng);
    rotate_plane(x, degrees);
  }
  return d;
}

std::size_t square_side(std::size_t n_pixels) {
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n_pixels))));
  if (side * side != n_pixels) {
    throw std::invalid_argument("image of " + std::to_string(n_pixels) + " pixels is not square");
  }
  return side;
}

std::vector<double> rotate_image(std::span<const double> pixels, int degrees) {
  const std::size_t n = square_side(pixels.size());
  const int turns = ((degrees % 360) + 360) % 360;
  if (turns % 90 != 0) throw std::invalid_argument("image rotation must be 0, 90, 180 or 270 degrees");
  std::vector<double> out(pixels.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t sr = r;
      std::size_t sc = c;
      switch (turns) {
        case 0: break;
        case 90: sr = n - 1 - c; sc = r; break;
        case 180: sr = n - 1 - r; sc = n - 1 - c; break;
        case 270: sr = c; sc = n - 1 - r; break;
      }
      out[r * n + c] = pixels[sr * n + sc];
    }
  }
  return out;
}

namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& file) {
  if (bytes.size() < offset + 4) throw IdxError(IdxError::Kind::truncated, file + ": truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset load_idx_pair(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto images = slurp(images_path);
  const auto labels = slurp(labels_path);
  const std::string img_name = images_path.string();
  const std::string lbl_name = labels_path.string();

  const auto img_magic = read_be32(images, 0, img_name);
  if (img_magic != 0x00000803) {
    throw IdxError(IdxError::Kind::bad_magic, img_name + ": bad magic for IDX images");
  }
  const auto lbl_magic = read_be32(labels, 0, lbl_name);
  if (lbl_magic != 0x00000801) {
    throw IdxError(IdxError::Kind::bad_magic, lbl_name + ": bad magic for IDX labels");
  }
  const std::size_t count = read_be32(images, 4, img_name);
  const std::size_t rows = read_be32(images, 8, img_name);
  const std::size_t cols = read_be32(images, 12, img_name);
  const std::size_t label_count = read_be32(labels, 4, lbl_name);
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + count * pixels) {
    throw IdxError(IdxError::Kind::truncated, img_name + ": truncated pixel data");
  }
  if (labels.size() < 8 + label_count) {
    throw IdxError(IdxError::Kind::truncated, lbl_name + ": truncated label data");
  }
  if (count != label_count) {
    throw IdxError(IdxError::Kind::count_mismatch, "IDX count mismatch: " + std::to_string(count) + " images vs " +
                                                       std::to_string(label_count) + " labels");
  }

  Dataset d;
  d.dim = pixels;
  d.features.resize(count * pixels);
  d.labels.resize(count);
  for (std::size_t i = 0; i < count * pixels; ++i) d.features[i] = images[16 + i] / 255.0;
  for (std::size_t i = 0; i < count; ++i) d.labels[i] = labels[8 + i];
  return d;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& d, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie strictly between 0 and 1");
  }
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(d.size()) * test_fraction));
  if (n_test == 0 || n_test >= d.size()) {
    throw std::invalid_argument("train/test split of " + std::to_string(d.size()) + " samples leaves a part empty");
  }
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {d.subset(train), d.subset(test)};
}

}  // namespace dfca
