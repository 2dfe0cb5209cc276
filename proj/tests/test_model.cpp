#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "dfca/model.hpp"
#include "dfca/seed.hpp"

using namespace dfca;

namespace {

Dataset noise_data(std::uint64_t seed, int dim, int classes, int n) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset d;
  d.dim = static_cast<std::size_t>(dim);
  for (int s = 0; s < n; ++s) {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (auto& v : x) v = g(rng);
    d.push_back(x, static_cast<int>(rng() % static_cast<std::uint64_t>(classes)));
  }
  return d;
}

}  // namespace

TEST_CASE("parameter counts and flattening") {
  CHECK(ModelShape{16, 32, 4}.param_count() == 16 * 32 + 32 + 4 * 32 + 4);
  CHECK(ModelShape{16, 0, 4}.param_count() == 4 * 16 + 4);
  for (const ModelShape shape : {ModelShape{5, 3, 2}, ModelShape{4, 0, 3}}) {
    const auto p = init_params(shape, 77);
    const auto m = unflatten(shape, p);
    CHECK(flatten(m) == p);
    CHECK(unflatten(shape, flatten(m)) == m);
  }
  CHECK_THROWS_AS(unflatten(ModelShape{2, 2, 2}, std::vector<double>(3)), std::invalid_argument);
}

TEST_CASE("initialization bounds follow fan-in") {
  const ModelShape shape{16, 32, 4};
  const auto p = init_params(shape, 1);
  const auto m = unflatten(shape, p);
  for (double v : m.w1) CHECK(std::abs(v) <= 0.25);
  for (double v : m.b1) CHECK(std::abs(v) <= 0.25);
  for (double v : m.w2) CHECK(std::abs(v) <= 1.0 / std::sqrt(32.0));
  CHECK(init_params(shape, 1) == p);
  CHECK(init_params(shape, 2) != p);
}

TEST_CASE("forward loss: uniform softmax at zero parameters") {
  const ModelShape shape{16, 32, 4};
  const auto d = noise_data(3, 16, 4, 20);
  CHECK(forward_loss(shape, FlatParams(shape.param_count(), 0.0), d) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("forward loss: saturated true-class logit") {
  const ModelShape shape{2, 0, 4};
  FlatParams p(shape.param_count(), 0.0);
  p[4 * 2 + 2] = 20.0;  // b2 of class 2
  Dataset d;
  d.push_back(std::vector<double>{0.3, -0.7}, 2);
  CHECK(forward_loss(shape, p, d) < 1e-8);
}

TEST_CASE("forward loss: hand-computed linear instance") {
  // logits = W x + b = [-1.4, 1.55]; loss = log(e^-1.4 + e^1.55) - 1.55.
  const ModelShape shape{2, 0, 2};
  const FlatParams p = {0.5, -1.0, 0.25, 0.75, 0.1, -0.2};
  Dataset d;
  d.push_back(std::vector<double>{1.0, 2.0}, 1);
  CHECK(forward_loss(shape, p, d) == doctest::Approx(0.05101597658953527).epsilon(1e-14));
}

TEST_CASE("forward loss: permutation invariant, rejects mismatches") {
  const ModelShape shape{4, 5, 3};
  const auto p = init_params(shape, 9);
  auto d = noise_data(4, 4, 3, 12);
  const double base = forward_loss(shape, p, d);
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::reverse(order.begin(), order.end());
  CHECK(forward_loss(shape, p, d.subset(order)) == doctest::Approx(base).epsilon(1e-14));

  CHECK_THROWS_AS(forward_loss(shape, p, noise_data(1, 3, 3, 4)), std::invalid_argument);
  CHECK_THROWS_AS(forward_loss(shape, FlatParams(7), d), std::invalid_argument);
}

TEST_CASE("gradient matches central finite differences") {
  const ModelShape shapes[] = {{3, 4, 3}, {2, 0, 2}, {5, 6, 4}, {4, 2, 2}};
  std::uint64_t seed = 100;
  for (const auto& shape : shapes) {
    const auto d = noise_data(seed++, shape.input_dim, shape.n_classes, 7);
    auto p = init_params(shape, seed++);
    for (auto& v : p) v *= 3.0;  // move away from the near-linear regime
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
      CHECK(std::abs(g[x] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("gradient: symmetric balanced batch has zero output-bias gradient") {
  const ModelShape shape{2, 3, 2};
  Dataset d;
  d.push_back(std::vector<double>{1.0, 1.0}, 0);
  d.push_back(std::vector<double>{-1.0, -1.0}, 1);
  const auto g = gradient(shape, FlatParams(shape.param_count(), 0.0), d);
  CHECK(g[shape.param_count() - 2] == 0.0);
  CHECK(g[shape.param_count() - 1] == 0.0);
}

TEST_CASE("gradient: duplicating every sample leaves it unchanged") {
  const ModelShape shape{3, 4, 3};
  const auto d = noise_data(8, 3, 3, 6);
  const auto p = init_params(shape, 8);
  std::vector<std::size_t> once = {0, 1, 2, 3, 4, 5};
  std::vector<std::size_t> twice = {0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5};
  const auto a = gradient(shape, p, d, once);
  const auto b = gradient(shape, p, d, twice);
  for (std::size_t x = 0; x < a.size(); ++x) CHECK(b[x] == doctest::Approx(a[x]).epsilon(1e-13));
  CHECK_THROWS_AS(gradient(shape, p, d, std::vector<std::size_t>{}), std::invalid_argument);
}

TEST_CASE("sgd: one explicit step on a scalar quadratic") {
  // f(θ) = (θ - 2)^2, so ∇f(1) = -2 and one step with γ = 0.1 lands on 1.2.
  std::vector<double> theta = {1.0};
  sgd_epochs(theta, 1, SgdConfig{0.1, 1, 1}, 0,
             [](std::span<const double> p, std::span<const std::size_t>, std::span<double> out) {
               out[0] = 2.0 * (p[0] - 2.0);
             });
  CHECK(theta[0] == doctest::Approx(1.2).epsilon(1e-15));
}

TEST_CASE("sgd: tau and batch size handling") {
  const ModelShape shape{3, 4, 2};
  const auto d = noise_data(12, 3, 2, 9);
  const auto p = init_params(shape, 12);
  CHECK_THROWS_AS(sgd_epochs(shape, p, d, SgdConfig{0.1, 0, 9}, 0), std::invalid_argument);

  // Full batch, one epoch: exactly one step, whatever the shuffle.
  const auto g = gradient(shape, p, d);
  const auto stepped = sgd_epochs(shape, p, d, SgdConfig{0.1, 1, 9}, 4);
  for (std::size_t x = 0; x < p.size(); ++x) CHECK(stepped[x] == doctest::Approx(p[x] - 0.1 * g[x]).epsilon(1e-13));
  // Oversized batches are clamped to the dataset.
  const auto clamped = sgd_epochs(shape, p, d, SgdConfig{0.1, 1, 1000}, 4);
  for (std::size_t x = 0; x < p.size(); ++x) CHECK(clamped[x] == doctest::Approx(stepped[x]).epsilon(1e-13));
  CHECK(sgd_epochs(shape, p, d, SgdConfig{0.0, 3, 2}, 4) == p);
  CHECK(sgd_epochs(shape, p, d, SgdConfig{0.1, 3, 2}, 4) == sgd_epochs(shape, p, d, SgdConfig{0.1, 3, 2}, 4));
}

TEST_CASE("sgd lowers the training loss on the default synthetic task") {
  SyntheticSpec spec;
  spec.center_seed = 5;
  const ModelShape shape{16, 32, 4};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = generate_rotated_synthetic(spec, 2, static_cast<int>(seed % 2), seed);
    const auto p = init_params(shape, seed);
    const auto trained = sgd_epochs(shape, p, d, SgdConfig{0.1, 5, 32}, seed);
    CHECK(forward_loss(shape, trained, d) <= forward_loss(shape, p, d));
  }
}

TEST_CASE("flat params binary format") {
  const FlatParams p = {1.5, -0.0, 3e-300, std::nan(""), 42.0};
  std::stringstream ss;
  write_flat_params(ss, p);
  const auto bytes = ss.str();
  REQUIRE(bytes.size() == 8 + 8 * p.size());
  CHECK(static_cast<unsigned char>(bytes[0]) == 5);
  for (int b = 1; b < 8; ++b) CHECK(bytes[static_cast<std::size_t>(b)] == 0);
  // 1.5 = 0x3FF8000000000000, little-endian.
  CHECK(static_cast<unsigned char>(bytes[14]) == 0xF8);
  CHECK(static_cast<unsigned char>(bytes[15]) == 0x3F);
  const auto back = read_flat_params(ss);
  REQUIRE(back.size() == p.size());
  for (std::size_t x = 0; x < p.size(); ++x) CHECK(std::bit_cast<std::uint64_t>(back[x]) == std::bit_cast<std::uint64_t>(p[x]));
  std::stringstream cut(bytes.substr(0, 20));
  CHECK_THROWS(read_flat_params(cut));
}

TEST_CASE("predict breaks ties toward class 0") {
  const ModelShape shape{2, 0, 3};
  CHECK(predict(shape, FlatParams(shape.param_count(), 0.0), std::vector<double>{1.0, 2.0}) == 0);
}
