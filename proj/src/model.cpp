#include "dfca/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "dfca/seed.hpp"

namespace dfca {

namespace {

struct Layout {
  std::size_t d, h, c;
  std::size_t w1, b1, w2, b2, total;

  explicit Layout(const ModelShape& s)
      : d(static_cast<std::size_t>(s.input_dim)),
        h(static_cast<std::size_t>(s.hidden)),
        c(static_cast<std::size_t>(s.n_classes)) {
    if (s.input_dim < 1 || s.hidden < 0 || s.n_classes < 1) throw std::invalid_argument("invalid model shape");
    w1 = 0;
    b1 = w1 + h * d;
    w2 = b1 + h;
    b2 = w2 + c * (h > 0 ? h : d);
    total = b2 + c;
  }
  std::size_t penultimate() const { return h > 0 ? h : d; }
};

// Per-sample activations.
struct Scratch {
  std::vector<double> pre;     // hidden pre-activation
  std::vector<double> act;     // hidden activation (or the input when hidden == 0)
  std::vector<double> logits;  // softmax probabilities after backward_prep

  explicit Scratch(const Layout& l) : pre(l.h), act(l.penultimate()), logits(l.c) {}
};

void forward_sample(const Layout& l, std::span<const double> p, std::span<const double> x, Scratch& s) {
  if (l.h > 0) {
    for (std::size_t j = 0; j < l.h; ++j) {
      const double* w = p.data() + l.w1 + j * l.d;
      double acc = p[l.b1 + j];
      for (std::size_t f = 0; f < l.d; ++f) acc += w[f] * x[f];
      s.pre[j] = acc;
      s.act[j] = acc > 0.0 ? acc : 0.0;
    }
  } else {
    std::copy(x.begin(), x.end(), s.act.begin());
  }
  const std::size_t in = l.penultimate();
  for (std::size_t k = 0; k < l.c; ++k) {
    const double* w = p.data() + l.w2 + k * in;
    double acc = p[l.b2 + k];
    for (std::size_t j = 0; j < in; ++j) acc += w[j] * s.act[j];
    s.logits[k] = acc;
  }
}

double log_sum_exp(std::span<const double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - top);
  return top + std::log(s);
}

void check_data(const Layout& l, std::span<const double> params, const Dataset& d) {
  if (params.size() != l.total) throw std::invalid_argument("parameter vector length does not match model shape");
  if (d.dim != l.d) {
    throw std::invalid_argument("dataset dimension " + std::to_string(d.dim) + " does not match model input " +
                                std::to_string(l.d));
  }
  for (int y : d.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= l.c) throw std::invalid_argument("label out of range for model");
  }
}

}  // namespace

std::size_t ModelShape::param_count() const { return Layout(*this).total; }

FlatParams flatten(const MlpModel& m) {
  const Layout l(m.shape);
  FlatParams out;
  out.reserve(l.total);
  out.insert(out.end(), m.w1.begin(), m.w1.end());
  out.insert(out.end(), m.b1.begin(), m.b1.end());
  out.insert(out.end(), m.w2.begin(), m.w2.end());
  out.insert(out.end(), m.b2.begin(), m.b2.end());
  if (out.size() != l.total) throw std::invalid_argument("model fields inconsistent with its shape");
  return out;
}

MlpModel unflatten(const ModelShape& shape, std::span<const double> p) {
  const Layout l(shape);
  if (p.size() != l.total) throw std::invalid_argument("parameter vector length does not match model shape");
  auto slice = [&](std::size_t from, std::size_t to) { return std::vector<double>(p.begin() + from, p.begin() + to); };
  return MlpModel{shape, slice(l.w1, l.b1), slice(l.b1, l.w2), slice(l.w2, l.b2), slice(l.b2, l.total)};
}

FlatParams init_params(const ModelShape& shape, std::uint64_t seed) {
  const Layout l(shape);
  FlatParams p(l.total);
  Rng rng(seed);
  auto fill = [&](std::size_t from, std::size_t to, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = from; i < to; ++i) p[i] = u(rng);
  };
  if (l.h > 0) fill(l.w1, l.w2, l.d);
  fill(l.w2, l.total, l.penultimate());
  return p;
}

double forward_loss(const ModelShape& shape, std::span<const double> params, const Dataset& d) {
  const Layout l(shape);
  check_data(l, params, d);
  if (d.empty()) throw std::invalid_argument("forward_loss on an empty dataset");
  Scratch s(l);
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    forward_sample(l, params, d.row(i), s);
    total += log_sum_exp(s.logits) - s.logits[static_cast<std::size_t>(d.labels[i])];
  }
  return total / static_cast<double>(d.size());
}

double forward_loss(const MlpModel& m, const Dataset& d) { return forward_loss(m.shape, flatten(m), d); }

namespace {

void accumulate_gradient(const Layout& l, std::span<const double> p, const Dataset& d,
                         std::span<const std::size_t> rows, std::span<double> g) {
  std::fill(g.begin(), g.end(), 0.0);
  Scratch s(l);
  std::vector<double> dact(l.h);
  const std::size_t in = l.penultimate();
  for (std::size_t r : rows) {
    auto x = d.row(r);
    forward_sample(l, p, x, s);
    const double lse = log_sum_exp(s.logits);
    for (auto& z : s.logits) z = std::exp(z - lse);
    s.logits[static_cast<std::size_t>(d.labels[r])] -= 1.0;

    for (std::size_t k = 0; k < l.c; ++k) {
      const double delta = s.logits[k];
      double* gw = g.data() + l.w2 + k * in;
      for (std::size_t j = 0; j < in; ++j) gw[j] += delta * s.act[j];
      g[l.b2 + k] += delta;
    }
    if (l.h == 0) continue;
    for (std::size_t j = 0; j < l.h; ++j) {
      if (s.pre[j] <= 0.0) {
        dact[j] = 0.0;
        continue;
      }
      double acc = 0.0;
      for (std::size_t k = 0; k < l.c; ++k) acc += p[l.w2 + k * l.h + j] * s.logits[k];
      dact[j] = acc;
    }
    for (std::size_t j = 0; j < l.h; ++j) {
      if (dact[j] == 0.0) continue;
      double* gw = g.data() + l.w1 + j * l.d;
      for (std::size_t f = 0; f < l.d; ++f) gw[f] += dact[j] * x[f];
      g[l.b1 + j] += dact[j];
    }
  }
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (auto& v : g) v *= scale;
}

}  // namespace

FlatParams gradient(const ModelShape& shape, std::span<const double> params, const Dataset& d,
                    std::span<const std::size_t> rows) {
  const Layout l(shape);
  check_data(l, params, d);
  if (rows.empty()) throw std::invalid_argument("gradient over an empty batch");
  for (std::size_t r : rows) {
    if (r >= d.size()) throw std::out_of_range("batch row out of range");
  }
  FlatParams g(l.total);
  accumulate_gradient(l, params, d, rows, g);
  return g;
}

FlatParams gradient(const ModelShape& shape, std::span<const double> params, const Dataset& d) {
  std::vector<std::size_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return gradient(shape, params, d, rows);
}

int predict(const ModelShape& shape, std::span<const double> params, std::span<const double> x) {
  const Layout l(shape);
  Scratch s(l);
  forward_sample(l, params, x, s);
  return static_cast<int>(std::max_element(s.logits.begin(), s.logits.end()) - s.logits.begin());
}

std::size_t count_correct(const ModelShape& shape, std::span<const double> params, const Dataset& d) {
  const Layout l(shape);
  check_data(l, params, d);
  Scratch s(l);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    forward_sample(l, params, d.row(i), s);
    const auto best = std::max_element(s.logits.begin(), s.logits.end()) - s.logits.begin();
    if (best == d.labels[i]) ++hits;
  }
  return hits;
}

void sgd_epochs(std::span<double> params, std::size_t n_samples, const SgdConfig& cfg, std::uint64_t seed,
                const BatchGradient& grad) {
  if (cfg.tau < 1) throw std::invalid_argument("tau must be at least 1");
  if (!(cfg.gamma >= 0.0)) throw std::invalid_argument("gamma must be non-negative");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (n_samples == 0) throw std::invalid_argument("sgd on an empty dataset");
  const std::size_t batch = std::min(static_cast<std::size_t>(cfg.batch_size), n_samples);

  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> g(params.size());
  Rng rng(seed);
  for (int epoch = 0; epoch < cfg.tau; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n_samples; start += batch) {
      const std::size_t stop = std::min(start + batch, n_samples);
      grad(params, std::span<const std::size_t>(order).subspan(start, stop - start), g);
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.gamma * g[i];
    }
  }
}

FlatParams sgd_epochs(const ModelShape& shape, FlatParams params, const Dataset& d, const SgdConfig& cfg,
                      std::uint64_t seed) {
  const Layout l(shape);
  check_data(l, params, d);
  sgd_epochs(params, d.size(), cfg, seed,
             [&](std::span<const double> p, std::span<const std::size_t> rows, std::span<double> out) {
               accumulate_gradient(l, p, d, rows, out);
             });
  return params;
}

void write_flat_params(std::ostream& os, std::span<const double> params) {
  auto put64 = [&](std::uint64_t v) {
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
    os.write(bytes, 8);
  };
  put64(params.size());
  for (double v : params) put64(std::bit_cast<std::uint64_t>(v));
}

FlatParams read_flat_params(std::istream& is) {
  auto get64 = [&]() {
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("flat params: truncated stream");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= std::uint64_t{bytes[b]} << (8 * b);
    return v;
  };
  const std::uint64_t n = get64();
  FlatParams out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(std::bit_cast<double>(get64()));
  return out;
}

}  // namespace dfca
