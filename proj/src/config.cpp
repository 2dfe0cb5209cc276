#include "dfca/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "dfca/metrics.hpp"

namespace dfca {

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::dfca: return "dfca";
    case Algorithm::ifca: return "ifca";
    case Algorithm::davg: return "davg";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected a number, got '" + text + "'");
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  // from_chars for double is missing from older libstdc++; strtod is locale-bound but fine for "C".
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

template <class F>
auto rethrow_as_config(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

struct KeySpec {
  Setter set;
  bool numeric;
};

const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table = {
      {"name", {[](auto& c, auto&, auto& v) { c.name = v; }, false}},
      {"algorithm",
       {[](auto& c, auto& k, auto& v) {
          if (v == "dfca") c.algorithm = Algorithm::dfca;
          else if (v == "ifca") c.algorithm = Algorithm::ifca;
          else if (v == "davg") c.algorithm = Algorithm::davg;
          else throw ConfigError(k, "expected dfca, ifca or davg, got '" + v + "'");
        },
        false}},
      {"n_clients", {[](auto& c, auto& k, auto& v) { c.n_clients = parse_number<int>(k, v); }, true}},
      {"k", {[](auto& c, auto& k, auto& v) { c.k = parse_number<int>(k, v); }, true}},
      {"topology.p", {[](auto& c, auto& k, auto& v) { c.topology_p = parse_real(k, v); }, true}},
      {"topology.seed", {[](auto& c, auto& k, auto& v) { c.topology_seed = parse_number<long long>(k, v); }, true}},
      {"topology.on_disconnected",
       {[](auto& c, auto& k, auto& v) {
          if (v == "abort") c.on_disconnected = DisconnectedPolicy::abort;
          else if (v == "proceed") c.on_disconnected = DisconnectedPolicy::proceed;
          else throw ConfigError(k, "expected abort or proceed, got '" + v + "'");
        },
        false}},
      {"init_mode", {[](auto& c, auto& k, auto& v) { c.init_mode = rethrow_as_config(k, [&] { return parse_init_mode(v); }); }, false}},
      {"aggregation_mode",
       {[](auto& c, auto& k, auto& v) {
          c.aggregation_mode = rethrow_as_config(k, [&] { return parse_aggregation_mode(v); });
        },
        false}},
      {"mixing_kind",
       {[](auto& c, auto& k, auto& v) { c.mixing_kind = rethrow_as_config(k, [&] { return parse_mixing_kind(v); }); },
        false}},
      {"participation_fraction", {[](auto& c, auto& k, auto& v) { c.participation_fraction = parse_real(k, v); }, true}},
      {"receive_nonparticipants", {[](auto& c, auto& k, auto& v) { c.receive_nonparticipants = parse_bool(k, v); }, false}},
      {"gamma", {[](auto& c, auto& k, auto& v) { c.gamma = parse_real(k, v); }, true}},
      {"tau", {[](auto& c, auto& k, auto& v) { c.tau = parse_number<int>(k, v); }, true}},
      {"batch_size", {[](auto& c, auto& k, auto& v) { c.batch_size = parse_number<int>(k, v); }, true}},
      {"T", {[](auto& c, auto& k, auto& v) { c.rounds = parse_number<int>(k, v); }, true}},
      {"model.hidden", {[](auto& c, auto& k, auto& v) { c.hidden = parse_number<int>(k, v); }, true}},
      {"data.source",
       {[](auto& c, auto& k, auto& v) {
          if (v == "synthetic") c.data_source = DataSource::synthetic;
          else if (v == "idx") c.data_source = DataSource::idx;
          else throw ConfigError(k, "expected synthetic or idx, got '" + v + "'");
        },
        false}},
      {"data.n_classes", {[](auto& c, auto& k, auto& v) { c.data.n_classes = parse_number<int>(k, v); }, true}},
      {"data.dim", {[](auto& c, auto& k, auto& v) { c.data.dim = parse_number<int>(k, v); }, true}},
      {"data.samples_per_client",
       {[](auto& c, auto& k, auto& v) { c.data.samples_per_client = parse_number<int>(k, v); }, true}},
      {"data.class_separation", {[](auto& c, auto& k, auto& v) { c.data.class_separation = parse_real(k, v); }, true}},
      {"data.noise_std", {[](auto& c, auto& k, auto& v) { c.data.noise_std = parse_real(k, v); }, true}},
      {"data.test_fraction", {[](auto& c, auto& k, auto& v) { c.test_fraction = parse_real(k, v); }, true}},
      {"data.idx_images", {[](auto& c, auto&, auto& v) { c.idx_images = v; }, false}},
      {"data.idx_labels", {[](auto& c, auto&, auto& v) { c.idx_labels = v; }, false}},
      {"seed", {[](auto& c, auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); }, true}},
      {"n_seeds", {[](auto& c, auto& k, auto& v) { c.n_seeds = parse_number<int>(k, v); }, true}},
      {"output_dir", {[](auto& c, auto&, auto& v) { c.output_dir = v; }, false}},
  };
  return table;
}

}  // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = key_table();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError(key, "unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

bool is_numeric_key(const std::string& key) {
  const auto& table = key_table();
  const auto it = table.find(key);
  return it != table.end() && it->second.numeric;
}

ExperimentConfig parse_config(std::istream& is, std::string name) {
  ExperimentConfig cfg;
  cfg.name = std::move(name);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    }
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  return parse_config(in, path.stem().string());
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("", "override '" + o + "' is not key=value");
    set_config_value(cfg, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* key, const std::string& msg) {
    if (!ok) throw ConfigError(key, msg);
  };
  require(!c.name.empty(), "name", "must not be empty");
  require(c.n_clients >= 1, "n_clients", "must be at least 1");
  require(c.k >= 1, "k", "must be at least 1");
  require(c.k <= 8, "k", "at most 8 clusters are supported");
  require(c.topology_p >= 0.0 && c.topology_p <= 1.0, "topology.p", "must lie in [0, 1]");
  require(c.participation_fraction > 0.0 && c.participation_fraction <= 1.0, "participation_fraction",
          "must lie in (0, 1]");
  require(c.gamma >= 0.0, "gamma", "must be non-negative");
  require(c.tau >= 1, "tau", "must be at least 1");
  require(c.batch_size >= 1, "batch_size", "must be at least 1");
  require(c.rounds >= 0, "T", "must be non-negative");
  require(c.hidden >= 0, "model.hidden", "must be non-negative");
  require(c.data.n_classes >= 1, "data.n_classes", "must be positive");
  require(c.data.samples_per_client >= 2, "data.samples_per_client", "must be at least 2");
  require(c.data.class_separation > 0.0, "data.class_separation", "must be positive");
  require(c.data.noise_std > 0.0, "data.noise_std", "must be positive");
  require(c.test_fraction > 0.0 && c.test_fraction < 1.0, "data.test_fraction", "must lie in (0, 1)");
  require(c.n_seeds >= 1, "n_seeds", "must be at least 1");
  require(!c.output_dir.empty(), "output_dir", "must not be empty");
  if (c.data_source == DataSource::synthetic) {
    require(c.k == 1 || c.k == 2 || c.k == 4, "k", "synthetic rotated data supports k in {1, 2, 4}");
    require(c.data.dim >= 2, "data.dim", "must be at least 2");
  } else {
    require(!c.idx_images.empty(), "data.idx_images", "required when data.source=idx");
    require(!c.idx_labels.empty(), "data.idx_labels", "required when data.source=idx");
    require(c.k == 1 || c.k == 2 || c.k == 4, "k", "image rotations support k in {1, 2, 4}");
  }
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream os;
  auto kv = [&](const char* key, const auto& value) { os << key << '=' << value << '\n'; };
  kv("name", c.name);
  kv("algorithm", to_string(c.algorithm));
  kv("n_clients", c.n_clients);
  kv("k", c.k);
  kv("topology.p", format_double(c.topology_p));
  kv("topology.seed", c.topology_seed);
  kv("topology.on_disconnected", c.on_disconnected == DisconnectedPolicy::abort ? "abort" : "proceed");
  kv("init_mode", to_string(c.init_mode));
  kv("aggregation_mode", to_string(c.aggregation_mode));
  kv("mixing_kind", to_string(c.mixing_kind));
  kv("participation_fraction", format_double(c.participation_fraction));
  kv("receive_nonparticipants", c.receive_nonparticipants ? "true" : "false");
  kv("gamma", format_double(c.gamma));
  kv("tau", c.tau);
  kv("batch_size", c.batch_size);
  kv("T", c.rounds);
  kv("model.hidden", c.hidden);
  kv("data.source", c.data_source == DataSource::synthetic ? "synthetic" : "idx");
  kv("data.n_classes", c.data.n_classes);
  kv("data.dim", c.data.dim);
  kv("data.samples_per_client", c.data.samples_per_client);
  kv("data.class_separation", format_double(c.data.class_separation));
  kv("data.noise_std", format_double(c.data.noise_std));
  kv("data.test_fraction", format_double(c.test_fraction));
  kv("data.idx_images", c.idx_images);
  kv("data.idx_labels", c.idx_labels);
  kv("seed", c.seed);
  kv("n_seeds", c.n_seeds);
  kv("output_dir", c.output_dir);
  return os.str();
}

}  // namespace dfca
