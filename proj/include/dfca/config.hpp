#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfca/core.hpp"
#include "dfca/dataset.hpp"
#include "dfca/topology.hpp"

namespace dfca {

enum class Algorithm { dfca, ifca, davg };
enum class DataSource { synthetic, idx };
enum class DisconnectedPolicy { abort, proceed };

const char* to_string(Algorithm a);

/// Flat key/value experiment description. Defaults give the desk-scale
/// synthetic setup: 20 clients, k = 2, ER p = 0.3, 150 rounds.
struct ExperimentConfig {
  std::string name = "experiment";
  Algorithm algorithm = Algorithm::dfca;
  int n_clients = 20;
  int k = 2;

  double topology_p = 0.3;
  long long topology_seed = -1;  // < 0: derived from the master seed
  DisconnectedPolicy on_disconnected = DisconnectedPolicy::abort;

  InitMode init_mode = InitMode::global;
  AggregationMode aggregation_mode = AggregationMode::sequential;
  MixingKind mixing_kind = MixingKind::paper_uniform;
  double participation_fraction = 1.0;
  bool receive_nonparticipants = true;

  double gamma = 0.1;
  int tau = 5;
  int batch_size = 32;
  int rounds = 150;
  int hidden = 32;

  DataSource data_source = DataSource::synthetic;
  SyntheticSpec data;  // center_seed is overwritten per run
  double test_fraction = 0.2;
  std::string idx_images;
  std::string idx_labels;

  std::uint64_t seed = 0;
  int n_seeds = 1;
  std::string output_dir = "runs";
};

/// Error tied to one config key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::invalid_argument(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Sets one key. Throws ConfigError for unknown keys or unparsable values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// `key=value` lines; blank lines and `#` comments are skipped.
ExperimentConfig parse_config(std::istream& is, std::string name = "experiment");

/// Reads a config file; the config name defaults to the file stem.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies `key=value` override strings in order.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides);

/// Range checks on every field. Throws ConfigError naming the field.
void validate(const ExperimentConfig& cfg);

/// True for keys whose values are numbers (and can therefore be swept).
bool is_numeric_key(const std::string& key);

/// Canonical text form, one `key=value` per line, every key present.
std::string to_text(const ExperimentConfig& cfg);

}  // namespace dfca
