#include "dfca/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "dfca/baselines.hpp"
#include "dfca/seed.hpp"

namespace dfca {

namespace {

std::vector<Dataset> client_datasets(const ExperimentConfig& cfg, std::uint64_t data_seed) {
  std::vector<Dataset> out;
  out.reserve(static_cast<std::size_t>(cfg.n_clients));
  if (cfg.data_source == DataSource::synthetic) {
    SyntheticSpec spec = cfg.data;
    spec.center_seed = derive_seed(data_seed, 0);
    for (int i = 0; i < cfg.n_clients; ++i) {
      out.push_back(generate_rotated_synthetic(spec, cfg.k, i % cfg.k, derive_seed(data_seed, 1 + i)));
    }
    return out;
  }

  const Dataset pool = load_idx_pair(cfg.idx_images, cfg.idx_labels);
  const auto want = static_cast<std::size_t>(cfg.data.samples_per_client);
  if (pool.size() < want) {
    throw ConfigError("data.samples_per_client", "IDX pool holds only " + std::to_string(pool.size()) + " samples");
  }
  std::vector<std::size_t> all(pool.size());
  for (std::size_t s = 0; s < all.size(); ++s) all[s] = s;
  for (int i = 0; i < cfg.n_clients; ++i) {
    const int cluster = i % cfg.k;
    std::vector<std::size_t> rows;
    Rng rng(derive_seed(data_seed, 1 + i));
    std::sample(all.begin(), all.end(), std::back_inserter(rows), want, rng);
    Dataset d;
    d.dim = pool.dim;
    d.distribution_id = cluster;
    for (std::size_t r : rows) d.push_back(rotate_image(pool.row(r), cluster * (360 / cfg.k)), pool.labels[r]);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

ExperimentSetup build_setup(const ExperimentConfig& cfg, std::uint64_t master_seed) {
  validate(cfg);
  const std::uint64_t topo_seed = cfg.topology_seed >= 0 ? static_cast<std::uint64_t>(cfg.topology_seed)
                                                         : derive_seed(master_seed, Stream::topology);
  Topology topology = generate_erdos_renyi(cfg.n_clients, cfg.topology_p, topo_seed);
  MixingMatrix mixing = build_mixing_matrix(topology, cfg.mixing_kind);

  const std::uint64_t data_seed = derive_seed(master_seed, Stream::data);
  auto full = client_datasets(cfg, data_seed);
  std::vector<Dataset> train;
  Evaluation eval;
  for (std::size_t i = 0; i < full.size(); ++i) {
    auto [tr, te] = train_test_split(full[i], cfg.test_fraction, derive_seed(data_seed, Stream::split, i));
    eval.truth.push_back(full[i].distribution_id);
    train.push_back(std::move(tr));
    eval.test_sets.push_back(std::move(te));
  }
  for (const auto& d : train) {
    for (int y : d.labels) {
      if (y >= cfg.data.n_classes) throw ConfigError("data.n_classes", "label " + std::to_string(y) + " out of range");
    }
  }

  const ModelShape shape{static_cast<int>(train.front().dim), cfg.hidden, cfg.data.n_classes};
  const int model_k = cfg.algorithm == Algorithm::davg ? 1 : cfg.k;
  const InitMode init = cfg.algorithm == Algorithm::ifca ? InitMode::global : cfg.init_mode;
  auto states = initialize(model_k, init, shape, derive_seed(master_seed, Stream::init), std::move(train));
  return ExperimentSetup{std::move(topology), std::move(mixing), std::move(states), std::move(eval)};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::uint64_t master_seed, Execution exec) {
  auto setup = build_setup(cfg, master_seed);
  ExperimentResult result;
  result.connected = is_connected(setup.topology);
  result.k = setup.states.front().k();
  if (!result.connected && cfg.algorithm != Algorithm::ifca && cfg.on_disconnected == DisconnectedPolicy::abort) {
    throw DisconnectedGraphError("sampled topology (n=" + std::to_string(cfg.n_clients) +
                                 ", p=" + format_double(cfg.topology_p) +
                                 ") is disconnected; set topology.on_disconnected=proceed to run anyway");
  }

  Hyperparams hp;
  hp.sgd = SgdConfig{cfg.gamma, cfg.tau, cfg.batch_size};
  hp.execution = exec;
  CentralServerState server{setup.states.front().models};
  const std::uint64_t rounds_seed = derive_seed(master_seed, Stream::rounds);

  for (int t = 0; t < cfg.rounds; ++t) {
    const std::uint64_t round_seed = derive_seed(rounds_seed, t);
    RoundOutcome outcome;
    if (cfg.algorithm == Algorithm::ifca) {
      outcome = ifca_round(server, setup.states, hp, round_seed);
    } else {
      RoundPlan plan;
      plan.participants = sample_participants(cfg.n_clients, cfg.participation_fraction, derive_seed(round_seed, 3));
      plan.mode = cfg.aggregation_mode;
      plan.mixing = cfg.mixing_kind;
      plan.receive_nonparticipants = cfg.receive_nonparticipants;
      plan.round_seed = round_seed;
      outcome = cfg.algorithm == Algorithm::davg
                    ? decentralized_avg_round(setup.states, setup.topology, setup.mixing, plan, hp)
                    : run_round(setup.states, setup.topology, setup.mixing, plan, hp);
    }
    result.trace.push_back(compute_round_metrics(setup.states, setup.eval, t, outcome, exec));
  }
  result.stabilization_round = stabilization_round(result.trace);
  return result;
}

void write_trace_csv(const std::filesystem::path& path, const ExperimentResult& result) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trace_header(out, result.k);
  for (const auto& m : result.trace) write_trace_row(out, m);
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

std::filesystem::path output_root(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("DFCA_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
  return cfg.output_dir;
}

namespace {

nlohmann::json stat_json(const std::vector<double>& values) {
  const auto s = mean_std(values);
  return {{"mean", s.mean}, {"std", s.std}};
}

}  // namespace

RunOutput cmd_run(const ExperimentConfig& cfg, Execution exec) {
  validate(cfg);
  RunOutput out;
  out.directory = output_root(cfg) / cfg.name;
  std::filesystem::create_directories(out.directory);
  {
    std::ofstream snapshot(out.directory / "config.txt", std::ios::binary);
    snapshot << to_text(cfg);
  }

  nlohmann::json seeds = nlohmann::json::array();
  std::vector<double> test_acc, test_acc_client, clust_acc, f_global, stab;
  for (int s = 0; s < cfg.n_seeds; ++s) {
    const std::uint64_t master = cfg.seed + static_cast<std::uint64_t>(s);
    const auto result = run_experiment(cfg, master, exec);
    const auto trace_path = out.directory / ("seed_" + std::to_string(s)) / "trace.csv";
    write_trace_csv(trace_path, result);
    out.traces.push_back(trace_path);

    nlohmann::json entry = {{"seed", s},
                            {"master_seed", master},
                            {"connected", result.connected},
                            {"stabilization_round", result.stabilization_round},
                            {"stabilized", result.stabilization_round < static_cast<int>(result.trace.size())}};
    if (!result.trace.empty()) {
      const auto& last = result.trace.back();
      entry["final_test_acc"] = last.test_accuracy;
      entry["final_test_acc_client_mean"] = last.test_accuracy_client_mean;
      entry["final_clustering_acc"] = last.clustering_accuracy;
      entry["final_f_global"] = last.f_global;
      test_acc.push_back(last.test_accuracy);
      test_acc_client.push_back(last.test_accuracy_client_mean);
      clust_acc.push_back(last.clustering_accuracy);
      f_global.push_back(last.f_global);
    }
    stab.push_back(result.stabilization_round);
    seeds.push_back(entry);
  }
  out.final_test_accuracy = test_acc;

  nlohmann::json summary = {{"name", cfg.name},
                            {"algorithm", to_string(cfg.algorithm)},
                            {"n_seeds", cfg.n_seeds},
                            {"rounds", cfg.rounds},
                            {"seeds", seeds},
                            {"stabilization_round", stat_json(stab)}};
  if (!test_acc.empty()) {
    summary["final_test_acc"] = stat_json(test_acc);
    summary["final_test_acc_client_mean"] = stat_json(test_acc_client);
    summary["final_clustering_acc"] = stat_json(clust_acc);
    summary["final_f_global"] = stat_json(f_global);
  }
  out.summary = out.directory / "summary.json";
  std::ofstream js(out.summary, std::ios::binary);
  js << summary.dump(2) << '\n';
  return out;
}

std::filesystem::path cmd_sweep(const ExperimentConfig& cfg, const std::string& key,
                                const std::vector<std::string>& values, Execution exec) {
  if (!is_numeric_key(key)) throw ConfigError(key, "not a sweepable numeric key");
  if (values.empty()) throw ConfigError(key, "sweep needs at least one value");
  validate(cfg);
  const auto base = output_root(cfg) / cfg.name;
  std::vector<std::pair<std::string, MeanStd>> rows;
  for (const auto& v : values) {
    ExperimentConfig point = cfg;
    set_config_value(point, key, v);
    point.name = cfg.name + "/" + key + "=" + v;
    const auto run = cmd_run(point, exec);
    rows.emplace_back(v, mean_std(run.final_test_accuracy));
  }
  std::filesystem::create_directories(base);
  const auto path = base / ("sweep_" + key + ".csv");
  std::ofstream out(path, std::ios::binary);
  out << "value,mean,std\n";
  for (const auto& [v, s] : rows) out << v << ',' << format_double(s.mean) << ',' << format_double(s.std) << '\n';
  return path;
}

}  // namespace dfca
