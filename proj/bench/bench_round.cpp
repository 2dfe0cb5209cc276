// Times one DFCA round with the OpenMP kernels against the serial
// reference, on the default desk-scale setup.

#include <chrono>
#include <cstdio>

#include "dfca/experiment.hpp"
#include "dfca/seed.hpp"
#include <omp.h>

namespace {

template <class F>
double seconds(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  dfca::ExperimentConfig cfg;
  cfg.n_clients = argc > 1 ? std::atoi(argv[1]) : 50;
  cfg.topology_p = 0.3;
  cfg.on_disconnected = dfca::DisconnectedPolicy::proceed;
  const int rounds = argc > 2 ? std::atoi(argv[2]) : 5;

  const auto setup = dfca::build_setup(cfg, 0);
  dfca::Hyperparams hp;
  hp.sgd = dfca::SgdConfig{cfg.gamma, cfg.tau, cfg.batch_size};

  auto time_path = [&](bool reference, dfca::Execution exec) {
    auto states = setup.states;
    hp.execution = exec;
    return seconds([&] {
      for (int t = 0; t < rounds; ++t) {
        auto plan = dfca::RoundPlan::everyone(cfg.n_clients);
        plan.round_seed = dfca::derive_seed(1, t);
        if (reference) {
          dfca::reference::run_round(states, setup.topology, setup.mixing, plan, hp);
        } else {
          dfca::run_round(states, setup.topology, setup.mixing, plan, hp);
        }
      }
    });
  };

  std::printf("clients=%d rounds=%d threads=%d\n", cfg.n_clients, rounds, omp_get_max_threads());
  const double ref = time_path(true, dfca::Execution::serial);
  const double ser = time_path(false, dfca::Execution::serial);
  const double par = time_path(false, dfca::Execution::parallel);
  std::printf("reference serial : %8.3f s\n", ref);
  std::printf("kernels serial   : %8.3f s\n", ser);
  std::printf("kernels parallel : %8.3f s  (x%.2f vs reference)\n", par, ref / par);
  return 0;
}
