#pragma once

// Experiment drivers: gradient agreement (E1), bias-order fits (E2),
// bias-variance sweep with the optimal-beta check and training dynamics (E3).

#include <optional>
#include <string>
#include <vector>

#include "thermoprop/dsm.hpp"
#include "thermoprop/io.hpp"
#include "thermoprop/oracle.hpp"

namespace thermoprop {

struct Preset {
  std::string name;
  SubstrateSpec spec;
  RelaxationConfig replication;  // fixed-budget mode (K = 300, tol = 0)
  RelaxationConfig exact;        // tight-tolerance deterministic mode
  DsmTaskConfig task;
};

// Known presets: "paper-e1", "paper-exact", "desk-small", "desk-beta".
Preset make_preset(const std::string& name);

struct ExperimentConfig {
  std::string preset = "desk-small";
  std::string mode = "exact";  // "exact" | "replication"
  int num_seeds = 10;
  double beta = 0.02;             // estimator nudge for E1 / training
  std::vector<double> beta_grid;  // E2/E3 grid; empty = driver default
  int batch = 4;
  double beta_phys = 1e9;  // stochastic sweep inverse temperature
  double tau = 10.0;          // readout window for the variance sweep
  int train_steps = 60;
  double learning_rate = 1e-2;
  std::uint64_t base_seed = 0;
  int jobs = 1;

  Json to_json() const;
  static ExperimentConfig from_json(const Json& j);  // strict keys
  // jobs is an execution detail, not part of the run identity
  std::string hash() const {
    Json j = to_json();
    j.erase("jobs");
    return config_hash(j);
  }
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;  // in log space
  double r_squared = 0.0;
  double x_min = 0.0, x_max = 0.0;
};

// Least squares on (log x, log y); >= 4 points, all positive.
SlopeFit fit_loglog(const std::vector<std::pair<double, double>>& points);

struct E1Result {
  double one_sided_mean = 0.0, one_sided_std = 0.0;
  double symmetric_mean = 0.0, symmetric_std = 0.0;
  std::vector<SweepRecord> records;
};
E1Result run_e1(const ExperimentConfig& cfg);

struct E2Result {
  SlopeFit one_sided;
  SlopeFit symmetric;
  std::vector<SweepRecord> records;
};
E2Result run_e2(const ExperimentConfig& cfg);

struct E3SweepResult {
  SlopeFit variance_fit;       // log var vs log beta, slope ~ -2
  SlopeFit bias_fit;           // deterministic bias vs beta, slope ~ 2
  std::vector<double> betas;
  std::vector<double> mse;
  double beta_dagger_pred = 0.0;
  double beta_dagger_emp = 0.0;
  bool mse_u_shaped = false;
  std::vector<SweepRecord> records;
};
E3SweepResult run_e3_sweep(const ExperimentConfig& cfg);

struct TrainStepRow {
  int step = 0;
  double loss_eqprop = 0.0;
  double loss_oracle = 0.0;
  double alignment = 0.0;  // cosine(eqprop update, oracle grad at same iterate)
};
struct E3TrainingResult {
  std::vector<TrainStepRow> rows;
  std::vector<SweepRecord> records;
};
E3TrainingResult run_e3_training(const ExperimentConfig& cfg);

std::vector<double> logspace(double lo, double hi, int n);

}  // namespace thermoprop
