#pragma once

// Explicit Euler-Maruyama relaxation to clamped equilibria, deterministic or
// at finite physical temperature, with optional time-averaged readout.

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "thermoprop/substrate.hpp"

namespace thermoprop {

struct RelaxationConfig {
  double step_size = 0.0;  // <= 0: auto, 0.1 / lambda_max estimated at start
  int max_steps = 300;
  double beta_phys = std::numeric_limits<double>::infinity();  // inf = deterministic
  double convergence_tol = 0.0;  // 0 = always run max_steps
  double readout_window = 0.0;   // tau; 0 = last-state readout
  std::uint64_t rng_seed = 0;
  bool record_trajectory = false;
};

struct TrajectoryPoint {
  int step;
  double energy;
  double grad_norm;
};

struct EquilibriumResult {
  Vec state;
  Vec time_avg_state;  // equals state when readout_window == 0
  double final_grad_norm = 0.0;
  int steps_used = 0;
  bool converged = false;
  std::vector<TrajectoryPoint> trajectory;  // filled when record_trajectory
};

struct Clamp {
  std::vector<int> indices;
  Vec values;
};

// Gradient of an additional (nudge) energy term; adds into the total force.
using ExtraGrad = std::function<Vec(const Vec&)>;

// Gradient flow x <- x - step * (grad E + extra) + sqrt(2 step / beta_phys) xi
// on free coordinates; clamped coordinates never move.
EquilibriumResult relax(const SubstrateSpec& spec, const Clamp& clamp,
                        const Vec& init, const RelaxationConfig& cfg,
                        const ExtraGrad& extra = {});

// Clamps the input block to y_tilde and the sigma-conditioning coordinate to
// log(sigma), then relaxes from the zero state (or warm_start if given).
EquilibriumResult free_phase(const SubstrateSpec& spec, const Vec& y_tilde,
                             double sigma, const RelaxationConfig& cfg,
                             const Vec* warm_start = nullptr);

Clamp phase_clamp(const SubstrateSpec& spec, const Vec& y_tilde, double sigma);

// Largest Hessian eigenvalue at x over the free set (power iteration).
double estimate_lambda_max(const SubstrateSpec& spec, const Vec& x,
                           const std::vector<int>& free);

void write_trajectory_csv(const EquilibriumResult& res, const std::string& path);

}  // namespace thermoprop
