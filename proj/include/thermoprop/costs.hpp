#pragma once

// Physical-unit energy accounting: analog symmetric training step versus a
// digital back-propagation step.

#include <utility>
#include <vector>

namespace thermoprop {

struct PhysicalParams {
  double kb_t = 4.14e-21;   // joules at 300 K
  double lambda_star = 0.1; // dimensionless stiffness
  double n_cells = 1.0;
  double c_init = 1.0;      // per-cell init constant, carried for the report
  double n_mac = 1.0;       // multiply-accumulates per digital step
  double e_mac = 1e-11;     // joules per MAC
};

struct CostReport {
  PhysicalParams params;
  double analog_joules = 0.0;
  double per_cell_equilibration_joules = 0.0;  // (kb_t / 2 lambda) c_init
  double digital_joules = 0.0;
  double ratio = 0.0;      // analog / digital
  double advantage = 0.0;  // digital / analog
};

// Three equilibrations (free, +beta, -beta): 3 n_cells kb_t / lambda_star.
double analog_step_energy(const PhysicalParams& p);

// n_mac * e_mac; n_mac = 0 is allowed (degenerate).
double digital_step_energy(const PhysicalParams& p);

CostReport advantage_ratio(const PhysicalParams& p);

// Representative large-array operating point used by the costs report.
PhysicalParams representative_params();

// MAC count of the matched digital baseline for one sample:
// ~ 6 * sum over couplings of k (d_m + d_m') (forward + backward).
double matched_mac_count(int k, const std::vector<std::pair<int, int>>& dims);

}  // namespace thermoprop
