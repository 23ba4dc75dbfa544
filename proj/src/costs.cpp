#include "thermoprop/costs.hpp"

#include <stdexcept>

namespace thermoprop {

namespace {
void check_positive(const PhysicalParams& p, bool allow_zero_mac) {
  if (p.kb_t <= 0.0 || p.lambda_star <= 0.0 || p.n_cells <= 0.0 ||
      p.c_init <= 0.0 || p.e_mac <= 0.0)
    throw std::invalid_argument("physical parameters must be positive");
  if (p.n_mac < 0.0 || (!allow_zero_mac && p.n_mac == 0.0))
    throw std::invalid_argument("n_mac must be positive");
}
}  // namespace

double analog_step_energy(const PhysicalParams& p) {
  check_positive(p, true);
  return 3.0 * p.n_cells * p.kb_t / p.lambda_star;
}

double digital_step_energy(const PhysicalParams& p) {
  check_positive(p, true);
  return p.n_mac * p.e_mac;
}

CostReport advantage_ratio(const PhysicalParams& p) {
  check_positive(p, false);
  CostReport r;
  r.params = p;
  r.analog_joules = analog_step_energy(p);
  r.per_cell_equilibration_joules = p.kb_t / (2.0 * p.lambda_star) * p.c_init;
  r.digital_joules = digital_step_energy(p);
  r.ratio = r.analog_joules / r.digital_joules;
  r.advantage = r.digital_joules / r.analog_joules;
  return r;
}

PhysicalParams representative_params() {
  PhysicalParams p;
  p.kb_t = 4.14e-21;
  p.lambda_star = 0.1;
  p.n_cells = 2.7e10;
  p.c_init = 1.0;
  p.n_mac = 1e6;
  p.e_mac = 1e-11;
  return p;
}

double matched_mac_count(int k, const std::vector<std::pair<int, int>>& dims) {
  double macs = 0.0;
  for (const auto& [dm, dmp] : dims) macs += double(k) * (dm + dmp);
  return 6.0 * macs;
}

}  // namespace thermoprop
