#pragma once

// Two-phase Equilibrium Propagation: DSM readout cost, nudged relaxations,
// one-sided and symmetric difference-quotient estimators, and the local
// coupling-plane update.

#include "thermoprop/dynamics.hpp"
#include "thermoprop/substrate.hpp"

namespace thermoprop {

// C(x_O) = (weight / 2) ||x_O - target||^2, weight = sigma^2.
struct ReadoutCost {
  Vec target;
  double weight = 1.0;

  Vec grad(const Vec& x_output) const {
    return weight * (x_output - target);
  }
  double value(const Vec& x_output) const {
    return 0.5 * weight * (x_output - target).squaredNorm();
  }
};

// Gradient of beta * C(x_O) embedded in the full state, zeros off-output.
Vec nudge_gradient(const SubstrateSpec& spec, const ReadoutCost& cost,
                   const Vec& x, double beta);

// Relaxes the nudged phase (energy E + beta C) warm-started from the free
// phase and returns the phase readout (time-averaged when tau > 0).
EquilibriumResult nudged_phase(const SubstrateSpec& spec,
                               const ReadoutCost& cost, const Clamp& clamp,
                               const EquilibriumResult& free_eq, double beta,
                               const RelaxationConfig& cfg);

GradientEstimate estimate_one_sided(const SubstrateSpec& spec,
                                    const ReadoutCost& cost, const Clamp& clamp,
                                    const EquilibriumResult& free_eq,
                                    double beta, const RelaxationConfig& cfg);

GradientEstimate estimate_symmetric(const SubstrateSpec& spec,
                                    const ReadoutCost& cost, const Clamp& clamp,
                                    const EquilibriumResult& free_eq,
                                    double beta, const RelaxationConfig& cfg);

struct CouplingUpdate {
  Mat delta_u;
  Mat delta_v;
};

// (1/beta) [x_a^(m) (x_a^(m') V) - x_b^(m) (x_b^(m') V)] without forming the
// outer products; touches only the two module blocks and this coupling.
CouplingUpdate local_coupling_update(const BlockPartition& partition,
                                     const LowRankCoupling& coupling,
                                     const Vec& x_a, const Vec& x_b,
                                     double beta,
                                     double prefactor_scale = 1.0);

// beta_dagger_sym = (c_v * m_norm^2 / (k2_sym^2 beta_phys lambda_star^2 tau))^(1/6)
double optimal_beta_sym(double c_v, double m_norm, double k2_sym,
                        double beta_phys, double lambda_star, double tau);

}  // namespace thermoprop
