#pragma once

// Exact gradient of the equilibrium readout loss via implicit
// differentiation, a finite-difference fallback oracle, and gradient
// comparison metrics.

#include <optional>

#include "thermoprop/eqprop.hpp"

namespace thermoprop {

struct ComparisonReport {
  // Null when either vector is zero (cosine undefined).
  std::optional<double> cosine;
  double rel_l2_error = 0.0;
  std::optional<double> coupling_cosine;
  std::optional<double> bias_cosine;
};

// Solves H z = b at the free-phase equilibrium and returns -M z.
// Requires free_eq converged (exact-equilibrium mode); fails when H is not
// positive definite.
GradientEstimate oracle_implicit(const SubstrateSpec& spec,
                                 const ReadoutCost& cost,
                                 const EquilibriumResult& free_eq);

// Central finite difference of theta -> C([x_star(theta)]_O), re-relaxing to
// tight tolerance for each perturbation.
GradientEstimate oracle_fd(const SubstrateSpec& spec, const ReadoutCost& cost,
                           const Vec& y_tilde, double sigma,
                           const RelaxationConfig& cfg, double fd_step);

ComparisonReport compare(const SubstrateSpec& spec, const GradientEstimate& a,
                         const GradientEstimate& b);

}  // namespace thermoprop
