#include "thermoprop/eqprop.hpp"

#include <cmath>

namespace thermoprop {

Vec nudge_gradient(const SubstrateSpec& spec, const ReadoutCost& cost,
                   const Vec& x, double beta) {
  const auto& p = spec.partition;
  if (cost.target.size() != p.output_dim)
    throw SpecError("readout cost target must have length output_dim");
  Vec g = Vec::Zero(spec.dim());
  const int oo = p.input_dim + p.hidden_dim;
  g.segment(oo, p.output_dim) =
      beta * cost.grad(x.segment(oo, p.output_dim));
  return g;
}

EquilibriumResult nudged_phase(const SubstrateSpec& spec,
                               const ReadoutCost& cost, const Clamp& clamp,
                               const EquilibriumResult& free_eq, double beta,
                               const RelaxationConfig& cfg) {
  ExtraGrad nudge = [&spec, &cost, beta](const Vec& x) {
    return nudge_gradient(spec, cost, x, beta);
  };
  return relax(spec, clamp, free_eq.state, cfg, nudge);
}

GradientEstimate estimate_one_sided(const SubstrateSpec& spec,
                                    const ReadoutCost& cost, const Clamp& clamp,
                                    const EquilibriumResult& free_eq,
                                    double beta, const RelaxationConfig& cfg) {
  if (beta <= 0.0) throw SpecError("one-sided estimator needs beta > 0");
  const EquilibriumResult nudged =
      nudged_phase(spec, cost, clamp, free_eq, beta, cfg);
  GradientEstimate est;
  est.values = (grad_theta(spec, nudged.time_avg_state).values -
                grad_theta(spec, free_eq.time_avg_state).values) /
               beta;
  est.tag = EstimatorTag::one_sided;
  est.beta = beta;
  return est;
}

GradientEstimate estimate_symmetric(const SubstrateSpec& spec,
                                    const ReadoutCost& cost, const Clamp& clamp,
                                    const EquilibriumResult& free_eq,
                                    double beta, const RelaxationConfig& cfg) {
  if (beta <= 0.0) throw SpecError("symmetric estimator needs beta > 0");
  RelaxationConfig cfg_minus = cfg;
  cfg_minus.rng_seed = cfg.rng_seed + 0x9e3779b97f4a7c15ull;  // independent noise
  const EquilibriumResult plus =
      nudged_phase(spec, cost, clamp, free_eq, beta, cfg);
  const EquilibriumResult minus =
      nudged_phase(spec, cost, clamp, free_eq, -beta, cfg_minus);
  GradientEstimate est;
  est.values = (grad_theta(spec, plus.time_avg_state).values -
                grad_theta(spec, minus.time_avg_state).values) /
               (2.0 * beta);
  est.tag = EstimatorTag::symmetric;
  est.beta = beta;
  return est;
}

CouplingUpdate local_coupling_update(const BlockPartition& partition,
                                     const LowRankCoupling& coupling,
                                     const Vec& x_a, const Vec& x_b,
                                     double beta, double prefactor_scale) {
  if (beta == 0.0) throw SpecError("local_coupling_update needs beta != 0");
  const int om = partition.module_offset(coupling.source_module);
  const int omp = partition.module_offset(coupling.target_module);
  const auto am = x_a.segment(om, coupling.u.rows());
  const auto amp = x_a.segment(omp, coupling.v.rows());
  const auto bm = x_b.segment(om, coupling.u.rows());
  const auto bmp = x_b.segment(omp, coupling.v.rows());
  const double pref = prefactor_scale / beta;
  CouplingUpdate upd;
  upd.delta_u = pref * (am * (amp.transpose() * coupling.v) -
                        bm * (bmp.transpose() * coupling.v));
  upd.delta_v = pref * (amp * (am.transpose() * coupling.u) -
                        bmp * (bm.transpose() * coupling.u));
  return upd;
}

double optimal_beta_sym(double c_v, double m_norm, double k2_sym,
                        double beta_phys, double lambda_star, double tau) {
  if (c_v <= 0.0 || m_norm <= 0.0 || k2_sym <= 0.0 || beta_phys <= 0.0 ||
      lambda_star <= 0.0 || tau <= 0.0)
    throw SpecError("optimal_beta_sym requires positive inputs");
  const double num = c_v * m_norm * m_norm;
  const double den = k2_sym * k2_sym * beta_phys * lambda_star * lambda_star * tau;
  return std::pow(num / den, 1.0 / 6.0);
}

}  // namespace thermoprop
