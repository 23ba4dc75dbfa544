#include "thermoprop/oracle.hpp"

#include <cmath>

namespace thermoprop {

GradientEstimate oracle_implicit(const SubstrateSpec& spec,
                                 const ReadoutCost& cost,
                                 const EquilibriumResult& free_eq) {
  if (!free_eq.converged)
    throw NumericalError("oracle_implicit requires a converged free phase");
  const auto& p = spec.partition;
  const Vec& x = free_eq.state;  // exact state, not a time average
  const auto free = free_indices(spec);

  const Mat h = hessian_free(spec, x, free);
  Eigen::LLT<Mat> llt(h);
  if (llt.info() != Eigen::Success)
    throw NumericalError(
        "oracle_implicit: free Hessian is not positive definite");

  Vec b = Vec::Zero(free.size());
  const int oo = p.input_dim + p.hidden_dim;
  const Vec grad_c = cost.grad(x.segment(oo, p.output_dim));
  for (std::size_t j = 0; j < free.size(); ++j)
    if (free[j] >= oo) b[j] = grad_c[free[j] - oo];

  const Vec z = llt.solve(b);
  GradientEstimate est;
  est.values = -(mixed_second(spec, x, free) * z);
  est.tag = EstimatorTag::oracle_implicit;
  est.beta = 0.0;
  return est;
}

GradientEstimate oracle_fd(const SubstrateSpec& spec, const ReadoutCost& cost,
                           const Vec& y_tilde, double sigma,
                           const RelaxationConfig& cfg, double fd_step) {
  if (fd_step <= 0.0) throw SpecError("fd_step must be positive");
  const auto& p = spec.partition;
  const int oo = p.input_dim + p.hidden_dim;
  const auto loss = [&](const SubstrateSpec& s) {
    const EquilibriumResult eq = free_phase(s, y_tilde, sigma, cfg);
    if (!eq.converged)
      throw NumericalError("oracle_fd: free phase failed to converge");
    return cost.value(eq.state.segment(oo, p.output_dim));
  };
  const Vec theta = spec.get_theta();
  GradientEstimate est;
  est.values.resize(theta.size());
  for (int i = 0; i < theta.size(); ++i) {
    Vec tp = theta, tm = theta;
    tp[i] += fd_step;
    tm[i] -= fd_step;
    est.values[i] =
        (loss(spec.with_theta(tp)) - loss(spec.with_theta(tm))) /
        (2.0 * fd_step);
  }
  est.tag = EstimatorTag::oracle_fd;
  est.beta = 0.0;
  return est;
}

namespace {

std::optional<double> cosine_of(const Vec& a, const Vec& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return a.dot(b) / (na * nb);
}

}  // namespace

ComparisonReport compare(const SubstrateSpec& spec, const GradientEstimate& a,
                         const GradientEstimate& b) {
  if (a.values.size() != b.values.size() ||
      a.values.size() != spec.param_count())
    throw SpecError("compare: parameter vectors must share the canonical order");
  ComparisonReport rep;
  rep.cosine = cosine_of(a.values, b.values);
  const double nb = b.values.norm();
  rep.rel_l2_error =
      nb > 0.0 ? (a.values - b.values).norm() / nb : (a.values - b.values).norm();

  const int nbias = static_cast<int>(spec.trainable_bias.size());
  const int ncoup = spec.param_count() - nbias;
  if (ncoup > 0)
    rep.coupling_cosine =
        cosine_of(a.values.head(ncoup), b.values.head(ncoup));
  if (nbias > 0)
    rep.bias_cosine = cosine_of(a.values.tail(nbias), b.values.tail(nbias));
  return rep;
}

}  // namespace thermoprop
