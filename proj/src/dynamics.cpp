#include "thermoprop/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace thermoprop {

double estimate_lambda_max(const SubstrateSpec& spec, const Vec& x,
                           const std::vector<int>& free) {
  const Mat h = hessian_free(spec, x, free);
  Vec v = Vec::Ones(h.rows()).normalized();
  double lam = 0.0;
  for (int it = 0; it < 50; ++it) {
    Vec w = h * v;
    lam = v.dot(w);
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
  }
  return lam;
}

EquilibriumResult relax(const SubstrateSpec& spec, const Clamp& clamp,
                        const Vec& init, const RelaxationConfig& cfg,
                        const ExtraGrad& extra) {
  check_state(spec, init);
  if (cfg.max_steps < 1) throw SpecError("max_steps must be >= 1");
  if (cfg.readout_window < 0.0) throw SpecError("readout_window must be >= 0");

  const int d = spec.dim();
  std::vector<bool> clamped(d, false);
  for (std::size_t i = 0; i < clamp.indices.size(); ++i) {
    const int idx = clamp.indices[i];
    if (idx < 0 || idx >= d) throw SpecError("clamp index out of range");
    clamped[idx] = true;
  }
  std::vector<int> free;
  for (int i = 0; i < d; ++i)
    if (!clamped[i]) free.push_back(i);

  Vec x = init;
  for (std::size_t i = 0; i < clamp.indices.size(); ++i)
    x[clamp.indices[i]] = clamp.values[i];

  const double lam_max = estimate_lambda_max(spec, x, free);
  double step = cfg.step_size;
  if (step <= 0.0) step = lam_max > 0.0 ? 0.1 / lam_max : 0.1;
  if (lam_max > 0.0 && step >= 2.0 / lam_max) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "step_size %.3g violates stability bound 2/lambda_max = %.3g",
                  step, 2.0 / lam_max);
    throw NumericalError(buf);
  }

  const bool stochastic = std::isfinite(cfg.beta_phys);
  if (stochastic && cfg.beta_phys <= 0.0)
    throw SpecError("beta_phys must be positive");
  const double noise_amp =
      stochastic ? std::sqrt(2.0 * step / cfg.beta_phys) : 0.0;
  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int window =
      cfg.readout_window > 0.0
          ? std::min(cfg.max_steps,
                     static_cast<int>(std::ceil(cfg.readout_window / step)))
          : 0;
  std::vector<Vec> ring(window);
  int ring_count = 0, ring_pos = 0;

  EquilibriumResult res;
  double gnorm = 0.0;
  int used = 0;
  for (int t = 0; t < cfg.max_steps; ++t) {
    Vec g = grad_x(spec, x);
    if (extra) g += extra(x);
    if (!g.allFinite()) throw NumericalError("non-finite gradient in relax");

    gnorm = 0.0;
    for (int i : free) gnorm += g[i] * g[i];
    gnorm = std::sqrt(gnorm);
    if (cfg.record_trajectory)
      res.trajectory.push_back({t, energy(spec, x), gnorm});
    if (cfg.convergence_tol > 0.0 && gnorm <= cfg.convergence_tol) {
      res.converged = true;
      break;
    }

    for (int i : free) {
      x[i] -= step * g[i];
      if (noise_amp > 0.0) x[i] += noise_amp * gauss(rng);
    }
    ++used;
    if (x.norm() > 1e6) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "relaxation diverged (|x| > 1e6); step %.3g vs stability "
                    "bound 2/lambda_max = %.3g",
                    step, lam_max > 0.0 ? 2.0 / lam_max : 0.0);
      throw NumericalError(buf);
    }
    if (window > 0) {
      if (ring_count < window) {
        ring[ring_pos] = x;
        ++ring_count;
      } else {
        ring[ring_pos] = x;
      }
      ring_pos = (ring_pos + 1) % window;
    }
  }

  res.state = x;
  res.steps_used = used;
  res.final_grad_norm = gnorm;
  if (!res.converged && cfg.convergence_tol > 0.0 &&
      gnorm <= cfg.convergence_tol)
    res.converged = true;
  if (window > 0 && ring_count > 0) {
    Vec avg = Vec::Zero(d);
    for (int i = 0; i < ring_count; ++i) avg += ring[i];
    avg /= double(ring_count);
    // Clamped coordinates stay bit-exact even through averaging.
    for (std::size_t i = 0; i < clamp.indices.size(); ++i)
      avg[clamp.indices[i]] = clamp.values[i];
    res.time_avg_state = avg;
  } else {
    res.time_avg_state = x;
  }
  return res;
}

Clamp phase_clamp(const SubstrateSpec& spec, const Vec& y_tilde, double sigma) {
  const auto& p = spec.partition;
  if (y_tilde.size() != p.input_dim)
    throw SpecError("y_tilde must have length input_dim");
  if (sigma <= 0.0) throw SpecError("sigma must be positive");
  if (p.hidden_dim < 1)
    throw SpecError("free_phase requires hidden_dim >= 1 for the sigma coordinate");
  Clamp c;
  c.values.resize(p.input_dim + 1);
  for (int i = 0; i < p.input_dim; ++i) {
    c.indices.push_back(i);
    c.values[i] = y_tilde[i];
  }
  c.indices.push_back(p.sigma_coord());
  c.values[p.input_dim] = std::log(sigma);
  return c;
}

EquilibriumResult free_phase(const SubstrateSpec& spec, const Vec& y_tilde,
                             double sigma, const RelaxationConfig& cfg,
                             const Vec* warm_start) {
  const Clamp c = phase_clamp(spec, y_tilde, sigma);
  Vec init = warm_start ? *warm_start : Vec::Zero(spec.dim());
  return relax(spec, c, init, cfg);
}

void write_trajectory_csv(const EquilibriumResult& res,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SpecError("cannot open trajectory file: " + path);
  out << "step,energy,grad_norm\n";
  char buf[96];
  for (const auto& p : res.trajectory) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", p.step, p.energy,
                  p.grad_norm);
    out << buf;
  }
}

}  // namespace thermoprop
