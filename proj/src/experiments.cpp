#include "thermoprop/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

namespace thermoprop {

std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    out[i] = std::exp(llo + (lhi - llo) * i / double(n - 1));
  return out;
}

namespace {

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  std::atomic<int> next{0};
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : workers) t.join();
}

SubstrateSpec four_module_spec(int module_size, int k, std::uint64_t seed,
                               double gain = 1.0) {
  BlockPartition p;
  p.input_dim = module_size;
  p.hidden_dim = 2 * module_size;
  p.output_dim = module_size;
  p.module_sizes = {module_size, module_size, module_size, module_size};
  const int d = p.dim();
  BaseEnergy base{Vec::Ones(d), Vec::Zero(d), Vec::Zero(d)};
  std::vector<LowRankCoupling> cs;
  for (int m = 0; m < 4; ++m)
    for (int mp = m + 1; mp < 4; ++mp)
      cs.push_back(seeded_coupling(p, m, mp, k, seed + 10 * m + mp, gain));
  return SubstrateSpec::make(p, base, std::move(cs));
}

RelaxationConfig replication_cfg() {
  RelaxationConfig c;
  c.max_steps = 300;
  c.convergence_tol = 0.0;
  return c;
}

RelaxationConfig exact_cfg() {
  RelaxationConfig c;
  c.max_steps = 200000;
  c.convergence_tol = 1e-11;
  return c;
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t h = base + 0x9e3779b97f4a7c15ull * (salt + 1);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  return h;
}

}  // namespace

Preset make_preset(const std::string& name) {
  Preset pr;
  pr.name = name;
  if (name == "paper-e1" || name == "paper-exact") {
    // Strong couplings: the lambda-floor rescale pins the softest mode at
    // the floor, so the K = 300 budget leaves a visible residual.
    pr.spec = four_module_spec(16, 16, 1000, 4.0);
  } else if (name == "desk-small") {
    pr.spec = four_module_spec(4, 2, 2000);
  } else if (name == "desk-beta") {
    BlockPartition p;
    p.input_dim = 2;
    p.hidden_dim = 4;
    p.output_dim = 2;
    p.module_sizes = {4, 4};
    BaseEnergy base{Vec::Ones(8), Vec::Zero(8), Vec::Zero(8)};
    std::vector<LowRankCoupling> cs = {seeded_coupling(p, 0, 1, 2, 3000)};
    pr.spec = SubstrateSpec::make(p, base, std::move(cs));
  } else {
    throw SpecError("unknown preset: " + name);
  }
  pr.replication = replication_cfg();
  pr.exact = exact_cfg();
  pr.task.data_dim = pr.spec.partition.input_dim;
  pr.task.data_cov_seed = 7;
  pr.task.sigma_min = 0.1;
  pr.task.sigma_max = 1.0;
  pr.task.batch = 1;
  return pr;
}

Json ExperimentConfig::to_json() const {
  return Json{{"preset", preset},
              {"mode", mode},
              {"num_seeds", num_seeds},
              {"beta", beta},
              {"beta_grid", beta_grid},
              {"batch", batch},
              {"beta_phys", beta_phys},
              {"tau", tau},
              {"train_steps", train_steps},
              {"learning_rate", learning_rate},
              {"base_seed", base_seed},
              {"jobs", jobs}};
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  require_keys(j,
               {"preset", "mode", "num_seeds", "beta", "beta_grid", "batch",
                "beta_phys", "tau", "train_steps", "learning_rate", "base_seed",
                "jobs"},
               "experiment config");
  ExperimentConfig c;
  if (j.contains("preset")) c.preset = j.at("preset").get<std::string>();
  if (j.contains("mode")) c.mode = j.at("mode").get<std::string>();
  if (c.mode != "exact" && c.mode != "replication")
    throw SpecError("mode must be 'exact' or 'replication'");
  if (j.contains("num_seeds")) c.num_seeds = j.at("num_seeds").get<int>();
  if (j.contains("beta")) c.beta = j.at("beta").get<double>();
  if (j.contains("beta_grid"))
    c.beta_grid = j.at("beta_grid").get<std::vector<double>>();
  if (j.contains("batch")) c.batch = j.at("batch").get<int>();
  if (j.contains("beta_phys")) c.beta_phys = j.at("beta_phys").get<double>();
  if (j.contains("tau")) c.tau = j.at("tau").get<double>();
  if (j.contains("train_steps")) c.train_steps = j.at("train_steps").get<int>();
  if (j.contains("learning_rate"))
    c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("base_seed"))
    c.base_seed = j.at("base_seed").get<std::uint64_t>();
  if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
  return c;
}

SlopeFit fit_loglog(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 4)
    throw SpecError("fit_loglog: need at least 4 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  double xmin = 1e300, xmax = -1e300;
  const double n = double(points.size());
  for (const auto& [x, y] : points) {
    if (x <= 0.0 || y <= 0.0)
      throw SpecError("fit_loglog: points must be positive");
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  const double vxx = sxx - sx * sx / n;
  const double vxy = sxy - sx * sy / n;
  const double vyy = syy - sy * sy / n;
  SlopeFit f;
  f.slope = vxy / vxx;
  f.intercept = (sy - f.slope * sx) / n;
  f.r_squared = vyy > 0.0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
  f.x_min = xmin;
  f.x_max = xmax;
  return f;
}

E1Result run_e1(const ExperimentConfig& cfg) {
  const Preset pr = make_preset(cfg.preset);
  const RelaxationConfig phase_cfg =
      cfg.mode == "replication" ? pr.replication : pr.exact;
  const std::string hash = cfg.hash();

  struct SeedOut {
    double one_sided = 0.0, symmetric = 0.0;
  };
  std::vector<SeedOut> out(cfg.num_seeds);
  parallel_for(cfg.num_seeds, cfg.jobs, [&](int s) {
    DsmTaskConfig task = pr.task;
    task.rng_seed = mix_seed(cfg.base_seed, s);
    const DsmSample sample = sample_batch(task)[0];
    const ReadoutCost cost = readout_cost(sample);
    const Clamp clamp = phase_clamp(pr.spec, sample.y_tilde, sample.sigma);

    const EquilibriumResult free_eq =
        free_phase(pr.spec, sample.y_tilde, sample.sigma, phase_cfg);
    const GradientEstimate one =
        estimate_one_sided(pr.spec, cost, clamp, free_eq, cfg.beta, phase_cfg);
    const GradientEstimate sym =
        estimate_symmetric(pr.spec, cost, clamp, free_eq, cfg.beta, phase_cfg);

    // Oracle from an exact-equilibrium side run on the same theta/sample.
    const EquilibriumResult free_exact =
        free_phase(pr.spec, sample.y_tilde, sample.sigma, pr.exact);
    const GradientEstimate truth = oracle_implicit(pr.spec, cost, free_exact);

    out[s].one_sided = compare(pr.spec, one, truth).cosine.value_or(0.0);
    out[s].symmetric = compare(pr.spec, sym, truth).cosine.value_or(0.0);
  });

  E1Result res;
  double m1 = 0, m2 = 0;
  for (const auto& o : out) {
    m1 += o.one_sided;
    m2 += o.symmetric;
  }
  m1 /= cfg.num_seeds;
  m2 /= cfg.num_seeds;
  double v1 = 0, v2 = 0;
  for (int s = 0; s < cfg.num_seeds; ++s) {
    v1 += (out[s].one_sided - m1) * (out[s].one_sided - m1);
    v2 += (out[s].symmetric - m2) * (out[s].symmetric - m2);
    res.records.push_back({"e1", cfg.beta, std::uint64_t(s),
                           "one_sided_cosine", out[s].one_sided, hash});
    res.records.push_back({"e1", cfg.beta, std::uint64_t(s),
                           "symmetric_cosine", out[s].symmetric, hash});
  }
  res.one_sided_mean = m1;
  res.symmetric_mean = m2;
  res.one_sided_std = std::sqrt(v1 / std::max(1, cfg.num_seeds - 1));
  res.symmetric_std = std::sqrt(v2 / std::max(1, cfg.num_seeds - 1));
  return res;
}

E2Result run_e2(const ExperimentConfig& cfg) {
  const Preset pr = make_preset(cfg.preset);
  const std::vector<double> grid =
      cfg.beta_grid.empty() ? logspace(1e-3, 1e-1, 12) : cfg.beta_grid;
  const RelaxationConfig phase_cfg =
      cfg.mode == "replication" ? pr.replication : pr.exact;
  const std::string hash = cfg.hash();

  // Fixed deterministic batch; per sample: free phases and the exact oracle.
  DsmTaskConfig task = pr.task;
  task.batch = cfg.batch;
  task.rng_seed = mix_seed(cfg.base_seed, 0xe2);
  const auto batch = sample_batch(task);

  struct PerSample {
    ReadoutCost cost;
    Clamp clamp;
    EquilibriumResult free_eq;     // in phase mode
    GradientEstimate truth;
  };
  std::vector<PerSample> prep(batch.size());
  parallel_for(int(batch.size()), cfg.jobs, [&](int i) {
    const auto& s = batch[i];
    prep[i].cost = readout_cost(s);
    prep[i].clamp = phase_clamp(pr.spec, s.y_tilde, s.sigma);
    prep[i].free_eq = free_phase(pr.spec, s.y_tilde, s.sigma, phase_cfg);
    const EquilibriumResult free_exact =
        cfg.mode == "replication"
            ? free_phase(pr.spec, s.y_tilde, s.sigma, pr.exact)
            : prep[i].free_eq;
    prep[i].truth = oracle_implicit(pr.spec, prep[i].cost, free_exact);
  });

  const int np = pr.spec.param_count();
  std::vector<double> bias_one(grid.size()), bias_sym(grid.size());
  parallel_for(int(grid.size()), cfg.jobs, [&](int bi) {
    const double beta = grid[bi];
    Vec diff_one = Vec::Zero(np), diff_sym = Vec::Zero(np);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& p = prep[i];
      diff_one += estimate_one_sided(pr.spec, p.cost, p.clamp, p.free_eq, beta,
                                     phase_cfg)
                      .values -
                  p.truth.values;
      diff_sym += estimate_symmetric(pr.spec, p.cost, p.clamp, p.free_eq, beta,
                                     phase_cfg)
                      .values -
                  p.truth.values;
    }
    bias_one[bi] = (diff_one / double(batch.size())).norm();
    bias_sym[bi] = (diff_sym / double(batch.size())).norm();
  });

  E2Result res;
  std::vector<std::pair<double, double>> pts_one, pts_sym;
  for (std::size_t bi = 0; bi < grid.size(); ++bi) {
    pts_one.emplace_back(grid[bi], bias_one[bi]);
    pts_sym.emplace_back(grid[bi], bias_sym[bi]);
    res.records.push_back(
        {"e2", grid[bi], 0, "bias_one_sided", bias_one[bi], hash});
    res.records.push_back(
        {"e2", grid[bi], 0, "bias_symmetric", bias_sym[bi], hash});
  }
  res.one_sided = fit_loglog(pts_one);
  res.symmetric = fit_loglog(pts_sym);
  return res;
}

E3SweepResult run_e3_sweep(const ExperimentConfig& cfg) {
  const Preset pr = make_preset(cfg.preset);
  const std::vector<double> grid =
      cfg.beta_grid.empty() ? logspace(5e-2, 2.0, 10) : cfg.beta_grid;
  const std::string hash = cfg.hash();
  if (!(cfg.beta_phys > 0.0) || !(cfg.tau > 0.0))
    throw SpecError("e3 sweep needs finite beta_phys > 0 and tau > 0");

  DsmTaskConfig task = pr.task;
  task.rng_seed = mix_seed(cfg.base_seed, 0xe3);
  const DsmSample sample = sample_batch(task)[0];
  const ReadoutCost cost = readout_cost(sample);
  const Clamp clamp = phase_clamp(pr.spec, sample.y_tilde, sample.sigma);

  // Deterministic side: exact oracle and the beta^2 bias curve.
  const EquilibriumResult free_exact =
      free_phase(pr.spec, sample.y_tilde, sample.sigma, pr.exact);
  const GradientEstimate truth = oracle_implicit(pr.spec, cost, free_exact);

  E3SweepResult res;
  std::vector<std::pair<double, double>> bias_pts;
  for (double beta : grid) {
    const GradientEstimate g = estimate_symmetric(pr.spec, cost, clamp,
                                                  free_exact, beta, pr.exact);
    bias_pts.emplace_back(beta, (g.values - truth.values).norm());
  }
  res.bias_fit = fit_loglog(bias_pts);

  // Stochastic side: tau-averaged phases at finite beta_phys.
  RelaxationConfig st;
  st.beta_phys = cfg.beta_phys;
  st.readout_window = cfg.tau;
  st.convergence_tol = 0.0;
  {
    const auto free = free_indices(pr.spec);
    const double lmax = estimate_lambda_max(pr.spec, free_exact.state, free);
    const double step = 0.1 / lmax;
    st.step_size = step;
    // Equilibration burn-in plus the readout window.
    st.max_steps = int(std::ceil((50.0 / pr.spec.lambda_floor + cfg.tau) / step));
  }

  const int np = pr.spec.param_count();
  std::vector<Vec> draws(std::size_t(grid.size()) * cfg.num_seeds);
  parallel_for(int(draws.size()), cfg.jobs, [&](int idx) {
    const int bi = idx / cfg.num_seeds;
    const int s = idx % cfg.num_seeds;
    RelaxationConfig c0 = st;
    c0.rng_seed = mix_seed(cfg.base_seed, 3 * idx);
    const EquilibriumResult free_eq =
        free_phase(pr.spec, sample.y_tilde, sample.sigma, c0);
    RelaxationConfig c1 = st;
    c1.rng_seed = mix_seed(cfg.base_seed, 3 * idx + 1);
    draws[idx] = estimate_symmetric(pr.spec, cost, clamp, free_eq, grid[bi], c1)
                     .values;
  });

  std::vector<std::pair<double, double>> var_pts;
  for (std::size_t bi = 0; bi < grid.size(); ++bi) {
    Vec mean = Vec::Zero(np);
    for (int s = 0; s < cfg.num_seeds; ++s)
      mean += draws[bi * cfg.num_seeds + s];
    mean /= double(cfg.num_seeds);
    double var = 0.0;
    for (int s = 0; s < cfg.num_seeds; ++s)
      var += (draws[bi * cfg.num_seeds + s] - mean).squaredNorm();
    var /= double(std::max(1, cfg.num_seeds - 1));
    const double mse = (mean - truth.values).squaredNorm() + var;
    var_pts.emplace_back(grid[bi], var);
    res.betas.push_back(grid[bi]);
    res.mse.push_back(mse);
    res.records.push_back({"e3-sweep", grid[bi], 0, "variance", var, hash});
    res.records.push_back({"e3-sweep", grid[bi], 0, "mse", mse, hash});
    res.records.push_back(
        {"e3-sweep", grid[bi], 0, "bias_det", bias_pts[bi].second, hash});
  }
  res.variance_fit = fit_loglog(var_pts);

  // beta-dagger: constants fitted from the curves just measured.
  const auto free = free_indices(pr.spec);
  const Mat h = hessian_free(pr.spec, free_exact.state, free);
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  const double lambda_star = es.eigenvalues().minCoeff();
  const Mat m = mixed_second(pr.spec, free_exact.state, free);
  const double m_norm = m.jacobiSvd().singularValues()(0);
  const double var_amp = std::exp(res.variance_fit.intercept);  // var ~ A / b^2
  const double k2 = std::exp(res.bias_fit.intercept);           // bias ~ K2 b^2
  const double c_v = var_amp * cfg.beta_phys * lambda_star * lambda_star *
                     cfg.tau / (m_norm * m_norm);
  res.beta_dagger_pred =
      optimal_beta_sym(c_v, m_norm, k2, cfg.beta_phys, lambda_star, cfg.tau);

  int argmin = 0;
  for (std::size_t i = 1; i < res.mse.size(); ++i)
    if (res.mse[i] < res.mse[argmin]) argmin = int(i);
  res.beta_dagger_emp = res.betas[argmin];
  int violations = 0;
  for (std::size_t i = 1; i < res.mse.size(); ++i) {
    const bool should_decrease = int(i) <= argmin;
    if (should_decrease ? res.mse[i] >= res.mse[i - 1]
                        : res.mse[i] <= res.mse[i - 1])
      ++violations;
  }
  res.mse_u_shaped = argmin > 0 && argmin + 1 < int(res.mse.size()) &&
                     violations <= 1;
  res.records.push_back(
      {"e3-sweep", 0.0, 0, "beta_dagger_pred", res.beta_dagger_pred, hash});
  res.records.push_back(
      {"e3-sweep", 0.0, 0, "beta_dagger_emp", res.beta_dagger_emp, hash});
  return res;
}

E3TrainingResult run_e3_training(const ExperimentConfig& cfg) {
  const Preset pr = make_preset(cfg.preset);
  const std::string hash = cfg.hash();

  SubstrateSpec spec_eq = pr.spec;
  SubstrateSpec spec_or = pr.spec;
  const int np = pr.spec.param_count();

  E3TrainingResult res;
  for (int t = 0; t < cfg.train_steps; ++t) {
    DsmTaskConfig task = pr.task;
    task.batch = cfg.batch;
    task.rng_seed = mix_seed(cfg.base_seed, 0x7000 + t);
    const auto batch = sample_batch(task);  // identical stream for both runs

    Vec g_eq = Vec::Zero(np), g_or_at_eq = Vec::Zero(np), g_or = Vec::Zero(np);
    double loss_eq = 0.0, loss_or = 0.0;
    for (const auto& s : batch) {
      const ReadoutCost cost = readout_cost(s);
      const Clamp clamp_eq = phase_clamp(spec_eq, s.y_tilde, s.sigma);
      const EquilibriumResult fe =
          free_phase(spec_eq, s.y_tilde, s.sigma, pr.exact);
      g_eq += estimate_symmetric(spec_eq, cost, clamp_eq, fe, cfg.beta,
                                 pr.exact)
                  .values;
      g_or_at_eq += oracle_implicit(spec_eq, cost, fe).values;
      const int oo = spec_eq.partition.input_dim + spec_eq.partition.hidden_dim;
      loss_eq += cost.value(fe.state.segment(oo, spec_eq.partition.output_dim));

      const EquilibriumResult fo =
          free_phase(spec_or, s.y_tilde, s.sigma, pr.exact);
      g_or += oracle_implicit(spec_or, cost, fo).values;
      loss_or += cost.value(fo.state.segment(oo, spec_or.partition.output_dim));
    }
    const double nb = double(batch.size());
    g_eq /= nb;
    g_or_at_eq /= nb;
    g_or /= nb;
    loss_eq /= nb;
    loss_or /= nb;
    if (loss_eq > 1e6 || loss_or > 1e6)
      throw NumericalError("training diverged (loss > 1e6)");

    TrainStepRow row;
    row.step = t;
    row.loss_eqprop = loss_eq;
    row.loss_oracle = loss_or;
    const double den = g_eq.norm() * g_or_at_eq.norm();
    row.alignment = den > 0.0 ? g_eq.dot(g_or_at_eq) / den : 0.0;
    res.rows.push_back(row);
    res.records.push_back(
        {"e3-train", cfg.beta, std::uint64_t(t), "loss_eqprop", loss_eq, hash});
    res.records.push_back(
        {"e3-train", cfg.beta, std::uint64_t(t), "loss_oracle", loss_or, hash});
    res.records.push_back({"e3-train", cfg.beta, std::uint64_t(t), "alignment",
                           row.alignment, hash});

    spec_eq = spec_eq.with_theta(spec_eq.get_theta() -
                                 cfg.learning_rate * g_eq);
    spec_or = spec_or.with_theta(spec_or.get_theta() -
                                 cfg.learning_rate * g_or);
  }
  return res;
}

}  // namespace thermoprop
