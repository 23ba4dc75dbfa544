#include "thermoprop/substrate.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>

namespace thermoprop {

int BlockPartition::module_offset(int m) const {
  int off = 0;
  for (int i = 0; i < m; ++i) off += module_sizes[i];
  return off;
}

int BlockPartition::module_of(int i) const {
  int off = 0;
  for (int m = 0; m < num_modules(); ++m) {
    off += module_sizes[m];
    if (i < off) return m;
  }
  throw SpecError("module_of: index out of range");
}

Block BlockPartition::block_of(int i) const {
  if (i < input_dim) return Block::input;
  if (i < input_dim + hidden_dim) return Block::hidden;
  return Block::output;
}

std::vector<int> BlockPartition::output_indices() const {
  std::vector<int> out;
  for (int i = input_dim + hidden_dim; i < dim(); ++i) out.push_back(i);
  return out;
}

void BlockPartition::validate() const {
  if (input_dim < 0 || hidden_dim < 0 || output_dim < 0)
    throw SpecError("partition: negative block size");
  int msum = 0;
  for (int s : module_sizes) {
    if (s <= 0) throw SpecError("partition: nonpositive module size");
    msum += s;
  }
  if (msum != dim()) throw SpecError("partition: module sizes do not sum to D");
  if (num_modules() < 2) throw SpecError("partition: need at least 2 modules");
}

int SubstrateSpec::param_count() const {
  int n = 0;
  for (const auto& c : couplings) {
    n += static_cast<int>(c.u.size());
    if (train_v) n += static_cast<int>(c.v.size());
  }
  n += static_cast<int>(trainable_bias.size());
  return n;
}

Vec SubstrateSpec::get_theta() const {
  Vec theta(param_count());
  int p = 0;
  for (const auto& c : couplings) {
    for (int j = 0; j < c.u.cols(); ++j)
      for (int i = 0; i < c.u.rows(); ++i) theta[p++] = c.u(i, j);
    if (train_v)
      for (int j = 0; j < c.v.cols(); ++j)
        for (int i = 0; i < c.v.rows(); ++i) theta[p++] = c.v(i, j);
  }
  for (int i : trainable_bias) theta[p++] = base.bias[i];
  return theta;
}

SubstrateSpec SubstrateSpec::with_theta(const Vec& theta) const {
  if (theta.size() != param_count())
    throw SpecError("with_theta: wrong parameter count");
  SubstrateSpec out = *this;
  int p = 0;
  for (auto& c : out.couplings) {
    for (int j = 0; j < c.u.cols(); ++j)
      for (int i = 0; i < c.u.rows(); ++i) c.u(i, j) = theta[p++];
    if (train_v)
      for (int j = 0; j < c.v.cols(); ++j)
        for (int i = 0; i < c.v.rows(); ++i) c.v(i, j) = theta[p++];
  }
  for (int i : out.trainable_bias) out.base.bias[i] = theta[p++];
  return out;
}

namespace {

// Free set used for the construction-time stability check: everything
// outside the input block. A principal submatrix of this Hessian (e.g. with
// the sigma coordinate also clamped) can only have a larger smallest
// eigenvalue, so the check is conservative.
std::vector<int> construction_free(const BlockPartition& p) {
  std::vector<int> f;
  for (int i = p.input_dim; i < p.dim(); ++i) f.push_back(i);
  return f;
}

double min_free_eigenvalue(const SubstrateSpec& spec) {
  Vec origin = Vec::Zero(spec.dim());
  Mat h = hessian_free(spec, origin, construction_free(spec.partition));
  if (h.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

SubstrateSpec SubstrateSpec::make(BlockPartition partition, BaseEnergy base,
                                  std::vector<LowRankCoupling> couplings,
                                  double lambda_floor, bool train_v,
                                  std::vector<int> trainable_bias) {
  partition.validate();
  const int d = partition.dim();
  if (base.stiffness.size() != d || base.bias.size() != d ||
      base.quartic.size() != d)
    throw SpecError("base energy vectors must have length D");
  if ((base.stiffness.array() <= 0.0).any())
    throw SpecError("stiffness a_i must be positive");
  if ((base.quartic.array() < 0.0).any())
    throw SpecError("quartic kappa_i must be nonnegative");

  std::sort(couplings.begin(), couplings.end(), [](const auto& a, const auto& b) {
    return std::pair(a.source_module, a.target_module) <
           std::pair(b.source_module, b.target_module);
  });
  for (std::size_t i = 0; i < couplings.size(); ++i) {
    const auto& c = couplings[i];
    if (c.source_module >= c.target_module)
      throw SpecError("coupling must have m < m'");
    if (c.target_module >= partition.num_modules())
      throw SpecError("coupling module index out of range");
    const int dm = partition.module_sizes[c.source_module];
    const int dmp = partition.module_sizes[c.target_module];
    if (c.u.rows() != dm || c.v.rows() != dmp || c.u.cols() != c.v.cols())
      throw SpecError("coupling factor shapes inconsistent with modules");
    if (c.rank() > std::min(dm, dmp))
      throw SpecError("coupling rank exceeds min module dimension");
    if (i > 0 && couplings[i - 1].source_module == c.source_module &&
        couplings[i - 1].target_module == c.target_module)
      throw SpecError("duplicate coupling module pair");
  }
  std::sort(trainable_bias.begin(), trainable_bias.end());
  for (int i : trainable_bias)
    if (i < 0 || i >= d) throw SpecError("trainable bias index out of range");

  SubstrateSpec spec;
  spec.partition = std::move(partition);
  spec.base = std::move(base);
  spec.couplings = std::move(couplings);
  spec.train_v = train_v;
  spec.trainable_bias = std::move(trainable_bias);
  spec.lambda_floor = lambda_floor;

  if (!spec.couplings.empty()) {
    double lam = min_free_eigenvalue(spec);
    if (lam < lambda_floor) {
      // Single global shrink factor found by bisection; reported via
      // coupling_rescale, never silent.
      double lo = 0.0, hi = 1.0;
      SubstrateSpec trial = spec;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        trial.couplings = spec.couplings;
        for (auto& c : trial.couplings) c.u *= mid;
        if (min_free_eigenvalue(trial) >= lambda_floor)
          lo = mid;
        else
          hi = mid;
      }
      if (lo <= 0.0)
        throw SpecError("cannot satisfy lambda_floor even with zero couplings");
      for (auto& c : spec.couplings) c.u *= lo;
      spec.coupling_rescale = lo;
    }
  } else if (min_free_eigenvalue(spec) < lambda_floor) {
    throw SpecError("base stiffness below lambda_floor");
  }
  return spec;
}

LowRankCoupling seeded_coupling(const BlockPartition& p, int m, int mp, int k,
                                std::uint64_t seed, double gain) {
  const int dm = p.module_sizes[m];
  const int dmp = p.module_sizes[mp];
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  LowRankCoupling c;
  c.source_module = m;
  c.target_module = mp;
  c.u.resize(dm, k);
  c.v.resize(dmp, k);
  const double su = gain / std::sqrt(double(k) * dm);
  const double sv = gain / std::sqrt(double(k) * dmp);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < dm; ++i) c.u(i, j) = su * gauss(rng);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < dmp; ++i) c.v(i, j) = sv * gauss(rng);
  return c;
}

void check_state(const SubstrateSpec& spec, const Vec& x) {
  if (x.size() != spec.dim()) throw SpecError("state dimension mismatch");
  if (!x.allFinite()) throw NumericalError("state has non-finite entries");
}

double energy(const SubstrateSpec& spec, const Vec& x) {
  check_state(spec, x);
  const auto& a = spec.base.stiffness;
  const auto& b0 = spec.base.bias;
  const auto& kap = spec.base.quartic;
  double e = (0.5 * a.array() * x.array().square() +
              0.25 * kap.array() * x.array().square().square() -
              b0.array() * x.array())
                 .sum();
  for (const auto& c : spec.couplings) {
    const auto xm = x.segment(spec.partition.module_offset(c.source_module),
                              c.u.rows());
    const auto xmp = x.segment(spec.partition.module_offset(c.target_module),
                               c.v.rows());
    e += (c.u.transpose() * xm).dot(c.v.transpose() * xmp);
  }
  return e;
}

Vec grad_x(const SubstrateSpec& spec, const Vec& x) {
  check_state(spec, x);
  Vec g = (spec.base.stiffness.array() * x.array() +
           spec.base.quartic.array() * x.array().cube() -
           spec.base.bias.array())
              .matrix();
  for (const auto& c : spec.couplings) {
    const int om = spec.partition.module_offset(c.source_module);
    const int omp = spec.partition.module_offset(c.target_module);
    const auto xm = x.segment(om, c.u.rows());
    const auto xmp = x.segment(omp, c.v.rows());
    g.segment(om, c.u.rows()).noalias() += c.u * (c.v.transpose() * xmp);
    g.segment(omp, c.v.rows()).noalias() += c.v * (c.u.transpose() * xm);
  }
  return g;
}

GradientEstimate grad_theta(const SubstrateSpec& spec, const Vec& x) {
  check_state(spec, x);
  GradientEstimate est;
  est.values.resize(spec.param_count());
  int p = 0;
  for (const auto& c : spec.couplings) {
    const auto xm = x.segment(spec.partition.module_offset(c.source_module),
                              c.u.rows());
    const auto xmp = x.segment(spec.partition.module_offset(c.target_module),
                               c.v.rows());
    const Vec vx = c.v.transpose() * xmp;  // k
    for (int j = 0; j < c.u.cols(); ++j)
      for (int i = 0; i < c.u.rows(); ++i) est.values[p++] = xm[i] * vx[j];
    if (spec.train_v) {
      const Vec ux = c.u.transpose() * xm;  // k
      for (int j = 0; j < c.v.cols(); ++j)
        for (int i = 0; i < c.v.rows(); ++i) est.values[p++] = xmp[i] * ux[j];
    }
  }
  for (int i : spec.trainable_bias) est.values[p++] = -x[i];
  return est;
}

std::vector<int> free_indices(const SubstrateSpec& spec) {
  std::vector<int> f;
  const auto& p = spec.partition;
  for (int i = p.input_dim; i < p.dim(); ++i)
    if (i != p.sigma_coord() || p.hidden_dim == 0) f.push_back(i);
  return f;
}

Mat hessian_free(const SubstrateSpec& spec, const Vec& x,
                 const std::vector<int>& free) {
  check_state(spec, x);
  const int f = static_cast<int>(free.size());
  std::vector<int> pos(spec.dim(), -1);
  for (int j = 0; j < f; ++j) pos[free[j]] = j;

  Mat h = Mat::Zero(f, f);
  for (int j = 0; j < f; ++j) {
    const int i = free[j];
    h(j, j) = spec.base.stiffness[i] + 3.0 * spec.base.quartic[i] * x[i] * x[i];
  }
  for (const auto& c : spec.couplings) {
    const int om = spec.partition.module_offset(c.source_module);
    const int omp = spec.partition.module_offset(c.target_module);
    for (int r = 0; r < c.u.rows(); ++r) {
      const int jr = pos[om + r];
      if (jr < 0) continue;
      for (int s = 0; s < c.v.rows(); ++s) {
        const int js = pos[omp + s];
        if (js < 0) continue;
        const double w = c.u.row(r).dot(c.v.row(s));
        h(jr, js) += w;
        h(js, jr) += w;
      }
    }
  }
  return h;
}

Mat hessian_free(const SubstrateSpec& spec, const Vec& x) {
  return hessian_free(spec, x, free_indices(spec));
}

Mat mixed_second(const SubstrateSpec& spec, const Vec& x,
                 const std::vector<int>& free) {
  check_state(spec, x);
  const int f = static_cast<int>(free.size());
  std::vector<int> pos(spec.dim(), -1);
  for (int j = 0; j < f; ++j) pos[free[j]] = j;

  Mat m = Mat::Zero(spec.param_count(), f);
  int p = 0;
  for (const auto& c : spec.couplings) {
    const int om = spec.partition.module_offset(c.source_module);
    const int omp = spec.partition.module_offset(c.target_module);
    const auto xm = x.segment(om, c.u.rows());
    const auto xmp = x.segment(omp, c.v.rows());
    const Vec vx = c.v.transpose() * xmp;
    const Vec ux = c.u.transpose() * xm;
    // dE/dU_ij = x_i^(m) (V^T x^(m'))_j
    for (int j = 0; j < c.u.cols(); ++j)
      for (int i = 0; i < c.u.rows(); ++i) {
        if (pos[om + i] >= 0) m(p, pos[om + i]) += vx[j];
        for (int s = 0; s < c.v.rows(); ++s)
          if (pos[omp + s] >= 0) m(p, pos[omp + s]) += xm[i] * c.v(s, j);
        ++p;
      }
    if (spec.train_v) {
      // dE/dV_sj = x_s^(m') (U^T x^(m))_j
      for (int j = 0; j < c.v.cols(); ++j)
        for (int s = 0; s < c.v.rows(); ++s) {
          if (pos[omp + s] >= 0) m(p, pos[omp + s]) += ux[j];
          for (int i = 0; i < c.u.rows(); ++i)
            if (pos[om + i] >= 0) m(p, pos[om + i]) += xmp[s] * c.u(i, j);
          ++p;
        }
    }
  }
  for (int i : spec.trainable_bias) {
    if (pos[i] >= 0) m(p, pos[i]) = -1.0;
    ++p;
  }
  return m;
}

Mat mixed_second(const SubstrateSpec& spec, const Vec& x) {
  return mixed_second(spec, x, free_indices(spec));
}

double mixed_third_coupling_norm(const SubstrateSpec& spec, const Vec& x,
                                 double fd_step) {
  if (fd_step <= 0.0) throw SpecError("fd_step must be positive");
  const auto free = free_indices(spec);
  int coupling_params = 0;
  for (const auto& c : spec.couplings) {
    coupling_params += static_cast<int>(c.u.size());
    if (spec.train_v) coupling_params += static_cast<int>(c.v.size());
  }
  double worst = 0.0;
  for (std::size_t j = 0; j < free.size(); ++j) {
    Vec xp = x, xm = x;
    xp[free[j]] += fd_step;
    xm[free[j]] -= fd_step;
    const Mat mp = mixed_second(spec, xp, free);
    const Mat mm = mixed_second(spec, xm, free);
    for (int p = 0; p < coupling_params; ++p) {
      const double n3 = (mp(p, j) - mm(p, j)) / (2.0 * fd_step);
      worst = std::max(worst, std::abs(n3));
    }
  }
  return worst;
}

}  // namespace thermoprop
