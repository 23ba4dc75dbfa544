#include <doctest.h>

#include "test_helpers.hpp"

using namespace thermoprop;
using namespace tp_test;

namespace {

SubstrateSpec single_unit_coupling_spec() {
  // Two modules of size 2, u = v = e1 column, a = 1, kappa = 0, b0 = 0.
  // All coordinates live in the input block so the unit coupling is not
  // subject to the free-Hessian floor (free set is empty).
  BlockPartition p;
  p.input_dim = 4;
  p.hidden_dim = 0;
  p.output_dim = 0;
  p.module_sizes = {2, 2};
  BaseEnergy base{Vec::Ones(4), Vec::Zero(4), Vec::Zero(4)};
  LowRankCoupling c;
  c.source_module = 0;
  c.target_module = 1;
  c.u = Mat::Zero(2, 1);
  c.v = Mat::Zero(2, 1);
  c.u(0, 0) = 1.0;
  c.v(0, 0) = 1.0;
  return SubstrateSpec::make(p, base, {c});
}

}  // namespace

TEST_CASE("energy at the origin is zero with zero bias") {
  std::mt19937_64 rng(1);
  const auto spec = random_spec(rng);
  SubstrateSpec zb = spec;
  zb.base.bias.setZero();
  CHECK(energy(zb, Vec::Zero(zb.dim())) == 0.0);
}

TEST_CASE("hand-computed single coupling energy") {
  const auto spec = single_unit_coupling_spec();
  Vec x = Vec::Zero(4);
  x[0] = 1.0;  // e1 of module 0
  x[2] = 1.0;  // e1 of module 1
  CHECK(energy(spec, x) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("factored energy equals dense assembly") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    RandomSpecOptions opt;
    opt.num_modules = (trial % 2) ? 4 : 2;  // D = 8 and D = 16
    opt.quartic = trial % 3 == 0;
    const auto spec = random_spec(rng, opt);
    const Vec x = random_state(rng, spec.dim());
    CHECK(energy(spec, x) ==
          doctest::Approx(dense_energy(spec, x)).epsilon(1e-12));
  }
}

TEST_CASE("grad_x: zero at origin without bias") {
  std::mt19937_64 rng(3);
  auto spec = random_spec(rng);
  spec.base.bias.setZero();
  CHECK(grad_x(spec, Vec::Zero(spec.dim())).norm() == 0.0);
}

TEST_CASE("grad_x quartic component") {
  BlockPartition p;
  p.input_dim = 0;
  p.hidden_dim = 4;
  p.output_dim = 0;
  p.module_sizes = {2, 2};
  BaseEnergy base{1e-12 * Vec::Ones(4), Vec::Zero(4), Vec::Ones(4)};
  const auto spec = SubstrateSpec::make(p, base, {}, 1e-14);
  Vec x = 2.0 * Vec::Ones(4);
  // kappa x^3 = 8 plus the (negligible) a x term
  CHECK(grad_x(spec, x)[0] == doctest::Approx(8.0).epsilon(1e-9));
}

TEST_CASE("grad_x matches finite differences") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    RandomSpecOptions opt;
    opt.quartic = trial % 2 == 0;
    const auto spec = random_spec(rng, opt);
    const Vec x = random_state(rng, spec.dim());
    const Vec g = grad_x(spec, x);
    const Vec g_fd = fd_grad_x(spec, x);
    CHECK((g - g_fd).norm() <= 1e-6 * std::max(1.0, g_fd.norm()));
  }
}

TEST_CASE("grad_theta: zero coupling gradient at zero state") {
  std::mt19937_64 rng(5);
  const auto spec = random_spec(rng);
  CHECK(grad_theta(spec, Vec::Zero(spec.dim())).values.norm() == 0.0);
}

TEST_CASE("grad_theta hand example: dE/dU11 = x_m (x_m' . v)") {
  const auto spec = single_unit_coupling_spec();
  Vec x = Vec::Zero(4);
  x[0] = 2.0;
  x[2] = 3.0;
  const Vec g = grad_theta(spec, x).values;
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("grad_theta matches finite differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    RandomSpecOptions opt;
    opt.quartic = trial % 2 == 1;
    opt.trainable_bias = trial % 3 == 0;
    const auto spec = random_spec(rng, opt);
    const Vec x = random_state(rng, spec.dim());
    const Vec g = grad_theta(spec, x).values;
    const Vec g_fd = fd_grad_theta(spec, x);
    CHECK((g - g_fd).norm() <= 1e-6 * std::max(1.0, g_fd.norm()));
  }
}

TEST_CASE("hessian_free: diagonal when no couplings") {
  BlockPartition p;
  p.input_dim = 2;
  p.hidden_dim = 4;
  p.output_dim = 2;
  p.module_sizes = {4, 4};
  BaseEnergy base{2.0 * Vec::Ones(8), Vec::Zero(8), Vec::Zero(8)};
  const auto spec = SubstrateSpec::make(p, base, {});
  const auto free = free_indices(spec);
  const Mat h = hessian_free(spec, Vec::Zero(8), free);
  CHECK((h - 2.0 * Mat::Identity(free.size(), free.size())).norm() == 0.0);
}

TEST_CASE("hessian_free matches finite differences of grad_x") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    RandomSpecOptions opt;
    opt.quartic = trial % 2 == 0;
    const auto spec = random_spec(rng, opt);
    const Vec x = random_state(rng, spec.dim());
    const auto free = free_indices(spec);
    const Mat h = hessian_free(spec, x, free);
    const Mat h_fd = fd_hessian_free(spec, x, free);
    CHECK((h - h_fd).norm() <= 1e-5 * std::max(1.0, h_fd.norm()));
    CHECK((h - h.transpose()).norm() <= 1e-14);
  }
}

TEST_CASE("construction enforces the lambda floor at the clamped origin") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    RandomSpecOptions opt;
    opt.coupling_gain = 4.0;  // strong couplings force a rescale
    const auto spec = random_spec(rng, opt);
    std::vector<int> free;
    for (int i = spec.partition.input_dim; i < spec.dim(); ++i)
      free.push_back(i);
    const Mat h = hessian_free(spec, Vec::Zero(spec.dim()), free);
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= spec.lambda_floor - 1e-9);
    if (spec.coupling_rescale < 1.0)
      CHECK(es.eigenvalues().minCoeff() ==
            doctest::Approx(spec.lambda_floor).epsilon(1e-6));
  }
}

TEST_CASE("construction rejects bad inputs") {
  BlockPartition p;
  p.input_dim = 2;
  p.hidden_dim = 4;
  p.output_dim = 2;
  p.module_sizes = {4, 4};
  BaseEnergy base{Vec::Ones(8), Vec::Zero(8), Vec::Zero(8)};

  SUBCASE("nonpositive stiffness") {
    base.stiffness[3] = 0.0;
    CHECK_THROWS_AS(SubstrateSpec::make(p, base, {}), SpecError);
  }
  SUBCASE("negative quartic") {
    base.quartic[0] = -1.0;
    CHECK_THROWS_AS(SubstrateSpec::make(p, base, {}), SpecError);
  }
  SUBCASE("module sizes must sum to D") {
    p.module_sizes = {4, 3};
    CHECK_THROWS_AS(SubstrateSpec::make(p, base, {}), SpecError);
  }
  SUBCASE("coupling rank above module dimension") {
    LowRankCoupling c;
    c.source_module = 0;
    c.target_module = 1;
    c.u = Mat::Zero(4, 5);
    c.v = Mat::Zero(4, 5);
    CHECK_THROWS_AS(SubstrateSpec::make(p, base, {c}), SpecError);
  }
  SUBCASE("m >= m' rejected") {
    LowRankCoupling c;
    c.source_module = 1;
    c.target_module = 1;
    c.u = Mat::Zero(4, 2);
    c.v = Mat::Zero(4, 2);
    CHECK_THROWS_AS(SubstrateSpec::make(p, base, {c}), SpecError);
  }
  SUBCASE("dimension mismatch rejected at evaluation") {
    const auto spec = SubstrateSpec::make(p, base, {});
    CHECK_THROWS_AS(energy(spec, Vec::Zero(7)), SpecError);
  }
}

TEST_CASE("mixed_second matches finite differences of grad_theta") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    RandomSpecOptions opt;
    opt.quartic = trial % 2 == 0;
    opt.trainable_bias = trial % 2 == 1;
    const auto spec = random_spec(rng, opt);
    const Vec x = random_state(rng, spec.dim());
    const auto free = free_indices(spec);
    const Mat m = mixed_second(spec, x, free);
    const Mat m_fd = fd_mixed_second(spec, x, free);
    CHECK((m - m_fd).norm() <= 1e-5 * std::max(1.0, m_fd.norm()));
  }
}

TEST_CASE("mixed_second bias rows are constant -1 at the own coordinate") {
  std::mt19937_64 rng(10);
  RandomSpecOptions opt;
  opt.trainable_bias = true;
  const auto spec = random_spec(rng, opt);
  const Vec x = random_state(rng, spec.dim());
  const auto free = free_indices(spec);
  const Mat m = mixed_second(spec, x, free);
  const int ncoup = spec.param_count() - int(spec.trainable_bias.size());
  for (std::size_t bi = 0; bi < spec.trainable_bias.size(); ++bi) {
    const int coord = spec.trainable_bias[bi];
    for (std::size_t j = 0; j < free.size(); ++j) {
      const double expect = free[j] == coord ? -1.0 : 0.0;
      CHECK(m(ncoup + int(bi), j) == expect);
    }
  }
}

TEST_CASE("coupling block of the N tensor vanishes (diagonal slice)") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    RandomSpecOptions opt;
    opt.quartic = trial % 2 == 0;
    const auto spec = random_spec(rng, opt);
    const Vec x = random_state(rng, spec.dim());
    CHECK(mixed_third_coupling_norm(spec, x) <= 1e-6);
  }
}

TEST_CASE("state third derivative is nonzero when kappa > 0") {
  // FD of the Hessian diagonal along the same coordinate gives 6 kappa x.
  std::mt19937_64 rng(12);
  RandomSpecOptions opt;
  opt.quartic = true;
  const auto spec = random_spec(rng, opt);
  const Vec x = random_state(rng, spec.dim());
  const auto free = free_indices(spec);
  const double h = 1e-5;
  for (std::size_t j = 0; j < std::min<std::size_t>(free.size(), 4); ++j) {
    Vec xp = x, xm = x;
    xp[free[j]] += h;
    xm[free[j]] -= h;
    const double t3 = (hessian_free(spec, xp, free)(j, j) -
                       hessian_free(spec, xm, free)(j, j)) /
                      (2.0 * h);
    const double expect = 6.0 * spec.base.quartic[free[j]] * x[free[j]];
    CHECK(t3 == doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("theta round-trip through the canonical flattening") {
  std::mt19937_64 rng(13);
  RandomSpecOptions opt;
  opt.trainable_bias = true;
  const auto spec = random_spec(rng, opt);
  const Vec theta = spec.get_theta();
  Vec theta2 = theta;
  theta2[theta.size() / 2] += 0.25;
  const auto spec2 = spec.with_theta(theta2);
  CHECK((spec2.get_theta() - theta2).norm() == 0.0);
  CHECK((spec.get_theta() - theta).norm() == 0.0);  // original untouched
}
