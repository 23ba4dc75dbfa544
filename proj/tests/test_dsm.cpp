#include <doctest.h>

#include "test_helpers.hpp"
#include "thermoprop/dsm.hpp"

using namespace thermoprop;
using namespace tp_test;

TEST_CASE("fixed sigma range gives constant sigma") {
  DsmTaskConfig cfg;
  cfg.data_dim = 4;
  cfg.sigma_min = cfg.sigma_max = 0.3;
  cfg.batch = 16;
  for (const auto& s : sample_batch(cfg)) CHECK(s.sigma == 0.3);
}

TEST_CASE("zero-noise hook gives zero targets") {
  DsmTaskConfig cfg;
  cfg.data_dim = 4;
  cfg.batch = 8;
  cfg.zero_noise = true;
  for (const auto& s : sample_batch(cfg)) {
    CHECK(s.target.norm() == 0.0);
    CHECK((s.y_tilde - s.y).norm() == 0.0);
  }
}

TEST_CASE("reconstruction identity holds bit-exactly") {
  DsmTaskConfig cfg;
  cfg.data_dim = 6;
  cfg.batch = 64;
  cfg.rng_seed = 3;
  for (const auto& s : sample_batch(cfg)) {
    const Vec recon = s.target * (s.sigma * s.sigma) + s.y_tilde;
    CHECK((recon - s.y).norm() <= 1e-14 * std::max(1.0, s.y.norm()));
  }
}

TEST_CASE("sample moments match the constructed covariance") {
  DsmTaskConfig cfg;
  cfg.data_dim = 4;
  cfg.data_cov_seed = 11;
  cfg.batch = 100000;
  cfg.rng_seed = 5;
  const Mat cov_expect = make_covariance(cfg.data_dim, cfg.data_cov_seed);
  const auto batch = sample_batch(cfg);
  Mat sum2 = Mat::Zero(4, 4);
  Vec sum1 = Vec::Zero(4);
  for (const auto& s : batch) {
    sum1 += s.y;
    sum2 += s.y * s.y.transpose();
  }
  const Vec mean = sum1 / cfg.batch;
  const Mat cov = sum2 / cfg.batch - mean * mean.transpose();
  CHECK((cov - cov_expect).norm() <= 0.05 * cov_expect.norm());
}

TEST_CASE("determinism under seeds") {
  DsmTaskConfig cfg;
  cfg.data_dim = 4;
  cfg.batch = 4;
  cfg.rng_seed = 9;
  const auto a = sample_batch(cfg);
  const auto b = sample_batch(cfg);
  for (int i = 0; i < cfg.batch; ++i) {
    CHECK((a[i].y - b[i].y).norm() == 0.0);
    CHECK(a[i].sigma == b[i].sigma);
    CHECK((a[i].eps - b[i].eps).norm() == 0.0);
  }
}

TEST_CASE("invalid sigma range rejected") {
  DsmTaskConfig cfg;
  cfg.data_dim = 4;
  cfg.sigma_min = 0.0;
  CHECK_THROWS_AS(sample_batch(cfg), SpecError);
  cfg.sigma_min = 2.0;
  cfg.sigma_max = 1.0;
  CHECK_THROWS_AS(sample_batch(cfg), SpecError);
}

TEST_CASE("batch_loss on zero couplings reduces to the target norm") {
  BlockPartition p;
  p.input_dim = 2;
  p.hidden_dim = 4;
  p.output_dim = 2;
  p.module_sizes = {4, 4};
  BaseEnergy base{Vec::Ones(8), Vec::Zero(8), Vec::Zero(8)};
  const auto spec = SubstrateSpec::make(p, base, {});

  DsmTaskConfig task;
  task.data_dim = 2;
  task.batch = 8;
  task.rng_seed = 17;
  const auto batch = sample_batch(task);

  RelaxationConfig cfg;
  cfg.max_steps = 100000;
  cfg.convergence_tol = 1e-11;
  const double loss = batch_loss(spec, batch, cfg);
  double expect = 0.0;
  for (const auto& s : batch)
    expect += 0.5 * s.sigma * s.sigma * s.target.squaredNorm();
  expect /= batch.size();
  CHECK(loss == doctest::Approx(expect).epsilon(1e-8));
  CHECK(loss >= 0.0);
}

TEST_CASE("batch CSV round trip") {
  DsmTaskConfig cfg;
  cfg.data_dim = 3;
  cfg.batch = 5;
  cfg.rng_seed = 21;
  const auto batch = sample_batch(cfg);
  write_batch_csv(batch, "/tmp/tp_batch.csv");
  const auto loaded = read_batch_csv("/tmp/tp_batch.csv");
  REQUIRE(loaded.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(loaded[i].sigma == batch[i].sigma);
    CHECK((loaded[i].y - batch[i].y).norm() == 0.0);
    CHECK((loaded[i].y_tilde - batch[i].y_tilde).norm() == 0.0);
  }
}
