#pragma once

// Synthetic denoising-score-matching task: Gaussian data with a fixed
// low-rank-plus-diagonal covariance, log-uniform noise levels, corrupted
// inputs and score targets.

#include <cstdint>
#include <vector>

#include "thermoprop/eqprop.hpp"

namespace thermoprop {

struct DsmSample {
  Vec y;        // clean, length data_dim
  double sigma = 1.0;
  Vec eps;      // recorded noise draw
  Vec y_tilde;  // y + sigma * eps
  Vec target;   // (y - y_tilde) / sigma^2
};

struct DsmTaskConfig {
  int data_dim = 0;
  std::uint64_t data_cov_seed = 0;
  double sigma_min = 0.1;
  double sigma_max = 1.0;
  int batch = 1;
  std::uint64_t rng_seed = 0;
  bool zero_noise = false;  // test hook: force eps = 0
};

Mat make_covariance(int dim, std::uint64_t seed);

std::vector<DsmSample> sample_batch(const DsmTaskConfig& cfg);

ReadoutCost readout_cost(const DsmSample& s);

// Mean over the batch of (sigma^2 / 2) ||[x_star]_O - target||^2.
double batch_loss(const SubstrateSpec& spec,
                  const std::vector<DsmSample>& batch,
                  const RelaxationConfig& cfg);

void write_batch_csv(const std::vector<DsmSample>& batch,
                     const std::string& path);
std::vector<DsmSample> read_batch_csv(const std::string& path);

}  // namespace thermoprop
