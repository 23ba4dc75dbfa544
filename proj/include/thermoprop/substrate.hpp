#pragma once

// Bilinearly-coupled substrate energy: partitioned state, low-rank
// inter-module couplings, per-coordinate convex base energy, and the
// derivatives (in x and theta) everything downstream consumes.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace thermoprop {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Block { input, hidden, output };

struct BlockPartition {
  int input_dim = 0;
  int hidden_dim = 0;
  int output_dim = 0;
  std::vector<int> module_sizes;

  int dim() const { return input_dim + hidden_dim + output_dim; }
  int num_modules() const { return static_cast<int>(module_sizes.size()); }
  int module_offset(int m) const;
  int module_of(int i) const;
  Block block_of(int i) const;
  // Coordinate clamped to log(sigma) during free/nudged phases. First
  // hidden coordinate by convention; requires hidden_dim >= 1.
  int sigma_coord() const { return input_dim; }
  std::vector<int> output_indices() const;
  void validate() const;
};

// W_{mm'} = u * v^T, rank <= k, never materialized in hot paths.
struct LowRankCoupling {
  int source_module = 0;  // m
  int target_module = 0;  // m', m < m'
  Mat u;                  // d_m x k
  Mat v;                  // d_m' x k
  int rank() const { return static_cast<int>(u.cols()); }
};

// E_0(x) = sum_i (a_i/2) x_i^2 + (kappa_i/4) x_i^4 - b0_i x_i
struct BaseEnergy {
  Vec stiffness;  // a_i > 0
  Vec bias;       // b0_i
  Vec quartic;    // kappa_i >= 0
};

enum class EstimatorTag { one_sided, symmetric, oracle_implicit, oracle_fd };

struct GradientEstimate {
  Vec values;  // canonical parameter order
  EstimatorTag tag = EstimatorTag::oracle_implicit;
  double beta = 0.0;
};

// Immutable after construction (via make()); safe to share across threads.
//
// Canonical theta order: couplings sorted by (m, m'); within a coupling the
// u factor column-major, then (when train_v) the v factor column-major;
// trainable biases last, by coordinate index.
struct SubstrateSpec {
  BlockPartition partition;
  BaseEnergy base;
  std::vector<LowRankCoupling> couplings;
  bool train_v = true;
  std::vector<int> trainable_bias;  // sorted coordinate indices, may be empty
  double lambda_floor = 0.1;
  double coupling_rescale = 1.0;  // < 1 when construction had to shrink couplings

  int dim() const { return partition.dim(); }
  int param_count() const;

  Vec get_theta() const;
  // No Hessian re-validation; used by FD perturbations and SGD steps.
  SubstrateSpec with_theta(const Vec& theta) const;

  // Validates invariants, rescales couplings by a single global scalar if
  // the free Hessian at the clamped origin dips below lambda_floor.
  static SubstrateSpec make(BlockPartition partition, BaseEnergy base,
                            std::vector<LowRankCoupling> couplings,
                            double lambda_floor = 0.1, bool train_v = true,
                            std::vector<int> trainable_bias = {});
};

// Deterministic Gaussian factor init, entries scaled by 1/sqrt(k * d).
LowRankCoupling seeded_coupling(const BlockPartition& p, int m, int mp, int k,
                                std::uint64_t seed, double gain = 1.0);

double energy(const SubstrateSpec& spec, const Vec& x);
Vec grad_x(const SubstrateSpec& spec, const Vec& x);
GradientEstimate grad_theta(const SubstrateSpec& spec, const Vec& x);

// Free coordinates in default phase order: everything outside the input
// block except the sigma-conditioning coordinate.
std::vector<int> free_indices(const SubstrateSpec& spec);

// Dense Hessian of E restricted to `free` x `free`.
Mat hessian_free(const SubstrateSpec& spec, const Vec& x,
                 const std::vector<int>& free);
Mat hessian_free(const SubstrateSpec& spec, const Vec& x);

// M[p][j] = d^2 E / d theta_p d x_{free[j]}
Mat mixed_second(const SubstrateSpec& spec, const Vec& x,
                 const std::vector<int>& free);
Mat mixed_second(const SubstrateSpec& spec, const Vec& x);

// Max |d^3 E / d theta_p dx_j dx_j| over coupling-parameter rows p and free
// coordinates j, estimated by central differences of mixed_second along the
// diagonal slice. Identically zero for the bilinear coupling block.
double mixed_third_coupling_norm(const SubstrateSpec& spec, const Vec& x,
                                 double fd_step = 1e-4);

void check_state(const SubstrateSpec& spec, const Vec& x);

}  // namespace thermoprop
