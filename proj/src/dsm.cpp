#include "thermoprop/dsm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace thermoprop {

Mat make_covariance(int dim, std::uint64_t seed) {
  if (dim <= 0) throw SpecError("data_dim must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int r = std::max(1, dim / 4);
  Mat f(dim, r);
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < dim; ++i) f(i, j) = gauss(rng);
  return f * f.transpose() / double(r) + 0.25 * Mat::Identity(dim, dim);
}

std::vector<DsmSample> sample_batch(const DsmTaskConfig& cfg) {
  if (cfg.sigma_min <= 0.0 || cfg.sigma_min > cfg.sigma_max)
    throw SpecError("require 0 < sigma_min <= sigma_max");
  if (cfg.batch < 1) throw SpecError("batch must be >= 1");

  const Mat cov = make_covariance(cfg.data_dim, cfg.data_cov_seed);
  const Mat chol = Eigen::LLT<Mat>(cov).matrixL();

  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double log_min = std::log(cfg.sigma_min);
  const double log_max = std::log(cfg.sigma_max);

  std::vector<DsmSample> batch(cfg.batch);
  for (auto& s : batch) {
    Vec w(cfg.data_dim);
    for (int i = 0; i < cfg.data_dim; ++i) w[i] = gauss(rng);
    s.y = chol * w;
    s.sigma = std::exp(log_min + (log_max - log_min) * unif(rng));
    s.eps.resize(cfg.data_dim);
    for (int i = 0; i < cfg.data_dim; ++i)
      s.eps[i] = cfg.zero_noise ? 0.0 : gauss(rng);
    s.y_tilde = s.y + s.sigma * s.eps;
    s.target = (s.y - s.y_tilde) / (s.sigma * s.sigma);
  }
  return batch;
}

ReadoutCost readout_cost(const DsmSample& s) {
  ReadoutCost c;
  c.target = s.target;
  c.weight = s.sigma * s.sigma;
  return c;
}

double batch_loss(const SubstrateSpec& spec,
                  const std::vector<DsmSample>& batch,
                  const RelaxationConfig& cfg) {
  if (batch.empty()) throw SpecError("batch_loss: empty batch");
  const auto& p = spec.partition;
  const int oo = p.input_dim + p.hidden_dim;
  double loss = 0.0;
  for (const auto& s : batch) {
    if (s.target.size() != p.output_dim)
      throw SpecError("batch_loss: target/output_dim mismatch");
    const EquilibriumResult eq = free_phase(spec, s.y_tilde, s.sigma, cfg);
    loss += readout_cost(s).value(eq.state.segment(oo, p.output_dim));
  }
  return loss / double(batch.size());
}

void write_batch_csv(const std::vector<DsmSample>& batch,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SpecError("cannot open batch file: " + path);
  out << "sigma,y,eps\n";
  char buf[40];
  for (const auto& s : batch) {
    std::snprintf(buf, sizeof(buf), "%.17g", s.sigma);
    out << buf;
    for (int i = 0; i < s.y.size(); ++i) {
      std::snprintf(buf, sizeof(buf), ";%.17g", s.y[i]);
      out << buf;
    }
    for (int i = 0; i < s.eps.size(); ++i) {
      std::snprintf(buf, sizeof(buf), ";%.17g", s.eps[i]);
      out << buf;
    }
    out << "\n";
  }
}

std::vector<DsmSample> read_batch_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open batch file: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<DsmSample> batch;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ';')) vals.push_back(std::stod(tok));
    if (vals.size() < 3 || (vals.size() - 1) % 2 != 0)
      throw SpecError("malformed batch row");
    const int d = static_cast<int>((vals.size() - 1) / 2);
    DsmSample s;
    s.sigma = vals[0];
    s.y = Eigen::Map<Vec>(vals.data() + 1, d);
    s.eps = Eigen::Map<Vec>(vals.data() + 1 + d, d);
    s.y_tilde = s.y + s.sigma * s.eps;
    s.target = (s.y - s.y_tilde) / (s.sigma * s.sigma);
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace thermoprop
