// Command-line front end: experiment drivers, cost accounting, spec
// validation. Outputs land under {out}/{experiment_id}/{config_hash}/.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>
#include <string>

#include "thermoprop/costs.hpp"
#include "thermoprop/experiments.hpp"
#include "thermoprop/io.hpp"

namespace fs = std::filesystem;
using namespace thermoprop;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::string preset;
  std::string mode;
  int num_seeds = -1;
  double beta = -1.0;
  double beta_phys = -1.0;
  double tau = -1.0;
  int batch = -1;
  int train_steps = -1;
  double learning_rate = -1.0;
  int jobs = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "experiment config JSON file");
  cmd->add_option("--out", o.out_dir, "output root directory");
  cmd->add_option("--preset", o.preset,
                  "substrate preset: paper-e1, paper-exact, desk-small, "
                  "desk-beta");
  cmd->add_option("--mode", o.mode,
                  "free/nudged phase budget: exact (tight tolerance) or "
                  "replication (fixed 300 steps)");
  cmd->add_option("--seeds", o.num_seeds, "number of seeds / draws per point");
  cmd->add_option("--beta", o.beta, "nudge strength for single-beta runs");
  cmd->add_option("--beta-phys", o.beta_phys,
                  "inverse temperature of the stochastic sweep");
  cmd->add_option("--tau", o.tau, "readout averaging window (time units)");
  cmd->add_option("--batch", o.batch, "samples per batch");
  cmd->add_option("--steps", o.train_steps, "training steps");
  cmd->add_option("--lr", o.learning_rate, "learning rate");
  cmd->add_option("--jobs", o.jobs, "worker thread bound");
}

ExperimentConfig build_config(const CommonOpts& o) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw SpecError("cannot read config: " + o.config_path);
    Json j;
    in >> j;
    cfg = ExperimentConfig::from_json(j);
  }
  if (!o.preset.empty()) cfg.preset = o.preset;
  if (!o.mode.empty()) cfg.mode = o.mode;
  if (o.mode != "" && o.mode != "exact" && o.mode != "replication")
    throw SpecError("mode must be 'exact' or 'replication'");
  if (o.num_seeds >= 0) cfg.num_seeds = o.num_seeds;
  if (o.beta >= 0.0) cfg.beta = o.beta;
  if (o.beta_phys >= 0.0) cfg.beta_phys = o.beta_phys;
  if (o.tau >= 0.0) cfg.tau = o.tau;
  if (o.batch >= 0) cfg.batch = o.batch;
  if (o.train_steps >= 0) cfg.train_steps = o.train_steps;
  if (o.learning_rate >= 0.0) cfg.learning_rate = o.learning_rate;
  if (o.jobs >= 0) cfg.jobs = o.jobs;
  if (const char* env = std::getenv("THERMOPROP_SEED"))
    cfg.base_seed = std::strtoull(env, nullptr, 10);
  return cfg;
}

fs::path run_dir(const CommonOpts& o, const std::string& experiment_id,
                 const ExperimentConfig& cfg) {
  return fs::path(o.out_dir) / experiment_id / cfg.hash();
}

void emit_tables(const fs::path& dir, const ExperimentConfig& cfg,
                 const std::vector<SweepRecord>& records,
                 const std::string& summary, const std::string& svg) {
  fs::create_directories(dir);
  write_records_csv(records, (dir / "table.csv").string());
  Json j;
  j["config"] = cfg.to_json();
  j["config"].erase("jobs");  // execution detail, keeps reruns byte-identical
  j["config_hash"] = cfg.hash();
  j["records"] = records_to_json(records);
  write_text_file((dir / "table.json").string(), j.dump(2) + "\n");
  write_text_file((dir / "summary.txt").string(), summary);
  if (!svg.empty()) write_text_file((dir / "plot.svg").string(), svg);
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

int cmd_e1(const CommonOpts& o) {
  ExperimentConfig cfg = build_config(o);
  const E1Result r = run_e1(cfg);
  std::ostringstream s;
  s << "e1 gradient agreement (" << cfg.preset << ", " << cfg.mode
    << " mode, beta=" << format_double(cfg.beta) << ", " << cfg.num_seeds
    << " seeds)\n";
  s << "one-sided cosine vs oracle: " << fmt("%+.4f", r.one_sided_mean)
    << " +- " << fmt("%.4f", r.one_sided_std) << "\n";
  s << "symmetric cosine vs oracle: " << fmt("%+.4f", r.symmetric_mean)
    << " +- " << fmt("%.4f", r.symmetric_std) << "\n";
  PlotSeries one{"one-sided", {}, {}}, sym{"symmetric", {}, {}};
  for (const auto& rec : r.records) {
    auto& dst = rec.metric_name == "one_sided_cosine" ? one : sym;
    dst.x.push_back(double(rec.seed) + 1.0);
    dst.y.push_back(rec.metric_value);
  }
  emit_tables(run_dir(o, "e1", cfg), cfg, r.records, s.str(),
              render_svg_plot({one, sym}, "cosine per seed", false, false));
  std::fputs(s.str().c_str(), stdout);
  return 0;
}

int cmd_e2(const CommonOpts& o, const std::string& estimator) {
  ExperimentConfig cfg = build_config(o);
  const E2Result r = run_e2(cfg);
  std::ostringstream s;
  s << "e2 bias scaling (" << cfg.preset << ", " << cfg.mode << " mode)\n";
  if (estimator != "symmetric")
    s << "one-sided slope: " << fmt("%.3f", r.one_sided.slope)
      << " (r2=" << fmt("%.4f", r.one_sided.r_squared) << ")\n";
  if (estimator != "one-sided")
    s << "symmetric slope: " << fmt("%.3f", r.symmetric.slope)
      << " (r2=" << fmt("%.4f", r.symmetric.r_squared) << ")\n";
  PlotSeries one{"one-sided", {}, {}}, sym{"symmetric", {}, {}};
  for (const auto& rec : r.records) {
    auto& dst = rec.metric_name == "bias_one_sided" ? one : sym;
    dst.x.push_back(rec.beta);
    dst.y.push_back(rec.metric_value);
  }
  emit_tables(run_dir(o, "e2", cfg), cfg, r.records, s.str(),
              render_svg_plot({one, sym}, "bias vs beta", true, true));
  std::fputs(s.str().c_str(), stdout);
  return 0;
}

int cmd_e3(const CommonOpts& o) {
  ExperimentConfig cfg = build_config(o);
  const E3SweepResult r = run_e3_sweep(cfg);
  std::ostringstream s;
  s << "e3 bias-variance sweep (" << cfg.preset
    << ", beta_phys=" << format_double(cfg.beta_phys)
    << ", tau=" << format_double(cfg.tau) << ", " << cfg.num_seeds
    << " draws per beta)\n";
  s << "variance slope: " << fmt("%.3f", r.variance_fit.slope)
    << " (r2=" << fmt("%.4f", r.variance_fit.r_squared) << ")\n";
  s << "bias slope: " << fmt("%.3f", r.bias_fit.slope)
    << " (r2=" << fmt("%.4f", r.bias_fit.r_squared) << ")\n";
  s << "beta_dagger predicted: " << format_double(r.beta_dagger_pred)
    << ", empirical argmin: " << format_double(r.beta_dagger_emp) << "\n";
  s << "mse U-shaped: " << (r.mse_u_shaped ? "yes" : "no") << "\n";
  PlotSeries mse{"mse", r.betas, r.mse}, var{"variance", {}, {}};
  for (const auto& rec : r.records)
    if (rec.metric_name == "variance") {
      var.x.push_back(rec.beta);
      var.y.push_back(rec.metric_value);
    }
  emit_tables(run_dir(o, "e3-sweep", cfg), cfg, r.records, s.str(),
              render_svg_plot({mse, var}, "mse and variance vs beta", true,
                              true));
  std::fputs(s.str().c_str(), stdout);
  return 0;
}

int cmd_train(const CommonOpts& o) {
  ExperimentConfig cfg = build_config(o);
  const E3TrainingResult r = run_e3_training(cfg);
  const auto& first = r.rows.front();
  const auto& last = r.rows.back();
  double align_late = 0.0;
  const int tail = int(r.rows.size()) / 4 + 1;
  for (int i = int(r.rows.size()) - tail; i < int(r.rows.size()); ++i)
    align_late += r.rows[i].alignment;
  align_late /= tail;
  std::ostringstream s;
  s << "e3 training (" << cfg.preset << ", " << cfg.train_steps
    << " steps, lr=" << format_double(cfg.learning_rate)
    << ", beta=" << format_double(cfg.beta) << ")\n";
  s << "loss eqprop: " << format_double(first.loss_eqprop) << " -> "
    << format_double(last.loss_eqprop) << "\n";
  s << "loss oracle: " << format_double(first.loss_oracle) << " -> "
    << format_double(last.loss_oracle) << "\n";
  s << "late-step alignment: " << fmt("%.4f", align_late) << "\n";
  PlotSeries le{"loss eqprop", {}, {}}, lo{"loss oracle", {}, {}};
  for (const auto& row : r.rows) {
    le.x.push_back(row.step + 1.0);
    le.y.push_back(row.loss_eqprop);
    lo.x.push_back(row.step + 1.0);
    lo.y.push_back(row.loss_oracle);
  }
  emit_tables(run_dir(o, "e3-train", cfg), cfg, r.records, s.str(),
              render_svg_plot({le, lo}, "training loss", false, true));
  std::fputs(s.str().c_str(), stdout);
  return 0;
}

int cmd_costs(const std::string& preset, const PhysicalParams& flags,
              bool custom, const std::string& out_path) {
  PhysicalParams p = representative_params();
  if (preset != "representative" && !preset.empty())
    throw SpecError("unknown costs preset: " + preset);
  if (custom) p = flags;
  const CostReport r = advantage_ratio(p);
  Json j;
  j["params"] = {{"kb_t", p.kb_t},       {"lambda_star", p.lambda_star},
                 {"n_cells", p.n_cells}, {"c_init", p.c_init},
                 {"n_mac", p.n_mac},     {"e_mac", p.e_mac}};
  j["analog_step_joules"] = r.analog_joules;
  j["per_cell_equilibration_joules"] = r.per_cell_equilibration_joules;
  j["digital_step_joules"] = r.digital_joules;
  j["ratio_analog_over_digital"] = r.ratio;
  j["advantage_digital_over_analog"] = r.advantage;
  const std::string text = j.dump(2) + "\n";
  if (!out_path.empty()) write_text_file(out_path, text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_validate(const std::string& preset, const std::string& spec_path) {
  SubstrateSpec spec;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw SpecError("cannot read spec: " + spec_path);
    Json j;
    in >> j;
    spec = spec_from_json(j);  // throws SpecError on invariant violations
  } else {
    spec = make_preset(preset.empty() ? "desk-small" : preset).spec;
  }
  const auto free = free_indices(spec);
  double lmin = std::numeric_limits<double>::infinity();
  if (!free.empty()) {
    const Mat h = hessian_free(spec, Vec::Zero(spec.dim()), free);
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    lmin = es.eigenvalues().minCoeff();
  }
  std::printf("ok: dim=%d params=%d couplings=%zu lambda_min=%.6g floor=%.6g\n",
              spec.dim(), spec.param_count(), spec.couplings.size(), lmin,
              spec.lambda_floor);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thermoprop: bilinear substrate simulation and equilibrium "
               "propagation training"};
  app.require_subcommand(1);

  CommonOpts e1o, e2o, e3o, tro;
  std::string estimator = "both";
  auto* e1 = app.add_subcommand("e1", "gradient agreement vs the oracle");
  add_common(e1, e1o);
  auto* e2 = app.add_subcommand("e2", "bias order vs beta (log-log fits)");
  add_common(e2, e2o);
  e2->add_option("--estimator", estimator,
                 "summary filter: one-sided, symmetric, both")
      ->check(CLI::IsMember({"one-sided", "symmetric", "both"}));
  auto* e3 = app.add_subcommand("e3", "bias-variance sweep and beta-dagger");
  add_common(e3, e3o);
  auto* tr = app.add_subcommand("train", "symmetric-EqProp vs oracle SGD");
  add_common(tr, tro);

  std::string costs_preset = "representative", costs_out;
  PhysicalParams costs_params;
  auto* co = app.add_subcommand("costs", "physical-unit energy accounting");
  co->add_option("--preset", costs_preset, "costs preset: representative");
  co->add_option("--out", costs_out, "also write the JSON report here");
  auto* nc = co->add_option("--n-cells", costs_params.n_cells, "analog cells");
  co->add_option("--lambda-star", costs_params.lambda_star, "stiffness");
  co->add_option("--kb-t", costs_params.kb_t, "thermal energy (J)");
  co->add_option("--n-mac", costs_params.n_mac, "digital MACs per step");
  co->add_option("--e-mac", costs_params.e_mac, "energy per MAC (J)");

  std::string val_preset, val_spec;
  auto* va = app.add_subcommand("validate", "check substrate spec invariants");
  va->add_option("--preset", val_preset, "preset name");
  va->add_option("--spec", val_spec, "substrate spec JSON file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (e1->parsed()) return cmd_e1(e1o);
    if (e2->parsed()) return cmd_e2(e2o, estimator);
    if (e3->parsed()) return cmd_e3(e3o);
    if (tr->parsed()) return cmd_train(tro);
    if (co->parsed())
      return cmd_costs(costs_preset, costs_params, nc->count() > 0, costs_out);
    if (va->parsed()) return cmd_validate(val_preset, val_spec);
  } catch (const SpecError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  } catch (const Json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }
  return 0;
}
