// Command-line front end: simulate designed datasets, fit dose-response
// curves, run cross-fitted inference, run coverage studies, and draw herded
// samples from counterfactual outcome distributions.  All floating-point
// output carries 17 significant digits so files round-trip bit-exactly; every
// command is deterministic given its inputs, flags, and seed.  Exit code 0
// means every requested output file was written.

#include <Eigen/Core>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ksel/distributions.hpp"
#include "ksel/dml.hpp"
#include "ksel/dynamic_estimators.hpp"
#include "ksel/experiment.hpp"
#include "ksel/io.hpp"
#include "ksel/simulation.hpp"
#include "ksel/static_estimators.hpp"

namespace {

using nlohmann::json;
using namespace ksel;

// Every flag a subcommand can take; each subcommand binds the subset it uses.
struct RunConfig {
  std::string in_path;
  std::string shift_path;
  std::vector<std::string> col_specs;  // role=name overrides for the reader

  std::string out_path;  // simulate dataset / infer report
  std::string out_curve;
  std::string out_meta;
  std::string out_samples;
  std::string out_rows;
  std::string out_summary;

  std::string dgp = "s1";
  std::string method = "curve";
  std::string estimand;

  std::string penalty = "loocv";
  double fixed_lambda = 1e-3;
  double theory_c = 2.0;
  double theory_b3 = 2.0;
  double theory_c3 = 2.0;

  double d = 1.0;
  double dprime = 0.0;
  std::vector<double> v;  // subgroup level; vector-valued for curve fits
  std::string grid_spec;
  double level = 0.05;
  int folds = 5;
  double clip_eps = 0.01;
  double censor_bound = RieszEstimator::default_censor_bound();

  long long n = 100;
  long long m = 10;
  std::vector<long long> sizes;
  long long reps = 1;
  std::uint64_t seed = 0;
  std::uint64_t kernel_seed = 0;
  bool treat_indicator = false;
  int threads = 0;
};

void apply_threads(const RunConfig& c) {
  if (c.threads > 0) Eigen::setNbThreads(c.threads);
}

FitOptions penalties(const RunConfig& c) {
  FitOptions opt;
  if (c.penalty == "loocv") {
    opt.mode = PenaltyMode::loocv;
  } else if (c.penalty == "fixed") {
    opt.mode = PenaltyMode::fixed;
    opt.fixed_lambda = c.fixed_lambda;
  } else if (c.penalty == "theory") {
    opt.mode = PenaltyMode::theory;
    opt.theory_c = c.theory_c;
    opt.theory_b3 = c.theory_b3;
    opt.theory_c3 = c.theory_c3;
  } else {
    throw ConfigError("--penalty must be one of loocv, fixed, theory");
  }
  opt.validate();
  return opt;
}

DgpSpec dgp_from(const std::string& name) {
  if (name == "s1") return DgpSpec::s1();
  if (name == "s2") return DgpSpec::s2();
  if (name == "d1") return DgpSpec::d1();
  throw ConfigError("--dgp must be one of s1, s2, d1");
}

// "lo:hi:count" -> count evenly spaced doses from lo to hi.
VectorXd parse_grid(const std::string& spec) {
  const auto fail = [&] { throw ConfigError("--grid expects lo:hi:count, got '" + spec + "'"); };
  const auto c1 = spec.find(':');
  const auto c2 = spec.find(':', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos) fail();
  const auto number = [&](const std::string& cell) {
    char* end = nullptr;
    const double value = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(value)) fail();
    return value;
  };
  const double lo = number(spec.substr(0, c1));
  const double hi = number(spec.substr(c1 + 1, c2 - c1 - 1));
  const double count_raw = number(spec.substr(c2 + 1));
  const auto count = static_cast<Index>(count_raw);
  if (count < 1 || static_cast<double>(count) != count_raw) fail();
  VectorXd grid(count);
  if (count == 1) {
    grid[0] = lo;
  } else {
    for (Index i = 0; i < count; ++i)
      grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return grid;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string cell;
  std::istringstream in(value);
  while (std::getline(in, cell, ',')) parts.push_back(cell);
  return parts;
}

ColumnMap parse_columns(const std::vector<std::string>& specs) {
  ColumnMap map;
  for (const std::string& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
      throw ConfigError("--col expects role=name, got '" + spec + "'");
    const std::string role = spec.substr(0, eq);
    const std::string value = spec.substr(eq + 1);
    if (role == "s")
      map.s = value;
    else if (role == "y")
      map.y = value;
    else if (role == "d")
      map.d = value;
    else if (role == "x")
      map.x = split_list(value);
    else if (role == "m")
      map.m = split_list(value);
    else if (role == "v")
      map.v = split_list(value);
    else
      throw ConfigError("--col role must be one of s, y, d, x, m, v; got '" + role + "'");
  }
  return map;
}

Dataset load_dataset(const RunConfig& c, std::vector<std::string>* warnings_out = nullptr) {
  std::vector<std::string> warnings;
  const Dataset data = read_dataset_csv(c.in_path, parse_columns(c.col_specs), &warnings);
  for (const std::string& w : warnings) std::cerr << "ksel: warning: " << w << "\n";
  if (warnings_out) *warnings_out = std::move(warnings);
  return data;
}

std::string require_shift(const RunConfig& c) {
  if (c.shift_path.empty())
    throw ConfigError("estimand '" + c.estimand + "' requires --shift-in");
  return c.shift_path;
}

VectorXd subgroup_vector(const RunConfig& c) {
  if (c.v.empty()) throw ConfigError("estimand '" + c.estimand + "' requires --v");
  return Eigen::Map<const VectorXd>(c.v.data(), static_cast<Index>(c.v.size()));
}

double subgroup_scalar(const RunConfig& c) {
  if (c.v.size() != 1) throw ConfigError("estimand '" + c.estimand + "' takes a scalar --v");
  return c.v.front();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw InputError(path + ": write failed");
}

void write_json_file(const std::string& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

void cmd_simulate(const RunConfig& c) {
  apply_threads(c);
  const Dataset data = simulate(dgp_from(c.dgp), static_cast<Index>(c.n), c.seed);
  write_dataset_csv(c.out_path, data);
  std::cerr << "simulate: wrote " << c.out_path << " (" << data.n() << " rows)\n";
}

void cmd_fit_curve(const RunConfig& c) {
  apply_threads(c);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> warnings;
  const Dataset data = load_dataset(c, &warnings);
  const FitOptions opt = penalties(c);
  const VectorXd grid = parse_grid(c.grid_spec);
  const KernelSet kers = KernelSet::defaults(data, c.treat_indicator, c.kernel_seed);

  CurveEstimate curve;
  json pen;
  const std::string& e = c.estimand;
  if (e == "dyn-ate" || e == "dyn-ds") {
    const DynamicFit fit(data, kers, opt);
    pen["lambda"] = fit.lambda();
    pen["lambda4"] = fit.lambda4();
    if (e == "dyn-ate") {
      curve = fit.ate_curve(grid);
    } else {
      const ShiftedSample tilde = read_shift_csv(require_shift(c), /*need_dynamic=*/true);
      curve = fit.ds_curve(tilde, grid);
      pen["lambda5"] = fit.lambda5(tilde);
    }
  } else {
    const bool with_v = e == "cate" || e == "grad-cate";
    const StaticFit fit(data, kers, opt, with_v);
    pen["lambda"] = fit.lambda();
    if (e == "ate") {
      curve = fit.ate_curve(grid);
    } else if (e == "ds") {
      curve = fit.ds_curve(read_shift_csv(require_shift(c), false).x, grid);
    } else if (e == "att") {
      curve = fit.att_curve(c.d, grid);
      pen["lambda1"] = fit.lambda1();
    } else if (e == "cate") {
      curve = fit.cate_curve(subgroup_vector(c), grid);
      pen["lambda2"] = fit.lambda2();
    } else if (e == "grad-ate") {
      curve = fit.grad_ate_curve(grid);
    } else if (e == "grad-ds") {
      curve = fit.grad_ds_curve(read_shift_csv(require_shift(c), false).x, grid);
    } else if (e == "grad-att") {
      curve = fit.grad_att_curve(c.d, grid);
      pen["lambda1"] = fit.lambda1();
    } else if (e == "grad-cate") {
      curve = fit.grad_cate_curve(subgroup_vector(c), grid);
      pen["lambda2"] = fit.lambda2();
    } else {
      throw ConfigError("unknown estimand '" + e + "'");
    }
  }
  write_curve_csv(c.out_curve, curve);

  const double runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json meta = {{"schema_version", 1}, {"command", "fit-curve"}, {"estimand", e},
                     {"n", data.n()},       {"penalties", pen},       {"runtime_s", runtime_s},
                     {"seed", c.kernel_seed}, {"warnings", warnings}};
  write_json_file(c.out_meta, meta);
}

void cmd_infer(const RunConfig& c) {
  apply_threads(c);
  const Dataset data = load_dataset(c);
  DmlConfig cfg;
  cfg.level = c.level;
  cfg.seed = c.seed;
  cfg.fit = penalties(c);
  cfg.clip_eps = c.clip_eps;
  cfg.censor_bound = c.censor_bound;

  json pen = json::array();
  const auto fold_entries = [&pen](const EffectEstimate& r, const char* arm) {
    for (const FoldDiagnostics& f : r.fold_info) {
      json row = {{"fold", f.fold},       {"held_out", f.held_out}, {"lambda", f.lambda},
                  {"lambda3", f.lambda3}, {"lambda4", f.lambda4},   {"lambda6", f.lambda6},
                  {"lambda7", f.lambda7}, {"censored", f.censored}, {"clipped", f.clipped}};
      if (arm) row["arm"] = arm;
      pen.push_back(std::move(row));
    }
  };

  EffectEstimate est;
  const std::string& e = c.estimand;
  if (e == "ate" || e == "ds" || e == "att" || e == "cate") {
    DmlKind kind = DmlKind::ate(c.d);
    if (e == "ds") kind = DmlKind::ds(c.d);
    if (e == "att") kind = DmlKind::att(c.d, c.dprime);
    if (e == "cate") kind = DmlKind::cate(c.d, subgroup_scalar(c));
    est = dml_static(data, kind, c.folds, cfg);
    fold_entries(est, nullptr);
  } else if (e == "ate-contrast") {
    const EffectEstimate hi = dml_static(data, DmlKind::ate(c.d), c.folds, cfg);
    const EffectEstimate lo = dml_static(data, DmlKind::ate(c.dprime), c.folds, cfg);
    est = effect_contrast(hi, lo, c.level);
    fold_entries(hi, "d");
    fold_entries(lo, "dprime");
  } else if (e == "dyn-ate") {
    est = dml_dynamic(data, c.d, c.folds, cfg);
    fold_entries(est, nullptr);
  } else if (e == "dyn-ate-contrast") {
    const EffectEstimate hi = dml_dynamic(data, c.d, c.folds, cfg);
    const EffectEstimate lo = dml_dynamic(data, c.dprime, c.folds, cfg);
    est = effect_contrast(hi, lo, c.level);
    fold_entries(hi, "d");
    fold_entries(lo, "dprime");
  } else {
    throw ConfigError("unknown estimand '" + e + "'");
  }

  const json doc = {{"schema_version", 1},
                    {"command", "infer"},
                    {"estimand", e},
                    {"point", est.theta},
                    {"se", est.sigma},
                    {"ci", {est.ci_lo, est.ci_hi}},
                    {"level", est.level},
                    {"n", est.n},
                    {"folds", est.folds},
                    {"penalties", pen},
                    {"clip_eps", cfg.clip_eps},
                    {"seed", c.seed}};
  write_json_file(c.out_path, doc);
}

TargetSpec coverage_target(const RunConfig& c) {
  TargetSpec t;
  t.d = c.d;
  t.dprime = c.dprime;
  if (!c.v.empty()) t.v = subgroup_scalar(c);
  const std::string& e = c.estimand;
  if (e == "ate")
    t.kind = TargetSpec::Kind::ate;
  else if (e == "ate-contrast")
    t.kind = TargetSpec::Kind::ate_contrast;
  else if (e == "ds") {
    t.kind = TargetSpec::Kind::ds;
    t.shift = TargetSpec::Shift::x_uniform01;
  } else if (e == "att")
    t.kind = TargetSpec::Kind::att;
  else if (e == "cate")
    t.kind = TargetSpec::Kind::cate;
  else if (e == "grad-ate")
    t.kind = TargetSpec::Kind::grad_ate;
  else
    throw ConfigError("unknown estimand '" + e + "'");
  return t;
}

void cmd_coverage(const RunConfig& c) {
  apply_threads(c);
  ExperimentConfig cfg;
  cfg.target = coverage_target(c);
  cfg.method = c.method == "dml" ? ExperimentMethod::dml : ExperimentMethod::curve;
  if (!c.grid_spec.empty()) cfg.grid = parse_grid(c.grid_spec);
  cfg.folds = c.folds;
  cfg.level = c.level;
  cfg.fit = penalties(c);

  if (c.sizes.empty()) throw ConfigError("--sizes must list at least one sample size");
  std::vector<Index> sizes(c.sizes.begin(), c.sizes.end());
  const ExperimentReport report =
      run_experiment(dgp_from(c.dgp), cfg, sizes, static_cast<Index>(c.reps), c.seed);

  write_text_file(c.out_rows, report_rows_csv(report));
  json size_rows = json::array();
  for (const SizeSummary& s : report.summary) {
    size_rows.push_back({{"n", s.n},
                         {"reps_ok", s.reps_ok},
                         {"failures", s.failures},
                         {"rmse", s.rmse},
                         {"mean_bias", s.mean_bias},
                         {"coverage", s.has_coverage ? json(s.coverage) : json(nullptr)}});
    // Timing is diagnostic only; keeping it out of the artifacts keeps them
    // bit-reproducible across machines and runs.
    std::cerr << "coverage: n=" << s.n << " ok=" << s.reps_ok << " failures=" << s.failures
              << " median_runtime_s=" << s.median_runtime_s << "\n";
  }
  const json doc = {{"schema_version", 1}, {"command", "coverage"}, {"dgp", c.dgp},
                    {"method", c.method},  {"estimand", c.estimand}, {"level", c.level},
                    {"reps", c.reps},      {"seed", c.seed},         {"sizes", size_rows}};
  write_json_file(c.out_summary, doc);
}

void cmd_herd(const RunConfig& c) {
  apply_threads(c);
  const Dataset data = load_dataset(c);
  const FitOptions opt = penalties(c);
  const KernelSet kers = KernelSet::defaults(data, c.treat_indicator, c.kernel_seed);

  const std::string& e = c.estimand;
  const DistEmbedding emb = [&] {
    if (e == "dist-ate") return dist_embedding_static(data, DistKind::ate(c.d), kers, opt);
    if (e == "dist-ds")
      return dist_embedding_static(
          data, DistKind::ds(c.d, read_shift_csv(require_shift(c), false)), kers, opt);
    if (e == "dist-att")
      return dist_embedding_static(data, DistKind::att(c.d, c.dprime), kers, opt);
    if (e == "dist-cate")
      return dist_embedding_static(data, DistKind::cate(c.d, subgroup_scalar(c)), kers, opt);
    if (e == "dyn-dist-ate") return dist_embedding_dynamic(data, DistKind::ate(c.d), kers, opt);
    if (e == "dyn-dist-ds")
      return dist_embedding_dynamic(
          data, DistKind::ds(c.d, read_shift_csv(require_shift(c), true)), kers, opt);
    throw ConfigError("unknown estimand '" + e + "'");
  }();

  const VectorXd draws = herd(emb, static_cast<Index>(c.m), default_candidates(emb));
  const double discrepancy = mmd(draws, emb);

  std::ostringstream samples;
  samples << "y\n";
  for (Index i = 0; i < draws.size(); ++i) samples << fmt17(draws[i]) << "\n";
  write_text_file(c.out_samples, samples.str());

  const json meta = {{"schema_version", 1}, {"command", "herd"}, {"estimand", e},
                     {"n", data.n()},       {"m", c.m},          {"mmd", discrepancy},
                     {"seed", c.kernel_seed}};
  write_json_file(c.out_meta, meta);
}

// ---------------------------------------------------------------------------
// Flag wiring
// ---------------------------------------------------------------------------

void add_input_flags(CLI::App* sub, RunConfig& c) {
  sub->add_option("--in", c.in_path, "input dataset CSV")->required();
  sub->add_option("--col", c.col_specs,
                  "column-role override, role=name (roles s, y, d; x, m, v accept "
                  "comma-separated lists); repeatable");
}

void add_penalty_flags(CLI::App* sub, RunConfig& c) {
  sub->add_option("--penalty", c.penalty, "ridge-penalty selection rule")
      ->check(CLI::IsMember({"loocv", "fixed", "theory"}))
      ->capture_default_str();
  sub->add_option("--lambda", c.fixed_lambda, "penalty value for --penalty fixed")
      ->capture_default_str();
  sub->add_option("--theory-c", c.theory_c, "smoothness exponent for --penalty theory")
      ->capture_default_str();
  sub->add_option("--theory-b3", c.theory_b3, "balancing-weight exponent for --penalty theory")
      ->capture_default_str();
  sub->add_option("--theory-c3", c.theory_c3, "balancing-weight exponent for --penalty theory")
      ->capture_default_str();
}

void add_kernel_flags(CLI::App* sub, RunConfig& c) {
  sub->add_flag("--treat-indicator", c.treat_indicator,
                "use an exact-match treatment kernel (discrete doses)");
  sub->add_option("--kernel-seed", c.kernel_seed,
                  "seed for the subsampled bandwidth heuristic on large inputs")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ksel: kernel ridge estimators for causal inference with selectively observed outcomes"};
  app.require_subcommand(1);
  RunConfig c;
  app.add_option("--threads", c.threads, "cap internal linear-algebra threads");

  CLI::App* sim = app.add_subcommand("simulate", "draw a designed dataset and write it as CSV");
  sim->add_option("--dgp", c.dgp, "design: s1, s2 (static), d1 (mediated)")
      ->check(CLI::IsMember({"s1", "s2", "d1"}))
      ->capture_default_str();
  sim->add_option("--n", c.n, "sample size")->required()->check(CLI::PositiveNumber);
  sim->add_option("--seed", c.seed, "draw seed")->capture_default_str();
  sim->add_option("--out", c.out_path, "output dataset CSV")->required();
  sim->callback([&c] { cmd_simulate(c); });

  CLI::App* fit = app.add_subcommand("fit-curve", "estimate a dose-response curve on a grid");
  add_input_flags(fit, c);
  fit->add_option("--estimand", c.estimand, "curve to estimate")
      ->required()
      ->check(CLI::IsMember({"ate", "ds", "att", "cate", "grad-ate", "grad-ds", "grad-att",
                             "grad-cate", "dyn-ate", "dyn-ds"}));
  fit->add_option("--grid", c.grid_spec, "dose grid, lo:hi:count")->required();
  fit->add_option("--d", c.d, "treated dose (att, grad-att)")->capture_default_str();
  fit->add_option("--v", c.v, "subgroup covariate value (cate, grad-cate)")->delimiter(',');
  fit->add_option("--shift-in", c.shift_path, "alternative-population CSV (ds, grad-ds, dyn-ds)");
  add_penalty_flags(fit, c);
  add_kernel_flags(fit, c);
  fit->add_option("--out-curve", c.out_curve, "output curve CSV (columns d, estimate)")->required();
  fit->add_option("--out-meta", c.out_meta, "output metadata JSON")->required();
  fit->callback([&c] { cmd_fit_curve(c); });

  CLI::App* inf = app.add_subcommand("infer", "cross-fitted point estimate with a Gaussian CI");
  add_input_flags(inf, c);
  inf->add_option("--estimand", c.estimand, "effect to infer")
      ->required()
      ->check(CLI::IsMember({"ate", "ate-contrast", "ds", "att", "cate", "dyn-ate",
                             "dyn-ate-contrast"}));
  inf->add_option("--d", c.d, "treatment level")->capture_default_str();
  inf->add_option("--dprime", c.dprime, "comparison level (contrasts, att)")->capture_default_str();
  inf->add_option("--v", c.v, "subgroup value (cate)")->delimiter(',');
  inf->add_option("--folds", c.folds, "cross-fitting folds")->capture_default_str();
  inf->add_option("--level", c.level, "two-sided miscoverage of the interval")
      ->capture_default_str();
  inf->add_option("--seed", c.seed, "fold-assignment seed")->capture_default_str();
  inf->add_option("--clip-eps", c.clip_eps, "propensity clip band")->capture_default_str();
  inf->add_option("--censor-bound", c.censor_bound, "balancing-weight clamp")
      ->capture_default_str();
  add_penalty_flags(inf, c);
  inf->add_option("--out", c.out_path, "output report JSON")->required();
  inf->callback([&c] { cmd_infer(c); });

  CLI::App* cov = app.add_subcommand("coverage", "replicated bias/coverage study on a designed DGP");
  cov->add_option("--dgp", c.dgp, "design: s1, s2, d1")
      ->check(CLI::IsMember({"s1", "s2", "d1"}))
      ->capture_default_str();
  cov->add_option("--method", c.method, "curve fits or cross-fitted inference")
      ->check(CLI::IsMember({"curve", "dml"}))
      ->capture_default_str();
  cov->add_option("--estimand", c.estimand, "target of the study")
      ->required()
      ->check(CLI::IsMember({"ate", "ate-contrast", "ds", "att", "cate", "grad-ate"}));
  cov->add_option("--d", c.d, "treatment level")->capture_default_str();
  cov->add_option("--dprime", c.dprime, "comparison level")->capture_default_str();
  cov->add_option("--v", c.v, "subgroup value (cate)")->delimiter(',');
  cov->add_option("--grid", c.grid_spec, "dose grid lo:hi:count (curve method)");
  cov->add_option("--sizes", c.sizes, "sample sizes, comma-separated")
      ->required()
      ->delimiter(',');
  cov->add_option("--reps", c.reps, "replications per size")->required()
      ->check(CLI::PositiveNumber);
  cov->add_option("--folds", c.folds, "cross-fitting folds (dml method)")->capture_default_str();
  cov->add_option("--level", c.level, "interval miscoverage (dml method)")->capture_default_str();
  cov->add_option("--seed", c.seed, "master seed; per-rep streams derive from it")
      ->capture_default_str();
  add_penalty_flags(cov, c);
  cov->add_option("--out-rows", c.out_rows, "per-replication CSV")->required();
  cov->add_option("--out-summary", c.out_summary, "aggregated JSON")->required();
  cov->callback([&c] { cmd_coverage(c); });

  CLI::App* hrd = app.add_subcommand("herd", "draw representative samples from a counterfactual "
                                             "outcome distribution");
  add_input_flags(hrd, c);
  hrd->add_option("--estimand", c.estimand, "distribution to sample")
      ->required()
      ->check(CLI::IsMember({"dist-ate", "dist-ds", "dist-att", "dist-cate", "dyn-dist-ate",
                             "dyn-dist-ds"}));
  hrd->add_option("--d", c.d, "treatment level")->capture_default_str();
  hrd->add_option("--dprime", c.dprime, "comparison level (dist-att)")->capture_default_str();
  hrd->add_option("--v", c.v, "subgroup value (dist-cate)")->delimiter(',');
  hrd->add_option("--shift-in", c.shift_path, "alternative-population CSV (dist-ds, dyn-dist-ds)");
  hrd->add_option("--m", c.m, "number of herded draws")->required()->check(CLI::PositiveNumber);
  add_penalty_flags(hrd, c);
  add_kernel_flags(hrd, c);
  hrd->add_option("--out-samples", c.out_samples, "herded draws CSV (column y)")->required();
  hrd->add_option("--out-meta", c.out_meta, "diagnostics JSON, including the reproduction "
                                            "discrepancy of the draws")->required();
  hrd->callback([&c] { cmd_herd(c); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "ksel: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
