#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fusebound/csv.hpp"
#include "fusebound/inference.hpp"
#include "fusebound/simulate.hpp"

using json = nlohmann::ordered_json;
namespace fb = fusebound;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream f(out_path);
    if (!f) throw fb::ValidationError("cannot write " + out_path);
    f << text << "\n";
  }
}

Eigen::VectorXd parse_direction(const std::string& d, Eigen::Index p) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
  if (!d.empty() && d[0] == 'e') {
    int k = std::stoi(d.substr(1));
    if (k < 1 || k > p) throw fb::ValidationError("--d index out of range");
    out(k - 1) = 1.0;
    return out;
  }
  std::stringstream ss(d);
  std::string tok;
  Eigen::Index i = 0;
  while (std::getline(ss, tok, ',')) {
    if (i >= p) throw fb::ValidationError("--d has too many entries");
    out(i++) = std::stod(tok);
  }
  if (i != p) throw fb::ValidationError("--d needs " + std::to_string(p) + " entries");
  return out;
}

int env_workers() {
  const char* v = std::getenv("FUSEBOUND_WORKERS");
  if (!v) return 1;
  int w = std::atoi(v);
  return w > 0 ? w : 1;
}

struct BoundsCmd {
  std::string y_file, x_file;
  std::string y = "y";
  std::vector<std::string> xo, xc, wa;
  std::string weight, cluster;
  std::string d = "e1";
  double alpha = 0.05;
  std::string k = "auto";
  std::string mode = "common";
  double p = -1.0;
  std::uint64_t seed = 12345;
  int workers = 0;
  std::string out, format = "json";
  bool no_intercept = false;
};

int run_bounds(const BoundsCmd& c) {
  auto t0 = std::chrono::steady_clock::now();
  fb::CsvTable t1 = fb::read_csv(c.y_file);
  fb::CsvTable t2 = fb::read_csv(c.x_file);

  fb::OutcomeSample s1;
  fb::RegressorSample s2;
  s1.y = t1.col(c.y);
  Eigen::Index n = s1.y.size();
  Eigen::Index m = t2.data.rows();

  s2.Xo.resize(m, static_cast<Eigen::Index>(c.xo.size()));
  for (std::size_t j = 0; j < c.xo.size(); ++j) {
    s2.Xo.col(static_cast<Eigen::Index>(j)) = t2.col(c.xo[j]);
  }

  // W = (W_a columns, X_c columns, intercept); both files must carry them
  bool intercept = !c.no_intercept;
  Eigen::Index qa = static_cast<Eigen::Index>(c.wa.size());
  Eigen::Index qc = static_cast<Eigen::Index>(c.xc.size());
  Eigen::Index q = qa + qc;
  bool has_w = q > 0;
  Eigen::Index q_full = has_w ? q + (intercept ? 1 : 0) : 0;
  s1.W.resize(n, q_full);
  s2.W.resize(m, q_full);
  for (Eigen::Index j = 0; j < qa; ++j) {
    s1.W.col(j) = t1.col(c.wa[static_cast<std::size_t>(j)]);
    s2.W.col(j) = t2.col(c.wa[static_cast<std::size_t>(j)]);
  }
  for (Eigen::Index j = 0; j < qc; ++j) {
    s1.W.col(qa + j) = t1.col(c.xc[static_cast<std::size_t>(j)]);
    s2.W.col(qa + j) = t2.col(c.xc[static_cast<std::size_t>(j)]);
  }
  if (has_w && intercept) {
    s1.W.col(q).setOnes();
    s2.W.col(q).setOnes();
  }
  if (!c.weight.empty()) {
    s1.weights = t1.col(c.weight);
    s2.weights = t2.col(c.weight);
  }

  fb::ProblemSpec spec;
  spec.intercept = intercept;
  for (Eigen::Index j = 0; j < qc; ++j) spec.common_regressor_columns.push_back(qa + j);
  spec.d = parse_direction(c.d, spec.p(s2.Xo.cols()));
  if (c.mode == "common") spec.population_mode = fb::PopulationMode::common;
  else if (c.mode == "reweighted") spec.population_mode = fb::PopulationMode::reweighted;
  else if (c.mode == "target_y_population") spec.population_mode = fb::PopulationMode::target_y_population;
  else if (c.mode == "subpopulation") spec.population_mode = fb::PopulationMode::subpopulation;
  else throw fb::ValidationError("unknown --mode " + c.mode);
  spec.p_d1 = c.p;

  fb::AnalysisOptions opt;
  opt.alpha = c.alpha;
  opt.K = (c.k == "auto") ? -1 : std::stoi(c.k);
  opt.seed = c.seed;
  opt.ci_method = has_w ? fb::CiMethod::stoye : fb::CiMethod::one_sided_z;
  if (!c.cluster.empty()) {
    if (spec.population_mode == fb::PopulationMode::common) {
      std::cerr << "warning: --cluster is only used by the bootstrap method; "
                   "default inference assumes i.i.d. rows\n";
    }
    Eigen::VectorXd cl1 = t1.col(c.cluster), cl2 = t2.col(c.cluster);
    for (Eigen::Index i = 0; i < n; ++i) opt.cluster1.push_back(static_cast<int>(cl1(i)));
    for (Eigen::Index j = 0; j < m; ++j) opt.cluster2.push_back(static_cast<int>(cl2(j)));
  }

  fb::Analysis a = fb::analyze(s1, s2, spec, opt);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json rep;
  rep["schema_version"] = 1;
  json cfg;
  cfg["y_file"] = c.y_file;
  cfg["x_file"] = c.x_file;
  cfg["y"] = c.y;
  cfg["xo"] = c.xo;
  cfg["xc"] = c.xc;
  cfg["wa"] = c.wa;
  cfg["weight"] = c.weight;
  cfg["cluster"] = c.cluster;
  cfg["d"] = c.d;
  cfg["alpha"] = c.alpha;
  cfg["k"] = c.k;
  cfg["mode"] = c.mode;
  cfg["p"] = c.p;
  cfg["seed"] = c.seed;
  cfg["workers"] = c.workers > 0 ? c.workers : env_workers();
  cfg["intercept"] = intercept;
  rep["config"] = cfg;
  rep["bounds"] = {{"lower", a.bounds.lower},
                   {"upper", a.bounds.upper},
                   {"delta_cross", a.bounds.delta_cross},
                   {"cell_qip_sum", a.bounds.cell_qip_sum},
                   {"mean_sq_eta", a.bounds.mean_sq_eta},
                   {"method", a.bounds.method},
                   {"n", a.bounds.n},
                   {"m", a.bounds.m}};
  rep["variance"] = {{"v_lower", a.var_lower},
                     {"v_upper", a.var_upper},
                     {"se_lower", a.se_lower},
                     {"se_upper", a.se_upper}};
  const char* mname = a.ci.method == fb::CiMethod::stoye ? "stoye"
                      : a.ci.method == fb::CiMethod::bootstrap ? "bootstrap"
                                                               : "one_sided_z";
  rep["ci"] = {{"level", a.ci.level},
               {"lower", a.ci.lower},
               {"upper", a.ci.upper},
               {"method", mname},
               {"critical_value", a.ci.critical_value}};
  json diag;
  diag["grouped"] = a.used_grouping;
  if (a.used_grouping) {
    diag["K"] = a.grouping.K;
    diag["k_reduced"] = a.grouping.k_reduced;
    std::vector<double> ph(a.grouping.p_hat.data(),
                           a.grouping.p_hat.data() + a.grouping.p_hat.size());
    diag["p_hat"] = ph;
  }
  rep["diagnostics"] = diag;
  rep["timing"] = {{"seconds", secs}};

  if (c.format == "csv") {
    std::vector<std::string> hdr = {"lower", "upper", "ci_lower", "ci_upper",
                                    "se_lower", "se_upper", "level"};
    fb::write_csv(c.out.empty() ? "/dev/stdout" : c.out, hdr,
                  {{a.bounds.lower, a.bounds.upper, a.ci.lower, a.ci.upper,
                    a.se_lower, a.se_upper, a.ci.level}});
  } else {
    emit(c.out, rep.dump(2));
  }
  return kExitOk;
}

struct SimulateCmd {
  std::vector<int> panels = {1, 2, 3};
  std::vector<long> ns = {400};
  int reps = 200;
  double alpha = 0.05;
  std::vector<int> k_sweep;
  std::uint64_t seed = 20240101;
  int workers = 0;
  long oracle_n = 1000000;
  std::string out, format = "csv";
};

int run_simulate(const SimulateCmd& c) {
  std::vector<std::vector<double>> rows;
  json jrows = json::array();
  for (int panel : c.panels) {
    fb::DgpConfig cfg;
    cfg.seed = c.seed;
    cfg.observed = panel == 1   ? fb::ObservedSet::none
                   : panel == 2 ? fb::ObservedSet::xc
                                : fb::ObservedSet::xc_wa;
    // one truth computation per panel
    fb::Interval truth;
    if (cfg.observed == fb::ObservedSet::xc_wa) {
      truth = fb::analytic_bounds_xc_wa(cfg);
    } else {
      truth = fb::oracle_identified_set(cfg, c.oracle_n).simulated;
    }
    std::vector<int> ks = c.k_sweep.empty() ? std::vector<int>{-1} : c.k_sweep;
    for (long nn : c.ns) {
      for (int K : ks) {
        cfg.n = cfg.m = nn;
        fb::MonteCarloOptions opt;
        opt.alpha = c.alpha;
        opt.K_override = K;
        opt.workers = c.workers > 0 ? c.workers : env_workers();
        opt.have_truth = true;
        opt.truth = truth;
        fb::MonteCarloReport r = fb::run_monte_carlo(cfg, c.reps, opt);
        double kval = K > 0 ? K : fb::default_k(nn, nn);
        rows.push_back({static_cast<double>(panel), static_cast<double>(nn), kval,
                        r.avg_lower, r.avg_upper, r.avg_ci_lower, r.avg_ci_upper,
                        r.excess_length, r.min_coverage, r.true_lower, r.true_upper,
                        static_cast<double>(r.failures), r.wall_time_sec});
        jrows.push_back({{"panel", panel}, {"n", nn}, {"K", kval},
                         {"avg_lower", r.avg_lower}, {"avg_upper", r.avg_upper},
                         {"avg_ci_lower", r.avg_ci_lower}, {"avg_ci_upper", r.avg_ci_upper},
                         {"excess_length", r.excess_length},
                         {"min_coverage", r.min_coverage},
                         {"true_lower", r.true_lower}, {"true_upper", r.true_upper},
                         {"failures", r.failures}, {"wall_time_sec", r.wall_time_sec}});
      }
    }
  }
  if (c.format == "csv") {
    fb::write_csv(c.out.empty() ? "/dev/stdout" : c.out,
                  {"panel", "n", "K", "avg_lower", "avg_upper", "avg_ci_lower",
                   "avg_ci_upper", "excess_length", "min_coverage", "true_lower",
                   "true_upper", "failures", "wall_time_sec"},
                  rows);
  } else {
    json rep;
    rep["schema_version"] = 1;
    rep["config"] = {{"panels", c.panels}, {"n", c.ns}, {"reps", c.reps},
                     {"alpha", c.alpha}, {"seed", c.seed}, {"k_sweep", c.k_sweep}};
    rep["rows"] = jrows;
    emit(c.out, rep.dump(2));
  }
  return kExitOk;
}

struct PaciniCmd {
  double rho = -1.0;
  double rho_max = 0.95, rho_step = 0.05;
  long n = 100000;
  std::uint64_t seed = 777;
  std::string out, format = "csv";
};

int run_pacini(const PaciniCmd& c) {
  std::vector<double> grid;
  if (c.rho >= 0.0) {
    grid.push_back(c.rho);
  } else {
    for (double r = 0.0; r <= c.rho_max + 1e-12; r += c.rho_step) grid.push_back(r);
  }
  auto rows = fb::pacini_ratio_study(grid, c.n, c.seed);
  std::vector<std::vector<double>> out;
  for (const auto& r : rows) {
    out.push_back({r.rho, r.sharp_width, r.pacini_width, r.ratio});
  }
  if (c.format == "csv") {
    fb::write_csv(c.out.empty() ? "/dev/stdout" : c.out,
                  {"rho", "sharp_width", "pacini_width", "ratio"}, out);
  } else {
    json rep;
    rep["schema_version"] = 1;
    rep["config"] = {{"n", c.n}, {"seed", c.seed}};
    rep["rows"] = json::array();
    for (const auto& r : rows) {
      rep["rows"].push_back({{"rho", r.rho}, {"sharp_width", r.sharp_width},
                             {"pacini_width", r.pacini_width}, {"ratio", r.ratio}});
    }
    emit(c.out, rep.dump(2));
  }
  return kExitOk;
}

struct GenCmd {
  int panel = 3;
  long n = 1000, m = 1000;
  std::uint64_t seed = 20240101;
  std::string prefix = "dgp";
};

int run_gen(const GenCmd& c) {
  fb::DgpConfig cfg;
  cfg.n = c.n;
  cfg.m = c.m;
  cfg.seed = c.seed;
  cfg.observed = c.panel == 1   ? fb::ObservedSet::none
                 : c.panel == 2 ? fb::ObservedSet::xc
                                : fb::ObservedSet::xc_wa;
  auto [s1, s2] = fb::draw_dgp(cfg, 1);

  std::vector<std::string> h1 = {"y"}, h2 = {"xo"};
  if (cfg.observed == fb::ObservedSet::xc) {
    h1.push_back("xc");
    h2.push_back("xc");
  } else if (cfg.observed == fb::ObservedSet::xc_wa) {
    h1.insert(h1.end(), {"wa", "xc"});
    h2.insert(h2.end(), {"wa", "xc"});
  }
  std::vector<std::vector<double>> r1, r2;
  for (Eigen::Index i = 0; i < s1.y.size(); ++i) {
    std::vector<double> row = {s1.y(i)};
    for (std::size_t cidx = 1; cidx < h1.size(); ++cidx) {
      row.push_back(s1.W(i, static_cast<Eigen::Index>(cidx) - 1));
    }
    r1.push_back(row);
  }
  for (Eigen::Index j = 0; j < s2.Xo.rows(); ++j) {
    std::vector<double> row = {s2.Xo(j, 0)};
    for (std::size_t cidx = 1; cidx < h2.size(); ++cidx) {
      row.push_back(s2.W(j, static_cast<Eigen::Index>(cidx) - 1));
    }
    r2.push_back(row);
  }
  fb::write_csv(c.prefix + "_y.csv", h1, r1);
  fb::write_csv(c.prefix + "_x.csv", h2, r2);
  std::cout << "wrote " << c.prefix << "_y.csv (" << c.n << " rows) and "
            << c.prefix << "_x.csv (" << c.m << " rows)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounds on best-linear-prediction coefficients from two unlinkable samples"};
  app.require_subcommand(1);

  BoundsCmd bc;
  auto* sb = app.add_subcommand("bounds", "Estimate bounds and a confidence interval from two CSV files");
  sb->add_option("y_file", bc.y_file, "CSV with the outcome sample")->required();
  sb->add_option("x_file", bc.x_file, "CSV with the regressor sample")->required();
  sb->add_option("--y", bc.y, "outcome column name");
  sb->add_option("--xo", bc.xo, "outside regressor columns")->delimiter(',')->required();
  sb->add_option("--xc", bc.xc, "common regressor columns (in both files)")->delimiter(',');
  sb->add_option("--wa", bc.wa, "auxiliary variable columns (in both files)")->delimiter(',');
  sb->add_option("--weight", bc.weight, "row-weight column");
  sb->add_option("--cluster", bc.cluster, "cluster id column (bootstrap only)");
  sb->add_option("--d", bc.d, "direction: e<k> or comma list");
  sb->add_option("--alpha", bc.alpha, "1 - confidence level");
  sb->add_option("--k", bc.k, "number of grouping cells or 'auto'");
  sb->add_option("--mode", bc.mode,
                 "population mode: common|reweighted|target_y_population|subpopulation");
  sb->add_option("--p", bc.p, "P(D=1) for the non-common modes");
  sb->add_option("--seed", bc.seed, "seed for grouping/bootstrap");
  sb->add_option("--workers", bc.workers, "worker threads");
  sb->add_option("--out", bc.out, "output path (default stdout)");
  sb->add_option("--format", bc.format, "csv or json");
  sb->add_flag("--no-intercept", bc.no_intercept, "exclude the intercept");

  SimulateCmd sc;
  auto* ss = app.add_subcommand("simulate", "Monte Carlo study on the built-in design");
  ss->add_option("--panels", sc.panels, "panels to run (1,2,3)")->delimiter(',');
  ss->add_option("--n", sc.ns, "sample sizes (n = m)")->delimiter(',');
  ss->add_option("--reps", sc.reps, "replications per row");
  ss->add_option("--alpha", sc.alpha, "1 - confidence level");
  ss->add_option("--k-sweep", sc.k_sweep, "explicit K values to sweep")->delimiter(',');
  ss->add_option("--seed", sc.seed, "base seed");
  ss->add_option("--workers", sc.workers, "worker threads");
  ss->add_option("--oracle-n", sc.oracle_n, "draw size for the true bounds");
  ss->add_option("--out", sc.out, "output path (default stdout)");
  ss->add_option("--format", sc.format, "csv or json");

  PaciniCmd pc;
  auto* sp = app.add_subcommand("compare-pacini", "Outer-vs-sharp interval width ratio");
  sp->add_option("--rho", pc.rho, "single correlation value");
  sp->add_option("--rho-max", pc.rho_max, "grid upper end");
  sp->add_option("--rho-step", pc.rho_step, "grid step");
  sp->add_option("--n", pc.n, "sample size per point");
  sp->add_option("--seed", pc.seed, "seed");
  sp->add_option("--out", pc.out, "output path (default stdout)");
  sp->add_option("--format", pc.format, "csv or json");

  GenCmd gc;
  auto* sg = app.add_subcommand("gen", "Write example CSV pairs from the built-in design");
  sg->add_option("--panel", gc.panel, "1, 2 or 3");
  sg->add_option("--n", gc.n, "outcome rows");
  sg->add_option("--m", gc.m, "regressor rows");
  sg->add_option("--seed", gc.seed, "seed");
  sg->add_option("--out-prefix", gc.prefix, "output file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*sb) return run_bounds(bc);
    if (*ss) return run_simulate(sc);
    if (*sp) return run_pacini(pc);
    if (*sg) return run_gen(gc);
  } catch (const fb::ValidationError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fb::SingularityError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
