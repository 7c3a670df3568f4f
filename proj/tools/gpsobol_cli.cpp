#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gpsobol/design.hpp"
#include "gpsobol/functions.hpp"
#include "gpsobol/kriging.hpp"
#include "gpsobol/kriging_sobol.hpp"
#include "gpsobol/multifidelity.hpp"
#include "gpsobol/serialize.hpp"

namespace fs = std::filesystem;
using namespace gpsobol;
using json = nlohmann::json;

namespace {

using Evaluator = std::function<double(const Eigen::VectorXd&)>;

struct Builtin {
  Evaluator f;
  InputDistribution dist;
};

Builtin builtin_function(const std::string& name) {
  if (name == "ishigami")
    return {[](const Eigen::VectorXd& x) { return ishigami(x); },
            ishigami_distribution()};
  if (name == "tank_cheap")
    return {[](const Eigen::VectorXd& x) { return tank_cheap(x); },
            tank_distribution()};
  if (name == "tank_expensive_stub")
    return {[](const Eigen::VectorXd& x) { return tank_expensive_stub(x); },
            tank_distribution()};
  throw input_error("unknown builtin function: " + name);
}

/// External adapter: writes the points as CSV to the command's standard
/// input and reads one value per line from its standard output.
Eigen::VectorXd run_external(const std::string& command,
                             const Eigen::MatrixXd& pts) {
  const fs::path dir = fs::temp_directory_path();
  const fs::path in = dir / ("gpsobol_in_" + std::to_string(::getpid()));
  const fs::path out = dir / ("gpsobol_out_" + std::to_string(::getpid()));
  {
    std::ofstream os(in);
    write_design_csv(os, pts);
  }
  const std::string cmd =
      command + " < " + in.string() + " > " + out.string();
  const int rc = std::system(cmd.c_str());
  if (rc != 0) throw input_error("external command failed: " + command);
  std::ifstream is(out);
  std::vector<double> vals;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) vals.push_back(std::stod(line));
  fs::remove(in);
  fs::remove(out);
  if (static_cast<int>(vals.size()) != pts.rows())
    throw input_error("external command returned " +
                      std::to_string(vals.size()) + " values for " +
                      std::to_string(pts.rows()) + " points");
  Eigen::VectorXd z(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) z[static_cast<int>(i)] = vals[i];
  return z;
}

struct FunctionSpec {
  Evaluator f;          // physical coordinates
  InputDistribution dist;
  std::string external;  // nonempty: batch through the adapter

  Eigen::VectorXd evaluate_unit(const Eigen::MatrixXd& u) const {
    Eigen::MatrixXd phys = dist.from_unit(u);
    if (!external.empty()) return run_external(external, phys);
    Eigen::VectorXd z(phys.rows());
    for (int i = 0; i < phys.rows(); ++i) z[i] = f(phys.row(i));
    return z;
  }
};

FunctionSpec parse_function(const json& jf, const json& cfg) {
  FunctionSpec spec;
  if (jf.contains("builtin")) {
    Builtin b = builtin_function(jf.at("builtin").get<std::string>());
    spec.f = b.f;
    spec.dist = b.dist;
  } else if (jf.contains("command")) {
    spec.external = jf.at("command").get<std::string>();
  } else {
    throw input_error("function: need \"builtin\" or \"command\"");
  }
  if (cfg.contains("distribution")) {
    const json& jd = cfg.at("distribution");
    spec.dist.lower = detail::vector_from_json(jd.at("lower"));
    spec.dist.upper = detail::vector_from_json(jd.at("upper"));
  }
  if (spec.dist.lower.size() == 0)
    throw input_error("distribution required for external functions");
  spec.dist.validate();
  return spec;
}

FitOptions parse_fit(const json& cfg, std::uint64_t seed, int level = -1) {
  FitOptions opt;
  opt.seed = seed;
  if (!cfg.contains("fit")) return opt;
  json jf = cfg.at("fit");
  if (jf.is_array()) jf = jf.at(level < 0 ? 0 : level);
  if (jf.contains("family"))
    opt.family = kernel_family_from_string(jf.at("family").get<std::string>());
  if (jf.contains("nugget")) opt.nugget = jf.at("nugget").get<double>();
  if (jf.contains("budget")) opt.optimizer_budget = jf.at("budget").get<int>();
  if (jf.contains("iters")) opt.optimizer_iters = jf.at("iters").get<int>();
  if (jf.contains("length_scales"))
    opt.fixed_length_scales = detail::vector_from_json(jf.at("length_scales"));
  return opt;
}

TrendBasis parse_trend(const json& cfg, int level = -1) {
  if (!cfg.contains("trend")) return TrendBasis{};
  json jt = cfg.at("trend");
  if (jt.is_array()) jt = jt.at(level < 0 ? 0 : level);
  return TrendBasis{trend_from_string(jt.get<std::string>())};
}

json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw input_error("cannot read config: " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw input_error("config parse error in " + path + ": " + e.what());
  }
}

std::uint64_t config_hash(const json& cfg) {
  // FNV-1a over the canonical dump: stable across runs and platforms
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : cfg.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_manifest(const fs::path& out, const json& cfg, std::uint64_t seed,
                    const std::vector<std::string>& artifacts) {
  json m;
  m["tool"] = "gpsobol";
  m["schema_version"] = kModelSchemaVersion;
  m["config_hash"] = config_hash(cfg);
  m["seed"] = seed;
  m["artifacts"] = artifacts;
  write_file((out / "manifest.json").string(), m.dump(2) + "\n");
}

json quantile_summary(const IndexSampleMatrix& s) {
  const std::vector<double> levels{0.025, 0.05, 0.5, 0.95, 0.975};
  json q;
  q["levels"] = levels;
  q["full"] = quantiles(s, levels, QuantileMode::full);
  q["metamodel_only"] = quantiles(s, levels, QuantileMode::metamodel_only);
  q["mean"] = mean_index(s);
  UncertaintyBudget b = uncertainty_budget(s);
  q["var_total"] = b.var_total;
  q["var_metamodel"] = b.var_metamodel;
  q["var_mc"] = b.var_mc;
  q["regime"] = to_string(b.regime);
  return q;
}

struct CommonArgs {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
};

std::uint64_t effective_seed(const CommonArgs& a, const json& cfg) {
  if (a.seed_set) return a.seed;
  if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
  throw input_error("no seed: pass --seed or set \"seed\" in the config");
}

struct SingleLevelData {
  FunctionSpec fn;
  Design design;       // unit cube
  Eigen::VectorXd z;
  KrigingModel model;
};

SingleLevelData build_single(const json& cfg, std::uint64_t seed) {
  SingleLevelData d;
  d.fn = parse_function(cfg.at("function"), cfg);
  const json& jd = cfg.at("design");
  const int n = jd.at("n").get<int>();
  const int iters = jd.value("optimize_iters", 2000);
  d.design = optimize_lhs(n, d.fn.dist.dim(), seed ^ 0xD351Full, iters);
  d.z = d.fn.evaluate_unit(d.design.points);
  d.model = fit(d.design, d.z, parse_trend(cfg), parse_fit(cfg, seed));
  return d;
}

std::vector<int> parse_u(const json& ju) {
  return ju.get<std::vector<int>>();
}

std::string u_tag(const std::vector<int>& u) {
  std::string t = "u";
  for (int j : u) t += "_" + std::to_string(j + 1);
  return t;
}

int cmd_fit(const CommonArgs& a) {
  json cfg = load_config(a.config);
  const std::uint64_t seed = effective_seed(a, cfg);
  fs::create_directories(a.out);
  SingleLevelData d = build_single(cfg, seed);
  write_file((fs::path(a.out) / "model.json").string(),
             to_json(d.model).dump(2) + "\n");
  {
    std::ofstream os(fs::path(a.out) / "design.csv");
    write_design_csv(os, d.design.points);
  }
  json summary;
  summary["n"] = d.design.n();
  summary["loo_efficiency"] = loo_efficiency(d.model);
  summary["sigma2"] = d.model.sigma2;
  summary["nugget"] = d.model.nugget;
  json theta = json::array();
  for (int i = 0; i < d.model.kernel.dim(); ++i)
    theta.push_back(d.model.kernel.length_scales[i]);
  summary["length_scales"] = theta;
  write_file((fs::path(a.out) / "fit_summary.json").string(),
             summary.dump(2) + "\n");
  write_manifest(a.out, cfg, seed,
                 {"model.json", "design.csv", "fit_summary.json"});
  std::cout << "fit: n=" << d.design.n()
            << " loo_eff=" << loo_efficiency(d.model) << "\n";
  return 0;
}

int cmd_sobol(const CommonArgs& a) {
  json cfg = load_config(a.config);
  const std::uint64_t seed = effective_seed(a, cfg);
  fs::create_directories(a.out);
  SingleLevelData d = build_single(cfg, seed);
  const json& ja = cfg.at("analysis");
  const int m = ja.at("m").get<int>();
  const int nz = ja.at("N_Z").get<int>();
  const int B = ja.at("B").get<int>();
  const EstimatorKind kind =
      estimator_from_string(ja.value("estimator", "janon"));
  Algorithm1Options opt;
  opt.threads = a.threads;
  InputDistribution unit = InputDistribution::unit_cube(d.fn.dist.dim());

  std::vector<std::string> artifacts;
  json summary = json::object();
  int idx = 0;
  for (const json& ju : ja.at("u")) {
    const std::vector<int> u = parse_u(ju);
    IndexSampleMatrix s = algorithm1(d.model, unit, u, m, nz, B, kind,
                                     substream_seed(seed, 100 + idx), opt);
    const std::string name = "index_samples_" + u_tag(u) + ".csv";
    std::ofstream os(fs::path(a.out) / name);
    write_index_samples_csv(os, s);
    artifacts.push_back(name);
    summary[u_tag(u)] = quantile_summary(s);
    std::cout << u_tag(u) << ": mean=" << mean_index(s) << "\n";
    ++idx;
  }
  write_file((fs::path(a.out) / "sobol_summary.json").string(),
             summary.dump(2) + "\n");
  artifacts.push_back("sobol_summary.json");
  write_manifest(a.out, cfg, seed, artifacts);
  return 0;
}

int cmd_balance(const CommonArgs& a) {
  json cfg = load_config(a.config);
  const std::uint64_t seed = effective_seed(a, cfg);
  fs::create_directories(a.out);
  SingleLevelData d = build_single(cfg, seed);
  const json& ja = cfg.at("analysis");
  const json& jb = cfg.at("balance");
  const EstimatorKind kind =
      estimator_from_string(ja.value("estimator", "janon"));
  Algorithm1Options opt;
  opt.threads = a.threads;
  InputDistribution unit = InputDistribution::unit_cube(d.fn.dist.dim());
  std::vector<std::string> artifacts;
  json summary = json::object();
  int idx = 0;
  for (const json& ju : ja.at("u")) {
    const std::vector<int> u = parse_u(ju);
    BalanceResult r = balance_m(
        d.model, unit, u, jb.at("m0").get<int>(),
        jb.value("growth", 2.0), ja.at("N_Z").get<int>(),
        ja.at("B").get<int>(), kind, substream_seed(seed, 100 + idx),
        jb.at("m_max").get<int>(), opt);
    const std::string name = "budget_trace_" + u_tag(u) + ".csv";
    std::ofstream os(fs::path(a.out) / name);
    write_budget_trace_csv(os, r.trace);
    artifacts.push_back(name);
    summary[u_tag(u)] = {{"m", r.m}, {"balanced", r.balanced}};
    std::cout << u_tag(u) << ": balanced_m="
              << (r.balanced ? std::to_string(r.m) : "none") << "\n";
    ++idx;
  }
  write_file((fs::path(a.out) / "balance_summary.json").string(),
             summary.dump(2) + "\n");
  artifacts.push_back("balance_summary.json");
  write_manifest(a.out, cfg, seed, artifacts);
  return 0;
}

struct MultiLevelData {
  std::vector<FunctionSpec> fns;
  std::vector<Design> designs;
  std::vector<Eigen::VectorXd> obs;
  MultiFidelityModel model;
  int dim() const { return fns.front().dist.dim(); }
};

MultiLevelData build_multi(const json& cfg, std::uint64_t seed) {
  MultiLevelData d;
  const json& jfs = cfg.at("functions");
  for (const json& jf : jfs) d.fns.push_back(parse_function(jf, cfg));
  const size_t s = d.fns.size();
  if (s < 2) throw input_error("mf commands need at least two functions");
  const json& jd = cfg.at("design");
  std::vector<int> ns = jd.at("n").get<std::vector<int>>();
  if (ns.size() != s) throw input_error("design.n must list one size per level");
  for (size_t t = 1; t < s; ++t)
    if (ns[t] >= ns[t - 1])
      throw input_error("design sizes must decrease with the level");
  const int iters = jd.value("optimize_iters", 2000);
  const int dim = d.fns[0].dist.dim();

  // build nested designs from the finest up
  std::vector<Design> designs(s, Design{});
  designs[s - 1] = optimize_lhs(ns[s - 1], dim, seed ^ 0xD351Full, iters);
  for (int t = static_cast<int>(s) - 2; t >= 0; --t) {
    Design cand = optimize_lhs(ns[t], dim, seed ^ (0xD352Full + t), iters);
    designs[t] = nested_union(cand, designs[t + 1]).first;
  }
  d.designs = designs;
  std::vector<TrendBasis> trends;
  std::vector<FitOptions> opts;
  for (size_t t = 0; t < s; ++t) {
    d.obs.push_back(d.fns[t].evaluate_unit(designs[t].points));
    trends.push_back(parse_trend(cfg, static_cast<int>(t)));
    opts.push_back(parse_fit(cfg, seed, static_cast<int>(t)));
  }
  d.model = mf_fit(d.designs, d.obs, trends, opts);
  return d;
}

int cmd_mf_fit(const CommonArgs& a) {
  json cfg = load_config(a.config);
  const std::uint64_t seed = effective_seed(a, cfg);
  fs::create_directories(a.out);
  MultiLevelData d = build_multi(cfg, seed);
  write_file((fs::path(a.out) / "model.json").string(),
             to_json(d.model).dump(2) + "\n");
  std::vector<std::string> artifacts{"model.json"};
  json summary;
  summary["levels"] = d.model.levels();
  json rhos = json::array();
  for (const auto& lvl : d.model.upper) rhos.push_back(lvl.rho());
  summary["rho"] = rhos;
  for (size_t t = 0; t < d.designs.size(); ++t) {
    const std::string name = "design_level" + std::to_string(t + 1) + ".csv";
    std::ofstream os(fs::path(a.out) / name);
    write_design_csv(os, d.designs[t].points);
    artifacts.push_back(name);
  }
  write_file((fs::path(a.out) / "mf_fit_summary.json").string(),
             summary.dump(2) + "\n");
  artifacts.push_back("mf_fit_summary.json");
  write_manifest(a.out, cfg, seed, artifacts);
  std::cout << "mf-fit: levels=" << d.model.levels() << "\n";
  return 0;
}

int cmd_mf_sobol(const CommonArgs& a) {
  json cfg = load_config(a.config);
  const std::uint64_t seed = effective_seed(a, cfg);
  fs::create_directories(a.out);
  MultiLevelData d = build_multi(cfg, seed);
  const json& ja = cfg.at("analysis");
  const int m = ja.at("m").get<int>();
  const int nz = ja.at("N_Z").get<int>();
  const int B = ja.at("B").get<int>();
  const EstimatorKind kind =
      estimator_from_string(ja.value("estimator", "janon"));
  Algorithm1Options opt;
  opt.threads = a.threads;
  InputDistribution unit = InputDistribution::unit_cube(d.dim());
  std::vector<std::string> artifacts;
  json summary = json::object();
  int idx = 0;
  for (const json& ju : ja.at("u")) {
    const std::vector<int> u = parse_u(ju);
    auto ms = mf_algorithm1(d.model, unit, u, m, nz, B, kind,
                            substream_seed(seed, 100 + idx), opt);
    json per_level = json::object();
    for (size_t t = 0; t < ms.size(); ++t) {
      const std::string name = "index_samples_" + u_tag(u) + "_level" +
                               std::to_string(t + 1) + ".csv";
      std::ofstream os(fs::path(a.out) / name);
      write_index_samples_csv(os, ms[t]);
      artifacts.push_back(name);
      per_level["level" + std::to_string(t + 1)] = quantile_summary(ms[t]);
    }
    summary[u_tag(u)] = per_level;
    std::cout << u_tag(u) << ": mean_level" << ms.size() << "="
              << mean_index(ms.back()) << "\n";
    ++idx;
  }
  write_file((fs::path(a.out) / "mf_sobol_summary.json").string(),
             summary.dump(2) + "\n");
  artifacts.push_back("mf_sobol_summary.json");
  write_manifest(a.out, cfg, seed, artifacts);
  return 0;
}

json demo_ishigami_config() {
  return json{
      {"function", {{"builtin", "ishigami"}}},
      {"design", {{"n", 200}, {"optimize_iters", 2000}}},
      {"trend", "constant"},
      {"fit", {{"budget", 3}, {"iters", 120}}},
      {"analysis",
       {{"u", {{0}, {1}, {2}}},
        {"m", 5000},
        {"N_Z", 100},
        {"B", 100},
        {"estimator", "janon"}}},
      {"seed", 20260826}};
}

json demo_tank_config() {
  return json{
      {"functions",
       {{{"builtin", "tank_cheap"}}, {{"builtin", "tank_expensive_stub"}}}},
      {"design", {{"n", {100, 20}}, {"optimize_iters", 1000}}},
      {"trend", "constant"},
      {"fit", {{"budget", 3}, {"iters", 120}}},
      {"analysis",
       {{"u", {{0}, {1}, {2}, {3}}},
        {"m", 3000},
        {"N_Z", 60},
        {"B", 60},
        {"estimator", "janon"}}},
      {"seed", 20260826}};
}

int run_demo(const CommonArgs& a, json cfg, bool multi) {
  CommonArgs args = a;
  fs::create_directories(args.out);
  const fs::path cfg_path = fs::path(args.out) / "demo_config.json";
  write_file(cfg_path.string(), cfg.dump(2) + "\n");
  args.config = cfg_path.string();
  return multi ? cmd_mf_sobol(args) : cmd_sobol(args);
}

int cmd_eval(const std::string& name) {
  Builtin b = builtin_function(name);
  Eigen::MatrixXd pts = read_design_csv(std::cin);
  std::ostringstream os;
  for (int i = 0; i < pts.rows(); ++i)
    os << detail::fmt(b.f(pts.row(i))) << '\n';
  std::cout << os.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sobol sensitivity indices via kriging and multi-fidelity "
               "co-kriging surrogates"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* c = sub->add_option("--config", args.config, "JSON config path");
    if (need_config) c->required();
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed", args.seed, "master seed (overrides config)")
        ->each([&](const std::string&) { args.seed_set = true; });
    sub->add_option("--threads", args.threads, "worker thread cap");
  };

  auto* fit_cmd = app.add_subcommand("fit", "fit a kriging surrogate");
  add_common(fit_cmd, true);
  auto* sobol_cmd =
      app.add_subcommand("sobol", "index distributions for a surrogate");
  add_common(sobol_cmd, true);
  auto* balance_cmd =
      app.add_subcommand("balance", "grow m until the variances balance");
  add_common(balance_cmd, true);
  auto* mf_fit_cmd =
      app.add_subcommand("mf-fit", "fit a multi-fidelity co-kriging stack");
  add_common(mf_fit_cmd, true);
  auto* mf_sobol_cmd = app.add_subcommand(
      "mf-sobol", "per-level index distributions for a co-kriging stack");
  add_common(mf_sobol_cmd, true);
  auto* demo_i =
      app.add_subcommand("demo-ishigami", "built-in single-fidelity demo");
  add_common(demo_i, false);
  auto* demo_t =
      app.add_subcommand("demo-tank", "built-in multi-fidelity demo");
  add_common(demo_t, false);
  std::string eval_name;
  auto* eval_cmd = app.add_subcommand(
      "eval", "evaluate a builtin on CSV points from standard input");
  eval_cmd->add_option("name", eval_name, "builtin function name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return cmd_fit(args);
    if (sobol_cmd->parsed()) return cmd_sobol(args);
    if (balance_cmd->parsed()) return cmd_balance(args);
    if (mf_fit_cmd->parsed()) return cmd_mf_fit(args);
    if (mf_sobol_cmd->parsed()) return cmd_mf_sobol(args);
    if (demo_i->parsed()) return run_demo(args, demo_ishigami_config(), false);
    if (demo_t->parsed()) return run_demo(args, demo_tank_config(), true);
    if (eval_cmd->parsed()) return cmd_eval(eval_name);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
