#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "unisim/harness.hpp"

using namespace unisim;

namespace {

RunConfig load_config(const std::string& config_path,
                      const std::vector<std::string>& sets) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = parse_config_file(config_path);
  for (const std::string& kv : sets) apply_override(cfg, kv);
  return cfg;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

void print_params(const UnifiedParams& p) {
  std::printf(
      "certificate: A1=%.6g B1=%.6g C1=%.6g D1=%.6g rho=%.6g A2=%.6g "
      "B2=%.6g C2=%.6g%s\n",
      p.A1, p.B1, p.C1, p.D1, p.rho, p.A2, p.B2, p.C2,
      p.empirical ? " (empirical)" : "");
}

int cmd_run(const std::string& config_path,
            const std::vector<std::string>& sets) {
  RunConfig cfg = load_config(config_path, sets);
  RunResult res = run(cfg);
  const IterationRecord& last = res.records.back();
  std::printf("iters=%lld stop_k=%lld %s=%s eta=%.6g f_gap=%.6g "
              "grad_norm=%.6g floats=%lld%s\n",
              last.k, res.stop_k, res.pl_metric ? "target" : "target",
              res.pl_metric ? "f_gap" : "grad_norm", res.eta, last.f_gap,
              last.grad_norm, last.floats_sent,
              res.diverged ? " DIVERGED" : "");
  if (!cfg.output.empty()) std::printf("csv: %s\n", cfg.output.c_str());
  return res.diverged ? 1 : 0;
}

int cmd_bound(const std::string& config_path,
              const std::vector<std::string>& sets) {
  RunConfig cfg = load_config(config_path, sets);
  FiniteSumObjective obj = make_problem(cfg.problem);
  MethodSpec spec = parse_method(cfg.method);
  Framework fw = parse_framework(cfg.framework);
  CompressionOperator comp = parse_compressor(cfg.compressor, obj.d);
  const double eps = cfg.epsilon;
  Vec x0 = Vec::Constant(obj.d, cfg.x0);
  const double delta0 = eval_f(obj, x0) - obj.f_star;

  // stepsize: corollary cap for the variance-reduced single-node methods,
  // 1/L otherwise, halved until the certificate is feasible
  double q = spec.method == Method::lsvrg
                 ? spec.p
                 : static_cast<double>(spec.b) / obj.total_components();
  double eta = 1.0 / obj.L;
  if (fw == Framework::none &&
      (spec.method == Method::lsvrg || spec.method == Method::saga))
    eta = resolve_eta_rho(spec.method, obj.L, obj.Lbar, spec.b, q).eta;

  double alpha = 0, beta = 0;
  if (fw == Framework::diana) {
    auto [a, b] = default_diana_knobs(comp.omega);
    alpha = a;
    beta = b;
    std::string arg = cfg.framework.rfind("diana:", 0) == 0
                          ? cfg.framework.substr(6)
                          : "auto";
    if (arg != "auto" && !arg.empty()) {
      alpha = std::stod(arg);
      beta = 2.0 / alpha;
    }
  }

  UnifiedParams p;
  for (int tries = 0;; ++tries) {
    try {
      if (fw == Framework::none) {
        p = certificate(spec, obj, eta);
      } else {
        std::vector<LocalParams> locals;
        for (int i = 0; i < obj.m; ++i)
          locals.push_back(local_certificate(spec, obj, i, eta));
        if (fw == Framework::diana)
          p = compose_diana(locals, comp.omega, obj.m, obj.Li,
                            obj.delta_fstar(), eta, alpha, beta);
        else if (spec.method == Method::saga)
          p = compose_dc(locals, comp.omega, obj.m, obj.Li, obj.delta_fstar());
        else
          p = compose_dc_same(locals, comp.omega, obj.m, obj.Li,
                              obj.delta_fstar());
      }
      break;
    } catch (const std::runtime_error& e) {
      if (tries > 100) throw;
      eta *= 0.5;
    }
  }

  std::printf("problem=%s method=%s framework=%s compressor=%s\n",
              cfg.problem.c_str(), cfg.method.c_str(), cfg.framework.c_str(),
              cfg.compressor.c_str());
  std::printf("L=%.6g Lbar=%.6g delta0=%.6g eps=%.6g omega=%.6g\n", obj.L,
              obj.Lbar, delta0, eps, comp.omega);
  print_params(p);

  BoundResult k1 = thm1_iters(p, obj.L, delta0, eps);
  double eta1 = thm1_stepsize(p, obj.L, std::max(k1.raw, 1.0), eps);
  std::printf("eta(nonconvex)=%.6g  K(nonconvex)=%.6g (%lld)%s\n", eta1,
              k1.raw, k1.iters, k1.empirical ? " [empirical]" : "");
  if (obj.mu) {
    BoundResult k2 = thm2_iters(p, obj.L, *obj.mu, delta0, eps);
    std::printf("eta(pl,decreasing)<=%.6g  K(pl,decreasing)=%.6g (%lld)\n",
                thm2_stepsize_cap(p, obj.L, *obj.mu), k2.raw, k2.iters);
    ConstantPlResult k5 = thm5_constant_pl(p, obj.L, *obj.mu, delta0, eps);
    std::printf("eta(pl,constant)=%.6g  K(pl,constant)=%.6g (%lld)\n", k5.eta,
                k5.K.raw, k5.K.iters);
  }

  // closed-form bound where one exists for this combination
  std::string base;
  switch (spec.method) {
    case Method::gd: base = "gd"; break;
    case Method::sgd: base = "sgd"; break;
    case Method::lsvrg: base = "lsvrg"; break;
    case Method::saga: base = "saga"; break;
  }
  std::string id = fw == Framework::none
                       ? base
                       : (fw == Framework::dc ? "dc-" + base : "diana-" + base);
  CorollaryInputs ci;
  ci.delta0 = delta0;
  ci.L = obj.L;
  ci.eps = eps;
  ci.mu = obj.mu ? *obj.mu : 0.0;
  ci.b = spec.b;
  ci.p = spec.p;
  ci.n = fw == Framework::none ? obj.total_components() : obj.n;
  ci.m = obj.m;
  ci.omega = comp.omega;
  ci.eta = eta;
  ci.alpha = alpha;
  ci.beta = beta;
  ci.Lbar = obj.Lbar;
  ci.delta_fstar = obj.delta_fstar();
  ci.Li = obj.Li;
  if (spec.method == Method::sgd) {
    if (fw == Framework::none) {
      ci.A = p.A1;
      ci.B = p.B1;
      ci.C = p.C1;
    } else {
      for (int i = 0; i < obj.m; ++i) {
        LocalParams lp = local_certificate(spec, obj, i, eta);
        ci.A1i.push_back(lp.A1);
        ci.B1i.push_back(lp.B1);
        ci.C1i.push_back(lp.C1);
      }
    }
    ci.empirical = true;
  }
  try {
    BoundResult kc = corollary_bound(id, ci);
    std::printf("K(%s)=%.6g (%lld)%s\n", id.c_str(), kc.raw, kc.iters,
                kc.empirical ? " [empirical]" : "");
    if (ci.mu > 0) {
      BoundResult kp = corollary_bound(id + "-pl", ci);
      std::printf("K(%s-pl)=%.6g (%lld)\n", id.c_str(), kp.raw, kp.iters);
    }
  } catch (const std::exception& e) {
    std::printf("closed-form bound unavailable: %s\n", e.what());
  }
  return 0;
}

int cmd_verify_estimator(const std::string& problem, const std::string& method,
                         double eta, int points, int samples, uint64_t seed) {
  FiniteSumObjective obj = make_problem(problem);
  MethodSpec spec = parse_method(method);
  if (eta <= 0) {
    double q = spec.method == Method::lsvrg
                   ? spec.p
                   : static_cast<double>(spec.b) / obj.total_components();
    eta = resolve_eta_rho(spec.method, obj.L, obj.Lbar, spec.b, q).eta;
  }
  UnifiedParams p = certificate(spec, obj, eta);
  Rng rng(seed, 0, 0, 11);
  std::vector<Vec> pts;
  for (int i = 0; i < points; ++i) {
    Vec x(obj.d);
    for (int j = 0; j < obj.d; ++j) x[j] = 2.0 * rng.normal();
    pts.push_back(x);
  }
  EstimatorState st = make_state(obj, spec, pts.front());
  SamplingModel model = model_for(st, obj);
  Assumption1Report rep = verify_assumption1(model, obj, p, pts, eta, samples, rng);
  std::printf("points=%d samples=%d pass=%s worst_margin=%.6g\n", points,
              samples, rep.pass ? "yes" : "no", rep.worst_margin);
  return rep.pass ? 0 : 1;
}

int cmd_verify_compressor(const std::string& spec, int d, int samples,
                          uint64_t seed) {
  CompressionOperator op = parse_compressor(spec, d);
  Rng rng(seed, 0, 0, 12);
  std::vector<Vec> vecs;
  for (int i = 0; i < 20; ++i) {
    Vec x(d);
    for (int j = 0; j < d; ++j) x[j] = rng.normal();
    vecs.push_back(x);
  }
  CompressorReport rep = verify_compressor(op, vecs, samples, rng);
  bool pass = !rep.violation && rep.max_bias_z <= 4.0;
  std::printf("omega=%.6g max_bias_z=%.4g max_variance_ratio=%.6g pass=%s\n",
              op.omega, rep.max_bias_z, rep.max_variance_ratio,
              pass ? "yes" : "no");
  return pass ? 0 : 1;
}

int cmd_verify_bound(const std::string& config_path,
                     const std::vector<std::string>& sets) {
  RunConfig cfg = load_config(config_path, sets);
  BoundReport rep = verify_bound(cfg);
  std::printf("K_theory=%.6g k_empirical=%lld pass=%s%s\n", rep.K_theory,
              rep.k_empirical, rep.pass ? "yes" : "no",
              rep.empirical ? " [empirical certificate]" : "");
  return rep.pass ? 0 : 1;
}

int cmd_prop1(double a, double c, double b, double m0, long long k,
              int random_n, uint64_t seed) {
  if (random_n > 0) {
    Rng rng(seed, 0, 0, 13);
    int fails = 0;
    for (int i = 0; i < random_n; ++i) {
      double ra = 0.01 + rng.uniform();
      double rb = rng.uniform() / ra;  // keeps a*b <= 1
      double rc = 10.0 * rng.uniform();
      double rm = 100.0 * rng.uniform();
      long long rk = 10 + static_cast<long long>(rng.uniform_index(991));
      Prop1Result r = check_prop1(ra, rc, rb, rm, rk);
      if (!r.holds) ++fails;
    }
    std::printf("random tuples=%d failures=%d\n", random_n, fails);
    return fails == 0 ? 0 : 1;
  }
  Prop1Result r = check_prop1(a, c, b, m0, k);
  std::printf("M_K=%.6g bound=%.6g holds=%s\n", r.lhs, r.rhs,
              r.holds ? "yes" : "no");
  return r.holds ? 0 : 1;
}

int cmd_sweep(const std::string& config_path,
              const std::vector<std::string>& sets, const std::string& methods,
              const std::string& frameworks, const std::string& compressors,
              const std::string& out_dir, int threads) {
  RunConfig cfg = load_config(config_path, sets);
  std::vector<SweepCell> cells =
      sweep(cfg, split_csv(methods), split_csv(frameworks),
            split_csv(compressors), out_dir, threads);
  std::printf("cells=%zu summary=%s/summary.csv\n", cells.size(),
              out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulator for unified stochastic gradient methods"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  double eta = -1, a = 0.1, c = 1.0, b = 0.5, m0 = 10.0;
  long long k = 100;
  int points = 10, samples = 100000, d = 8, random_n = 0, threads = 1;
  uint64_t seed = 1;
  std::string problem = "lsq:1,10,1,16,10,0", method = "gd", comp = "identity";
  std::string methods = "gd", frameworks = "none", compressors = "identity";
  std::string out_dir = "sweep_out";

  auto add_cfg = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--set", sets, "override, e.g. --set method=lsvrg:1,0.1");
  };

  CLI::App* s_run = app.add_subcommand("run", "run one configuration");
  add_cfg(s_run);
  CLI::App* s_bound = app.add_subcommand("bound", "print stepsize and iteration bounds");
  add_cfg(s_bound);
  CLI::App* s_ve = app.add_subcommand("verify-estimator", "Monte Carlo check of the estimator certificate");
  s_ve->add_option("--problem", problem);
  s_ve->add_option("--method", method);
  s_ve->add_option("--eta", eta, "stepsize (<=0 picks the default cap)");
  s_ve->add_option("--points", points);
  s_ve->add_option("--samples", samples);
  s_ve->add_option("--seed", seed);
  CLI::App* s_vc = app.add_subcommand("verify-compressor", "statistical check of unbiasedness and variance");
  s_vc->add_option("--spec", comp);
  s_vc->add_option("--d", d);
  s_vc->add_option("--samples", samples);
  s_vc->add_option("--seed", seed);
  CLI::App* s_vb = app.add_subcommand("verify-bound", "run and compare against the theoretical iteration count");
  add_cfg(s_vb);
  CLI::App* s_p1 = app.add_subcommand("prop1", "check the decreasing-stepsize recursion bound");
  s_p1->add_option("--a", a);
  s_p1->add_option("--c", c);
  s_p1->add_option("--b", b);
  s_p1->add_option("--m0", m0);
  s_p1->add_option("--k", k);
  s_p1->add_option("--random", random_n, "check N random tuples instead");
  s_p1->add_option("--seed", seed);
  CLI::App* s_sw = app.add_subcommand("sweep", "cartesian grid of runs");
  add_cfg(s_sw);
  s_sw->add_option("--methods", methods, "comma-separated method specs");
  s_sw->add_option("--frameworks", frameworks);
  s_sw->add_option("--compressors", compressors);
  s_sw->add_option("--out", out_dir);
  s_sw->add_option("--threads", threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*s_run) return cmd_run(config_path, sets);
    if (*s_bound) return cmd_bound(config_path, sets);
    if (*s_ve) return cmd_verify_estimator(problem, method, eta, points, samples, seed);
    if (*s_vc) return cmd_verify_compressor(comp, d, samples, seed);
    if (*s_vb) return cmd_verify_bound(config_path, sets);
    if (*s_p1) return cmd_prop1(a, c, b, m0, k, random_n, seed);
    if (*s_sw) return cmd_sweep(config_path, sets, methods, frameworks, compressors, out_dir, threads);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
