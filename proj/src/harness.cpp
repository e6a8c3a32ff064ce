#include "unisim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace unisim {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& kv) {
  size_t eq = kv.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("expected key=value, got: " + kv);
  std::string key = trim(kv.substr(0, eq));
  std::string val = trim(kv.substr(eq + 1));
  if (key == "problem") cfg.problem = val;
  else if (key == "method") cfg.method = val;
  else if (key == "framework") cfg.framework = val;
  else if (key == "compressor") cfg.compressor = val;
  else if (key == "stepsize") {
    if (val == "auto-thm1") cfg.step_mode = StepMode::auto_thm1;
    else if (val == "auto-thm2") cfg.step_mode = StepMode::auto_thm2;
    else if (val == "auto-thm5") cfg.step_mode = StepMode::auto_thm5;
    else if (val.rfind("manual:", 0) == 0) {
      cfg.step_mode = StepMode::manual;
      cfg.manual_eta = std::stod(val.substr(7));
    } else throw std::invalid_argument("unknown stepsize mode: " + val);
  }
  else if (key == "epsilon") cfg.epsilon = std::stod(val);
  else if (key == "max_iters") cfg.max_iters = std::stoll(val);
  else if (key == "seed") cfg.seed = std::stoull(val);
  else if (key == "record_every") cfg.record_every = std::stoll(val);
  else if (key == "x0") cfg.x0 = std::stod(val);
  else if (key == "output") cfg.output = val;
  else throw std::invalid_argument("unknown config key: " + key);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    apply_override(cfg, line);
  }
  return cfg;
}

FiniteSumObjective make_problem(const std::string& spec) {
  if (spec == "sinpl") return make_sin_pl();
  if (spec.rfind("sinpl:", 0) == 0)
    return make_sin_pl_nd(std::stoi(spec.substr(6)));
  if (spec.rfind("lsq:", 0) == 0) {
    unsigned long long seed;
    int d, m, n;
    double cond, het;
    if (std::sscanf(spec.c_str() + 4, "%llu,%d,%d,%d,%lf,%lf", &seed, &d, &m,
                    &n, &cond, &het) != 6)
      throw std::invalid_argument("bad lsq spec: " + spec);
    return make_heterogeneous_lsq(seed, d, m, n, cond, het);
  }
  throw std::invalid_argument("unknown problem spec: " + spec);
}

namespace {

struct DianaKnobs {
  double alpha = 1.0, beta = 2.0;
};

DianaKnobs parse_diana_knobs(const std::string& fw_spec, double omega) {
  DianaKnobs k;
  std::string arg =
      fw_spec.rfind("diana:", 0) == 0 ? fw_spec.substr(6) : "auto";
  if (arg == "auto" || arg.empty()) {
    auto [a, b] = default_diana_knobs(omega);
    k.alpha = a;
    k.beta = b;
  } else {
    k.alpha = std::stod(arg);
    k.beta = 2.0 / k.alpha;
  }
  return k;
}

struct Setup {
  FiniteSumObjective obj;
  MethodSpec spec;
  Framework fw = Framework::none;
  CompressionOperator comp;
  DianaKnobs knobs;
  Vec x0;
  double delta0 = 0;
};

Setup build_setup(const RunConfig& cfg) {
  Setup s;
  s.obj = make_problem(cfg.problem);
  s.spec = parse_method(cfg.method);
  s.fw = parse_framework(cfg.framework);
  s.comp = parse_compressor(cfg.compressor, s.obj.d);
  if (s.fw == Framework::diana)
    s.knobs = parse_diana_knobs(cfg.framework, s.comp.omega);
  s.x0 = Vec::Constant(s.obj.d, cfg.x0);
  s.delta0 = eval_f(s.obj, s.x0) - s.obj.f_star;
  return s;
}

UnifiedParams certificate_at(const Setup& s, double eta) {
  if (s.fw == Framework::none) return certificate(s.spec, s.obj, eta);
  std::vector<LocalParams> locals;
  locals.reserve(s.obj.m);
  for (int i = 0; i < s.obj.m; ++i)
    locals.push_back(local_certificate(s.spec, s.obj, i, eta));
  const double omega = s.comp.omega;
  if (s.fw == Framework::diana)
    return compose_diana(locals, omega, s.obj.m, s.obj.Li,
                         s.obj.delta_fstar(), eta, s.knobs.alpha,
                         s.knobs.beta);
  if (s.spec.method == Method::saga)
    return compose_dc(locals, omega, s.obj.m, s.obj.Li, s.obj.delta_fstar());
  return compose_dc_same(locals, omega, s.obj.m, s.obj.Li,
                         s.obj.delta_fstar());
}

struct AutoStep {
  double eta = 0;
  double K_raw = 0;
  UnifiedParams params;
};

// Iterate eta -> certificate(eta) -> stepsize rule until self-consistent.
// Shrinking eta only improves certificate feasibility, so the loop converges.
AutoStep solve_stepsize(const Setup& s, StepMode mode, double epsilon,
                        double sigma0_sq, double delta0) {
  const double L = s.obj.L;
  double mu = 0;
  if (mode != StepMode::auto_thm1) {
    if (!s.obj.mu) throw std::runtime_error("pl stepsize modes need a pl constant");
    mu = *s.obj.mu;
  }
  double eta = 1.0 / L;
  AutoStep out;
  for (int it = 0; it < 200; ++it) {
    UnifiedParams p;
    try {
      p = certificate_at(s, eta);
    } catch (const std::runtime_error&) {
      eta *= 0.5;
      continue;
    }
    double eta_new = eta;
    double K_raw = 0;
    if (mode == StepMode::auto_thm1) {
      const double d0p = thm1_delta0_prime(p, L, eta, delta0, sigma0_sq);
      K_raw = thm1_iters(p, L, d0p, epsilon).raw;
      eta_new = std::min(eta, thm1_stepsize(p, L, std::max(K_raw, 1.0), epsilon));
    } else if (mode == StepMode::auto_thm2) {
      const double d0p = thm2_delta0_prime(p, L, eta, delta0, sigma0_sq);
      K_raw = thm2_iters(p, L, mu, d0p, epsilon).raw;
      eta_new = std::min(eta, thm2_stepsize_cap(p, L, mu));
    } else {
      const double d0p = thm2_delta0_prime(p, L, eta, delta0, sigma0_sq);
      ConstantPlResult r = thm5_constant_pl(p, L, mu, d0p, epsilon);
      K_raw = r.K.raw;
      eta_new = std::min(eta, r.eta);
    }
    if (std::abs(eta_new - eta) <= 1e-13 * eta) {
      out.eta = eta_new;
      out.K_raw = K_raw;
      out.params = p;
      return out;
    }
    eta = eta_new;
  }
  throw std::runtime_error("stepsize fixed point did not converge");
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  Setup s = build_setup(cfg);
  RunResult res;
  res.pl_metric =
      cfg.step_mode == StepMode::auto_thm2 || cfg.step_mode == StepMode::auto_thm5;

  // state
  EstimatorState st;
  FedSystem sys;
  if (s.fw == Framework::none)
    st = make_state(s.obj, s.spec, s.x0);
  else
    sys = make_fed(s.obj, s.fw, s.spec, s.comp, s.x0, s.knobs.alpha);

  const double sigma0 =
      s.fw == Framework::none ? sigma_sq(st, s.obj, s.x0) : fed_sigma_sq(sys, s.x0);

  long long K_run = cfg.max_iters;
  std::function<double(long long)> sched;
  if (cfg.step_mode == StepMode::manual) {
    res.eta = cfg.manual_eta;
    double e = cfg.manual_eta;
    sched = [e](long long) { return e; };
  } else {
    AutoStep a = solve_stepsize(s, cfg.step_mode, cfg.epsilon, sigma0, s.delta0);
    res.eta = a.eta;
    res.K_theory_raw = a.K_raw;
    res.empirical = a.params.empirical;
    K_run = std::min<long long>(cfg.max_iters,
                                static_cast<long long>(std::ceil(a.K_raw)));
    if (cfg.step_mode == StepMode::auto_thm2) {
      sched = thm2_schedule(a.eta, *s.obj.mu, K_run);
    } else {
      double e = a.eta;
      sched = [e](long long) { return e; };
    }
  }

  Vec x = s.x0;
  long long floats = 0;
  const double guard = 1e6 * std::max(s.delta0, 1e-12);
  res.min_grad_norm = std::numeric_limits<double>::infinity();

  for (long long k = 0; k <= K_run; ++k) {
    const double f_gap = eval_f(s.obj, x) - s.obj.f_star;
    const double gnorm = eval_grad(s.obj, x).norm();
    const double sig =
        s.fw == Framework::none ? sigma_sq(st, s.obj, x) : fed_sigma_sq(sys, x);
    const double eta_k = sched(k);
    res.min_grad_norm = std::min(res.min_grad_norm, gnorm);
    res.final_f_gap = f_gap;

    const double metric = res.pl_metric ? f_gap : gnorm;
    const bool stop = metric <= cfg.epsilon;
    const bool diverge = f_gap > guard;
    if (k % cfg.record_every == 0 || stop || diverge || k == K_run)
      res.records.push_back({k, f_gap, gnorm, sig, eta_k, floats});
    if (stop) {
      res.stop_k = k;
      break;
    }
    if (diverge) {
      res.diverged = true;
      break;
    }
    if (k == K_run) break;

    Vec g;
    if (s.fw == Framework::none) {
      Rng rng(cfg.seed, 0, static_cast<uint64_t>(k), 0);
      g = estimator_step(st, s.obj, x, rng);
      floats += s.obj.d;
    } else {
      RoundTrace tr = fed_round(sys, x, cfg.seed, static_cast<uint64_t>(k));
      g = tr.g;
      floats += tr.floats_sent;
    }
    x -= eta_k * g;
  }
  if (!cfg.output.empty()) export_csv(res.records, cfg.output);
  return res;
}

BoundReport verify_bound(const RunConfig& cfg) {
  if (cfg.step_mode == StepMode::manual)
    throw std::invalid_argument("verify_bound needs an auto stepsize mode");
  RunResult res = run(cfg);
  BoundReport rep;
  rep.K_theory = res.K_theory_raw;
  rep.k_empirical = res.stop_k;
  rep.empirical = res.empirical;
  rep.pass = res.stop_k >= 0 &&
             static_cast<double>(res.stop_k) <= res.K_theory_raw;
  return rep;
}

void export_csv(const std::vector<IterationRecord>& records,
                const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  std::fprintf(f, "k,f_gap,grad_norm,sigma_sq,eta_k,floats_sent\n");
  for (const IterationRecord& r : records)
    std::fprintf(f, "%lld,%.17g,%.17g,%.17g,%.17g,%lld\n", r.k, r.f_gap,
                 r.grad_norm, r.sigma_sq, r.eta_k, r.floats_sent);
  std::fclose(f);
}

namespace {

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ':' || c == ',' || c == '/') c = '_';
  return s;
}

}  // namespace

std::vector<SweepCell> sweep(const RunConfig& base,
                             const std::vector<std::string>& methods,
                             const std::vector<std::string>& frameworks,
                             const std::vector<std::string>& compressors,
                             const std::string& out_dir, int threads) {
  std::filesystem::create_directories(out_dir);
  std::vector<SweepCell> cells;
  for (const std::string& m : methods)
    for (const std::string& f : frameworks)
      for (const std::string& c : compressors) {
        SweepCell cell;
        cell.method = m;
        cell.framework = f;
        cell.compressor = c;
        cell.csv_path = out_dir + "/" + sanitize(m) + "__" + sanitize(f) +
                        "__" + sanitize(c) + ".csv";
        cells.push_back(cell);
      }

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      SweepCell& cell = cells[i];
      RunConfig cfg = base;
      cfg.method = cell.method;
      cfg.framework = cell.framework;
      cfg.compressor = cell.compressor;
      cfg.output = cell.csv_path;
      try {
        RunResult res = run(cfg);
        cell.stop_k = res.stop_k;
        cell.diverged = res.diverged;
        cell.final_f_gap = res.final_f_gap;
        cell.final_grad_norm =
            res.records.empty() ? 0 : res.records.back().grad_norm;
      } catch (const std::exception&) {
        cell.stop_k = -1;
        cell.diverged = true;
        cell.csv_path = "";
      }
    }
  };
  int nt = std::max(1, threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::FILE* f = std::fopen((out_dir + "/summary.csv").c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open for writing: " + out_dir + "/summary.csv");
  std::fprintf(f, "method,framework,compressor,stop_k,diverged,final_f_gap,final_grad_norm,csv\n");
  for (const SweepCell& c : cells)
    std::fprintf(f, "%s,%s,%s,%lld,%d,%.17g,%.17g,%s\n", c.method.c_str(),
                 c.framework.c_str(), c.compressor.c_str(), c.stop_k,
                 c.diverged ? 1 : 0, c.final_f_gap, c.final_grad_norm,
                 c.csv_path.c_str());
  std::fclose(f);
  return cells;
}

}  // namespace unisim
