#include "unisim/federated.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace unisim {

namespace {
// worker id reserved for randomness shared by all workers in a round
constexpr uint64_t kSharedWorker = 0xFFFFFFFFull;
// purpose codes for the counter-based streams
constexpr uint64_t kSampling = 0;
constexpr uint64_t kCompression = 1;
constexpr uint64_t kAnchorFlip = 2;
}  // namespace

Framework parse_framework(const std::string& spec) {
  if (spec == "none" || spec.empty()) return Framework::none;
  if (spec == "dc") return Framework::dc;
  if (spec == "diana" || spec.rfind("diana:", 0) == 0) return Framework::diana;
  throw std::invalid_argument("unknown framework spec: " + spec);
}

FiniteSumObjective worker_view(const FiniteSumObjective& obj, int i) {
  if (i < 0 || i >= obj.m) throw std::out_of_range("worker index");
  FiniteSumObjective v;
  v.d = obj.d;
  v.m = 1;
  v.n = obj.n;
  v.name = obj.name + "/worker" + std::to_string(i);
  auto wv = obj.worker_value;
  auto wg = obj.worker_grad;
  auto cg = obj.component_grad;
  v.value = [wv, i](const Vec& x) { return wv(i, x); };
  v.worker_value = [wv, i](int, const Vec& x) { return wv(i, x); };
  v.full_grad = [wg, i](const Vec& x) { return wg(i, x); };
  v.worker_grad = [wg, i](int, const Vec& x) { return wg(i, x); };
  v.component_grad = [cg, i](int, int j, const Vec& x) { return cg(i, j, x); };
  v.f_star = obj.fi_star[i];
  v.fi_star = {obj.fi_star[i]};
  v.L = obj.Li[i];
  v.Li = {obj.Li[i]};
  v.Lbar = obj.Lbar;
  return v;
}

FedSystem make_fed(const FiniteSumObjective& obj, Framework fw,
                   const MethodSpec& local, const CompressionOperator& comp,
                   const Vec& x0, double alpha) {
  if (comp.d != obj.d) throw std::invalid_argument("compressor dimension mismatch");
  FedSystem sys;
  sys.obj = &obj;
  sys.fw = fw;
  sys.local = local;
  sys.comp = comp;
  sys.alpha = alpha;
  if (fw == Framework::diana) {
    const double cap = 1.0 / (1.0 + comp.omega);
    if (!(alpha > 0.0 && alpha <= cap + 1e-12))
      throw std::invalid_argument("diana requires 0 < alpha <= 1/(1+omega)");
    sys.h.assign(obj.m, Vec::Zero(obj.d));
    sys.h_server = Vec::Zero(obj.d);
  }
  if (local.method == Method::lsvrg) {
    sys.w = x0;
    sys.anchor_worker_grads.resize(obj.m);
    for (int i = 0; i < obj.m; ++i)
      sys.anchor_worker_grads[i] = eval_worker_grad(obj, i, x0);
  } else if (local.method == Method::saga) {
    sys.tables.assign(obj.m, std::vector<Vec>(obj.n, x0));
    sys.table_avgs.resize(obj.m);
    for (int i = 0; i < obj.m; ++i)
      sys.table_avgs[i] = eval_worker_grad(obj, i, x0);
  }
  return sys;
}

namespace {

Vec local_estimate(FedSystem& sys, int i, const Vec& x, Rng& rng) {
  const FiniteSumObjective& obj = *sys.obj;
  const int n = obj.n;
  switch (sys.local.method) {
    case Method::gd:
      return eval_worker_grad(obj, i, x);
    case Method::sgd: {
      Vec g = Vec::Zero(obj.d);
      for (int t = 0; t < sys.local.b; ++t) {
        int j = static_cast<int>(rng.uniform_index(n));
        g += eval_component_grad(obj, i, j, x);
      }
      return g / sys.local.b;
    }
    case Method::lsvrg: {
      Vec g = sys.anchor_worker_grads[i];
      for (int t = 0; t < sys.local.b; ++t) {
        int j = static_cast<int>(rng.uniform_index(n));
        g += (eval_component_grad(obj, i, j, x) -
              eval_component_grad(obj, i, j, sys.w)) /
             sys.local.b;
      }
      return g;
    }
    case Method::saga: {
      Vec g = sys.table_avgs[i];
      std::vector<int> batch(sys.local.b);
      for (int t = 0; t < sys.local.b; ++t) {
        int j = static_cast<int>(rng.uniform_index(n));
        batch[t] = j;
        g += (eval_component_grad(obj, i, j, x) -
              eval_component_grad(obj, i, j, sys.tables[i][j])) /
             sys.local.b;
      }
      std::set<int> distinct(batch.begin(), batch.end());
      for (int j : distinct) {
        sys.table_avgs[i] += (eval_component_grad(obj, i, j, x) -
                              eval_component_grad(obj, i, j, sys.tables[i][j])) /
                             n;
        sys.tables[i][j] = x;
      }
      return g;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

RoundTrace fed_round(FedSystem& sys, const Vec& x, uint64_t seed,
                     uint64_t round) {
  const FiniteSumObjective& obj = *sys.obj;
  const int m = obj.m;
  RoundTrace tr;
  tr.g = Vec::Zero(obj.d);
  tr.payload_norms.resize(m);

  Vec delta_mean = Vec::Zero(obj.d);  // diana: mean compressed difference
  for (int i = 0; i < m; ++i) {
    Rng samp(seed, static_cast<uint64_t>(i), round, kSampling);
    Rng comp_rng(seed, static_cast<uint64_t>(i), round, kCompression);
    Vec gi = local_estimate(sys, i, x, samp);
    Vec payload;
    if (sys.fw == Framework::diana) {
      payload = compress(sys.comp, Vec(gi - sys.h[i]), comp_rng);
      sys.h[i] += sys.alpha * payload;
      delta_mean += payload / m;
    } else if (sys.fw == Framework::dc) {
      payload = compress(sys.comp, gi, comp_rng);
      tr.g += payload / m;
    } else {
      payload = gi;
      tr.g += payload / m;
    }
    tr.payload_norms[i] = payload.norm();
    tr.floats_sent += floats_per_message(sys.comp);
  }
  if (sys.fw == Framework::diana) {
    tr.g = sys.h_server + delta_mean;
    sys.h_server += sys.alpha * delta_mean;
  }

  // lsvrg anchor flip is one shared coin per round
  if (sys.local.method == Method::lsvrg) {
    Rng coin(seed, kSharedWorker, round, kAnchorFlip);
    if (coin.bernoulli(sys.local.p)) {
      sys.w = x;
      for (int i = 0; i < m; ++i)
        sys.anchor_worker_grads[i] = eval_worker_grad(obj, i, x);
    }
  }
  return tr;
}

double fed_sigma_sq(const FedSystem& sys, const Vec& x) {
  const FiniteSumObjective& obj = *sys.obj;
  double sig = 0.0;
  const double d1_local = obj.Lbar * obj.Lbar / sys.local.b;
  if (sys.local.method == Method::lsvrg) {
    sig += d1_local * (x - sys.w).squaredNorm();
  } else if (sys.local.method == Method::saga) {
    double s = 0.0;
    for (int i = 0; i < obj.m; ++i)
      for (const Vec& wj : sys.tables[i]) s += (x - wj).squaredNorm();
    sig += d1_local * s / (obj.m * obj.n);
  }
  if (sys.fw == Framework::diana) {
    const double omega = sys.comp.omega;
    double shift = 0.0;
    for (int i = 0; i < obj.m; ++i)
      shift += (eval_worker_grad(obj, i, x) - sys.h[i]).squaredNorm();
    sig += omega / ((1.0 + omega) * obj.m) * shift;
  }
  return sig;
}

SamplingModel model_for_fed(const FedSystem& sys) {
  SamplingModel m;
  FedSystem base = sys;
  m.draw_g = [base](const Vec& x, Rng& rng) {
    FedSystem tmp = base;
    return fed_round(tmp, x, rng.next_u64(), 0).g;
  };
  m.sigma_now = [base](const Vec& x) { return fed_sigma_sq(base, x); };
  m.sigma_after = [base](const Vec& x, double eta, Rng& rng) {
    FedSystem tmp = base;
    Vec g = fed_round(tmp, x, rng.next_u64(), 0).g;
    Vec xn = x - eta * g;
    return fed_sigma_sq(tmp, xn);
  };
  return m;
}

double default_gamma(double q) {
  return (q < 1.0) ? q / (2.0 * (1.0 - q)) : 1.0;
}

LocalParams local_certificate(const MethodSpec& spec,
                              const FiniteSumObjective& obj, int worker,
                              double eta, double gamma) {
  LocalParams lp;
  switch (spec.method) {
    case Method::gd:
      return lp;  // B1=1, everything else 0, rho=1
    case Method::sgd: {
      FiniteSumObjective view = worker_view(obj, worker);
      UnifiedParams es = certificate(spec, view, eta);
      lp.A1 = es.A1;
      lp.B1 = es.B1;
      lp.C1 = es.C1;
      lp.empirical = true;
      return lp;
    }
    case Method::lsvrg: {
      const double q = spec.p;
      if (gamma <= 0.0) gamma = default_gamma(q);
      lp.A1 = 0;
      lp.B1 = 1;
      lp.C1 = 0;
      lp.D1 = obj.Lbar * obj.Lbar / spec.b;
      lp.rho = q + q * gamma - gamma;
      lp.B2 = (1.0 - q) * eta * eta / gamma;
      lp.D2 = eta * eta;
      if (lp.rho <= 0)
        throw std::runtime_error("local lsvrg certificate infeasible: p+p*gamma-gamma <= 0");
      return lp;
    }
    case Method::saga: {
      const double q = static_cast<double>(spec.b) / obj.n;
      if (gamma <= 0.0) gamma = default_gamma(q);
      lp.A1 = 0;
      lp.B1 = 1;
      lp.C1 = 0;
      lp.D1 = obj.Lbar * obj.Lbar / spec.b;
      lp.rho = q + q * gamma - gamma;
      lp.B2 = (1.0 - q) * eta * eta / gamma;
      lp.D2 = eta * eta;
      if (lp.rho <= 0)
        throw std::runtime_error("local saga certificate infeasible: b/n+(b/n)*gamma-gamma <= 0");
      return lp;
    }
  }
  throw std::logic_error("unreachable");
}

namespace {

struct DAverages {
  double DA = 0, DB = 0, DD = 0, DC = 0, C1mean = 0;
  double min_rho = 1e300;
  bool empirical = false;
};

DAverages average_locals(const std::vector<LocalParams>& locals) {
  DAverages a;
  for (const LocalParams& lp : locals) {
    a.DA += lp.D1 * lp.A2;
    a.DB += lp.D1 * lp.B2;
    a.DD += lp.D1 * lp.D2;
    a.DC += lp.D1 * lp.C2;
    a.C1mean += lp.C1;
    a.min_rho = std::min(a.min_rho, lp.rho);
    a.empirical = a.empirical || lp.empirical;
  }
  const double m = static_cast<double>(locals.size());
  a.DA /= m;
  a.DB /= m;
  a.DD /= m;
  a.DC /= m;
  a.C1mean /= m;
  return a;
}

}  // namespace

UnifiedParams compose_dc(const std::vector<LocalParams>& locals, double omega,
                         int m, const std::vector<double>& Li,
                         double delta_fstar) {
  if (static_cast<int>(locals.size()) != m || static_cast<int>(Li.size()) != m)
    throw std::invalid_argument("compose_dc: m mismatch");
  double A = 0.0;
  for (int i = 0; i < m; ++i)
    A = std::max(A, locals[i].A1 + locals[i].B1 * Li[i] - Li[i] / (1.0 + omega));
  DAverages av = average_locals(locals);
  const double C = av.C1mean + 2.0 * A * delta_fstar;
  const double tau = (1.0 + omega) * av.DD / m;
  UnifiedParams u;
  u.A1 = (1.0 + omega) * A / m;
  u.B1 = 1;
  u.C1 = (1.0 + omega) * C / m;
  u.D1 = (1.0 + omega) / m;
  u.rho = av.min_rho - tau;
  u.A2 = av.DA + tau * A;
  u.B2 = av.DB + av.DD;
  u.C2 = av.DC + tau * C;
  u.sigma_def = UnifiedParams::Sigma::composed_dc;
  u.empirical = av.empirical;
  if (u.rho <= 0)
    throw std::runtime_error("composition infeasible: min_i rho_i - tau <= 0");
  return u;
}

UnifiedParams compose_dc_same(const std::vector<LocalParams>& locals,
                              double omega, int m,
                              const std::vector<double>& Li,
                              double delta_fstar) {
  if (static_cast<int>(locals.size()) != m || static_cast<int>(Li.size()) != m)
    throw std::invalid_argument("compose_dc_same: m mismatch");
  const LocalParams& s = locals.front();
  for (const LocalParams& lp : locals) {
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12 * (1 + std::abs(a)); };
    if (!(near(lp.D1, s.D1) && near(lp.rho, s.rho) && near(lp.A2, s.A2) &&
          near(lp.B2, s.B2) && near(lp.C2, s.C2) && near(lp.D2, s.D2)))
      throw std::invalid_argument(
          "compose_dc_same requires identical variance recursions");
  }
  double A = 0.0;
  bool empirical = false;
  double C1mean = 0.0;
  for (int i = 0; i < m; ++i) {
    A = std::max(A, locals[i].A1 + locals[i].B1 * Li[i] - Li[i] / (1.0 + omega));
    C1mean += locals[i].C1;
    empirical = empirical || locals[i].empirical;
  }
  C1mean /= m;
  const double C = C1mean + 2.0 * A * delta_fstar;
  const double tau = (1.0 + omega) * s.D1 * s.D2 / m;
  UnifiedParams u;
  u.A1 = (1.0 + omega) * A / m;
  u.B1 = 1;
  u.C1 = (1.0 + omega) * C / m;
  u.D1 = (1.0 + omega) / m;
  u.rho = s.rho - tau;
  u.A2 = s.D1 * s.A2 + tau * A;
  u.B2 = s.D1 * s.B2 + s.D1 * s.D2;
  u.C2 = s.D1 * s.C2 + tau * C;
  u.sigma_def = UnifiedParams::Sigma::composed_dc;
  u.empirical = empirical;
  if (u.rho <= 0)
    throw std::runtime_error("composition infeasible: rho' - tau <= 0");
  return u;
}

UnifiedParams compose_diana(const std::vector<LocalParams>& locals,
                            double omega, int m, const std::vector<double>& Li,
                            double delta_fstar, double eta, double alpha,
                            double beta) {
  if (static_cast<int>(locals.size()) != m || static_cast<int>(Li.size()) != m)
    throw std::invalid_argument("compose_diana: m mismatch");
  if (beta <= 0) throw std::invalid_argument("beta must be > 0");
  double A = 0.0, L2 = 0.0;
  for (int i = 0; i < m; ++i) {
    A = std::max(A, locals[i].A1 + (locals[i].B1 - 1.0) * Li[i]);
    L2 += Li[i] * Li[i];
  }
  L2 /= m;
  DAverages av = average_locals(locals);
  const double C = av.C1mean + 2.0 * A * delta_fstar;
  const double B =
      omega * (1.0 + beta) * L2 * eta * eta / (1.0 + omega) + av.DD;
  const double tau = alpha * alpha * omega + (1.0 + omega) * B / m;
  const double local_branch = av.min_rho - tau;
  const double shift_branch =
      2.0 * alpha - (1.0 - alpha) / beta - alpha * alpha - tau;
  UnifiedParams u;
  u.A1 = (1.0 + omega) * A / m;
  u.B1 = 1;
  u.C1 = (1.0 + omega) * C / m;
  u.D1 = (1.0 + omega) / m;
  u.rho = std::min(local_branch, shift_branch);
  u.A2 = av.DA + tau * A;
  u.B2 = av.DB + B;
  u.C2 = av.DC + tau * C;
  u.sigma_def = UnifiedParams::Sigma::composed_diana;
  u.empirical = av.empirical;
  if (u.rho <= 0)
    throw std::runtime_error(
        std::string("composition infeasible: ") +
        (local_branch <= shift_branch ? "local variance branch min_i rho_i - tau <= 0"
                                      : "shift branch 2a-(1-a)/b-a^2-tau <= 0"));
  return u;
}

std::pair<double, double> default_diana_knobs(double omega) {
  if (omega < 0) throw std::invalid_argument("omega must be >= 0");
  const double alpha = 1.0 / (1.0 + omega);
  const double beta = 2.0 / alpha;
  const double shift_branch =
      2.0 * alpha - (1.0 - alpha) / beta - alpha * alpha;
  if (shift_branch <= 0)
    throw std::logic_error("default diana knobs produced a nonpositive shift branch");
  return {alpha, beta};
}

}  // namespace unisim
