#include "unisim/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace unisim {

MethodSpec parse_method(const std::string& spec) {
  MethodSpec ms;
  if (spec == "gd") {
    ms.method = Method::gd;
    return ms;
  }
  if (spec.rfind("sgd:", 0) == 0) {
    ms.method = Method::sgd;
    ms.b = std::stoi(spec.substr(4));
    return ms;
  }
  if (spec.rfind("lsvrg:", 0) == 0) {
    ms.method = Method::lsvrg;
    auto rest = spec.substr(6);
    auto comma = rest.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("lsvrg spec needs \"lsvrg:<b>,<p>\"");
    ms.b = std::stoi(rest.substr(0, comma));
    ms.p = std::stod(rest.substr(comma + 1));
    return ms;
  }
  if (spec.rfind("saga:", 0) == 0) {
    ms.method = Method::saga;
    ms.b = std::stoi(spec.substr(5));
    return ms;
  }
  throw std::invalid_argument("unknown method spec: " + spec);
}

std::string method_name(const MethodSpec& spec) {
  switch (spec.method) {
    case Method::gd:
      return "gd";
    case Method::sgd:
      return "sgd:" + std::to_string(spec.b);
    case Method::lsvrg: {
      char buf[64];
      snprintf(buf, sizeof(buf), "lsvrg:%d,%g", spec.b, spec.p);
      return buf;
    }
    case Method::saga:
      return "saga:" + std::to_string(spec.b);
  }
  return "?";
}

EstimatorState make_state(const FiniteSumObjective& obj, const MethodSpec& spec,
                          const Vec& x0) {
  EstimatorState st;
  st.spec = spec;
  if (spec.method == Method::lsvrg) {
    st.w = x0;
    st.anchor_grad = eval_grad(obj, x0);
  } else if (spec.method == Method::saga) {
    st.table.assign(obj.total_components(), x0);
    st.table_grad_avg = eval_grad(obj, x0);
  }
  return st;
}

Vec gd_step(const FiniteSumObjective& obj, const Vec& x) {
  return eval_grad(obj, x);
}

Vec sgd_step(const FiniteSumObjective& obj, const Vec& x, int b, Rng& rng) {
  const int N = obj.total_components();
  if (b < 1 || b > N) throw std::invalid_argument("minibatch size out of range");
  Vec g = Vec::Zero(obj.d);
  for (int t = 0; t < b; ++t) {
    int c = static_cast<int>(rng.uniform_index(N));
    g += eval_component_grad_flat(obj, c, x);
  }
  return g / b;
}

Vec lsvrg_step(EstimatorState& st, const FiniteSumObjective& obj, const Vec& x,
               Rng& rng) {
  const int N = obj.total_components();
  Vec g = st.anchor_grad;
  for (int t = 0; t < st.spec.b; ++t) {
    int c = static_cast<int>(rng.uniform_index(N));
    g += (eval_component_grad_flat(obj, c, x) -
          eval_component_grad_flat(obj, c, st.w)) /
         st.spec.b;
  }
  // anchor flips to the pre-update iterate x^k
  if (rng.bernoulli(st.spec.p)) {
    st.w = x;
    st.anchor_grad = eval_grad(obj, x);
  }
  return g;
}

Vec saga_step(EstimatorState& st, const FiniteSumObjective& obj, const Vec& x,
              Rng& rng) {
  const int N = obj.total_components();
  std::vector<int> batch(st.spec.b);
  Vec g = st.table_grad_avg;
  for (int t = 0; t < st.spec.b; ++t) {
    int c = static_cast<int>(rng.uniform_index(N));
    batch[t] = c;
    g += (eval_component_grad_flat(obj, c, x) -
          eval_component_grad_flat(obj, c, st.table[c])) /
         st.spec.b;
  }
  // table entries for the sampled components move to x (distinct ones once)
  std::set<int> distinct(batch.begin(), batch.end());
  for (int c : distinct) {
    st.table_grad_avg += (eval_component_grad_flat(obj, c, x) -
                          eval_component_grad_flat(obj, c, st.table[c])) /
                         N;
    st.table[c] = x;
  }
  return g;
}

Vec estimator_step(EstimatorState& st, const FiniteSumObjective& obj,
                   const Vec& x, Rng& rng) {
  switch (st.spec.method) {
    case Method::gd:
      return gd_step(obj, x);
    case Method::sgd:
      return sgd_step(obj, x, st.spec.b, rng);
    case Method::lsvrg:
      return lsvrg_step(st, obj, x, rng);
    case Method::saga:
      return saga_step(st, obj, x, rng);
  }
  throw std::logic_error("unreachable");
}

double sigma_sq(const EstimatorState& st, const FiniteSumObjective& obj,
                const Vec& x) {
  switch (st.spec.method) {
    case Method::gd:
    case Method::sgd:
      return 0.0;
    case Method::lsvrg:
      return (x - st.w).squaredNorm();
    case Method::saga: {
      double s = 0.0;
      for (const Vec& wj : st.table) s += (x - wj).squaredNorm();
      return s / obj.total_components();
    }
  }
  return 0.0;
}

double sgd_second_moment(const FiniteSumObjective& obj, const Vec& x, int b) {
  const int N = obj.total_components();
  Vec full = eval_grad(obj, x);
  double mean_sq = 0.0;
  for (int c = 0; c < N; ++c)
    mean_sq += eval_component_grad_flat(obj, c, x).squaredNorm();
  mean_sq /= N;
  double variance = mean_sq - full.squaredNorm();
  return full.squaredNorm() + variance / b;
}

Vec nnls_small(const Mat& X, const Vec& y) {
  const int p = static_cast<int>(X.cols());
  if (p > 20) throw std::invalid_argument("nnls_small: too many columns");
  Vec best = Vec::Zero(p);
  double best_res = y.squaredNorm();
  for (unsigned mask = 1; mask < (1u << p); ++mask) {
    std::vector<int> cols;
    for (int j = 0; j < p; ++j)
      if (mask & (1u << j)) cols.push_back(j);
    Mat Xs(X.rows(), cols.size());
    for (size_t j = 0; j < cols.size(); ++j) Xs.col(j) = X.col(cols[j]);
    Vec theta = Xs.colPivHouseholderQr().solve(y);
    if ((theta.array() < 0).any()) continue;
    double res = (Xs * theta - y).squaredNorm();
    if (res < best_res - 1e-15) {
      best_res = res;
      best.setZero();
      for (size_t j = 0; j < cols.size(); ++j) best[cols[j]] = theta[j];
    }
  }
  return best;
}

namespace {

UnifiedParams sgd_es_certificate(const FiniteSumObjective& obj, int b) {
  // Fit E||g||^2 <= 2A (f - f*) + B ||grad f||^2 + C over sampled points,
  // then inflate by 10%. The exact second moment for uniform
  // with-replacement minibatches is computable, so no Monte Carlo here.
  const int points = 200;
  Rng rng(0xE5F1u, 0, 0, 7);
  Mat X(points, 3);
  Vec y(points);
  for (int t = 0; t < points; ++t) {
    Vec x(obj.d);
    double scale = 0.5 + 3.0 * rng.uniform();
    for (int c = 0; c < obj.d; ++c) x[c] = scale * rng.normal();
    double gap = eval_f(obj, x) - obj.f_star;
    double gn2 = eval_grad(obj, x).squaredNorm();
    X(t, 0) = 2.0 * gap;
    X(t, 1) = gn2;
    X(t, 2) = 1.0;
    y[t] = sgd_second_moment(obj, x, b);
  }
  Vec theta = nnls_small(X, y);
  // the least-squares fit balances residuals both ways; scale it up so the
  // bound dominates every sampled point before the safety inflation
  double scale = 1.0;
  for (int t = 0; t < points; ++t) {
    double pred = X.row(t).dot(theta);
    if (pred > 0) scale = std::max(scale, y[t] / pred);
  }
  theta *= scale;
  UnifiedParams u;
  u.A1 = 1.1 * theta[0];
  // the exact-gradient part of the estimator alone contributes ||grad f||^2
  u.B1 = std::max(1.1 * theta[1], 1.0);
  u.C1 = 1.1 * theta[2];
  u.D1 = 0;
  u.rho = 1;
  u.sigma_def = UnifiedParams::Sigma::zero;
  u.empirical = true;
  return u;
}

}  // namespace

UnifiedParams certificate(const MethodSpec& spec, const FiniteSumObjective& obj,
                          double eta) {
  UnifiedParams u;
  const int N = obj.total_components();
  const double Lb = obj.Lbar;
  switch (spec.method) {
    case Method::gd:
      u.B1 = 1;
      u.rho = 1;
      u.sigma_def = UnifiedParams::Sigma::zero;
      return u;
    case Method::sgd:
      return sgd_es_certificate(obj, spec.b);
    case Method::lsvrg: {
      const double gate = eta * eta * Lb * Lb / spec.b;
      if (gate > spec.p / 4.0 + 1e-15)
        throw std::runtime_error(
            "certificate unavailable: eta^2 Lbar^2 / b <= p/4 violated");
      u.B1 = 1;
      u.D1 = Lb * Lb / spec.b;
      u.rho = spec.p / 2.0 + spec.p * spec.p / 2.0 - gate;
      u.B2 = 2.0 * eta * eta / spec.p - eta * eta;
      u.sigma_def = UnifiedParams::Sigma::anchor_dist;
      return u;
    }
    case Method::saga: {
      const double gate = eta * eta * Lb * Lb / spec.b;
      const double bn = static_cast<double>(spec.b) / N;
      if (gate > bn / 4.0 + 1e-15)
        throw std::runtime_error(
            "certificate unavailable: eta^2 Lbar^2 / b <= b/(4n) violated");
      u.B1 = 1;
      u.D1 = Lb * Lb / spec.b;
      u.rho = bn / 2.0 + bn * bn / 2.0 - gate;
      u.B2 = 2.0 * eta * eta * N / spec.b - eta * eta;
      u.sigma_def = UnifiedParams::Sigma::saga_table_dist;
      return u;
    }
  }
  throw std::logic_error("unreachable");
}

SamplingModel model_for(const EstimatorState& st,
                        const FiniteSumObjective& obj) {
  SamplingModel m;
  const FiniteSumObjective* o = &obj;
  EstimatorState base = st;
  m.draw_g = [base, o](const Vec& x, Rng& rng) {
    EstimatorState tmp = base;
    return estimator_step(tmp, *o, x, rng);
  };
  m.sigma_now = [base, o](const Vec& x) { return sigma_sq(base, *o, x); };
  m.sigma_after = [base, o](const Vec& x, double eta, Rng& rng) {
    EstimatorState tmp = base;
    Vec g = estimator_step(tmp, *o, x, rng);
    Vec xn = x - eta * g;
    return sigma_sq(tmp, *o, xn);
  };
  return m;
}

Assumption1Report verify_assumption1(const SamplingModel& model,
                                     const FiniteSumObjective& obj,
                                     const UnifiedParams& params,
                                     const std::vector<Vec>& points, double eta,
                                     int samples, Rng& rng) {
  Assumption1Report rep;
  const double slack = 5.0 / std::sqrt(static_cast<double>(samples));
  const bool variance_recursion = params.D1 > 0 || params.rho < 1.0;
  for (const Vec& x : points) {
    Assumption1Entry e;
    const double gap = eval_f(obj, x) - obj.f_star;
    const double gn2 = eval_grad(obj, x).squaredNorm();
    const double sig = model.sigma_now(x);
    double sum_g2 = 0.0, sum_sig = 0.0;
    for (int s = 0; s < samples; ++s) {
      sum_g2 += model.draw_g(x, rng).squaredNorm();
      if (variance_recursion) sum_sig += model.sigma_after(x, eta, rng);
    }
    e.lhs1 = sum_g2 / samples;
    e.rhs1 = 2.0 * params.A1 * gap + params.B1 * gn2 + params.D1 * sig +
             params.C1;
    double m1 = (e.rhs1 - e.lhs1) / std::max(e.rhs1, 1e-15);
    e.pass = e.lhs1 <= e.rhs1 * (1.0 + slack) + 1e-12;
    rep.worst_margin = std::min(rep.worst_margin, m1);
    if (variance_recursion) {
      e.checked2 = true;
      e.lhs2 = sum_sig / samples;
      e.rhs2 = (1.0 - params.rho) * sig + 2.0 * params.A2 * gap +
               params.B2 * gn2 + params.C2;
      double m2 = (e.rhs2 - e.lhs2) / std::max(e.rhs2, 1e-15);
      e.pass = e.pass && (e.lhs2 <= e.rhs2 * (1.0 + slack) + 1e-12);
      rep.worst_margin = std::min(rep.worst_margin, m2);
    }
    rep.pass = rep.pass && e.pass;
    rep.entries.push_back(e);
  }
  return rep;
}

}  // namespace unisim
