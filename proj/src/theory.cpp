#include "unisim/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace unisim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

long long ceil_ll(double x) {
  if (!(x < 9.0e18)) throw std::overflow_error("iteration bound overflows");
  return static_cast<long long>(std::ceil(x));
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

double thm1_stepsize(const UnifiedParams& p, double L, double K,
                     double epsilon) {
  require(p.rho > 0, "rho must be > 0");
  const double a = L * p.A1 + L * p.D1 * p.A2 / p.rho;
  const double b = L * p.B1 + L * p.D1 * p.B2 / p.rho;
  const double c = L * (p.C1 + p.D1 * p.C2 / p.rho);
  require(b > 0, "B branch denominator must be positive");
  double eta = 1.0 / b;
  if (a > 0) eta = std::min(eta, std::sqrt(std::log(2.0) / (a * K)));
  if (c > 0) eta = std::min(eta, epsilon * epsilon / (2.0 * c));
  return eta;
}

double thm1_delta0_prime(const UnifiedParams& p, double L, double eta,
                         double delta0, double sigma0_sq) {
  if (p.D1 == 0 || sigma0_sq == 0) return delta0;
  require(p.rho > 0, "rho must be > 0");
  return delta0 + 0.5 * L * eta * eta * p.D1 / p.rho * sigma0_sq;
}

BoundResult thm1_iters(const UnifiedParams& p, double L, double delta0_prime,
                       double epsilon) {
  require(p.rho > 0, "rho must be > 0");
  const double e2 = epsilon * epsilon;
  const double Bb = p.B1 + p.D1 * p.B2 / p.rho;
  const double Ab = 12.0 * delta0_prime * (p.A1 + p.D1 * p.A2 / p.rho) / e2;
  const double Cb = 2.0 * (p.C1 + p.D1 * p.C2 / p.rho) / e2;
  BoundResult r;
  r.raw = 8.0 * delta0_prime * L / e2 * std::max({Bb, Ab, Cb});
  r.iters = ceil_ll(r.raw);
  r.empirical = p.empirical;
  return r;
}

double thm2_stepsize_cap(const UnifiedParams& p, double L, double mu) {
  require(p.rho > 0 && mu > 0, "rho and mu must be > 0");
  const double denom = L * p.B1 + 2.0 * L * p.D1 * p.B2 / p.rho +
                       (L * p.A1 + 2.0 * L * p.D1 * p.A2 / p.rho) / mu;
  require(denom > 0, "stepsize cap denominator must be positive");
  return 1.0 / denom;
}

double thm2_delta0_prime(const UnifiedParams& p, double L, double eta,
                         double delta0, double sigma0_sq) {
  if (p.D1 == 0 || sigma0_sq == 0) return delta0;
  require(p.rho > 0, "rho must be > 0");
  return delta0 + L * eta * eta * p.D1 / p.rho * sigma0_sq;
}

std::function<double(long long)> thm2_schedule(double eta, double mu,
                                               long long K) {
  const double half = 0.5 * static_cast<double>(K);
  return [eta, mu, half](long long k) {
    const double kk = static_cast<double>(k);
    if (kk <= half) return eta;
    return 2.0 * eta / (2.0 + (kk - half) * mu * eta);
  };
}

BoundResult thm2_iters(const UnifiedParams& p, double L, double mu,
                       double delta0_prime, double epsilon) {
  require(p.rho > 0 && mu > 0, "rho and mu must be > 0");
  const double kappa = L / mu;
  const double log_branch =
      2.0 *
      (p.B1 + 2.0 * p.D1 * p.B2 / p.rho +
       (L * p.A1 + 2.0 * L * p.D1 * p.A2 / p.rho) / mu) *
      kappa * std::log(2.0 * delta0_prime / epsilon);
  const double c_branch =
      10.0 * (p.C1 + 2.0 * p.D1 * p.C2 / p.rho) * kappa / (mu * epsilon);
  BoundResult r;
  r.raw = std::max(log_branch, c_branch);
  r.iters = ceil_ll(r.raw);
  r.empirical = p.empirical;
  return r;
}

ConstantPlResult thm5_constant_pl(const UnifiedParams& p, double L, double mu,
                                  double delta0_prime, double epsilon) {
  require(p.rho > 0 && mu > 0, "rho and mu must be > 0");
  const double kappa = L / mu;
  const double b_branch = p.B1 + 2.0 * p.D1 * p.B2 / p.rho +
                          (L * p.A1 + 2.0 * L * p.D1 * p.A2 / p.rho) / mu;
  const double c_sum = p.C1 + 2.0 * p.D1 * p.C2 / p.rho;
  ConstantPlResult r;
  r.eta = 1.0 / (L * b_branch);
  if (c_sum > 0) r.eta = std::min(r.eta, mu * epsilon / (L * c_sum));
  r.K.raw = std::max(b_branch, c_sum / (mu * epsilon)) * kappa *
            std::log(2.0 * delta0_prime / epsilon);
  r.K.iters = ceil_ll(std::max(r.K.raw, 0.0));
  r.K.empirical = p.empirical;
  return r;
}

Prop1Result check_prop1(double a, double c, double b, double M0, long long K) {
  require(a >= 0 && c >= 0 && b > 0 && M0 >= 0 && K >= 1, "invalid inputs");
  require(a * b <= 1.0, "need a*b <= 1");
  const double half = 0.5 * static_cast<double>(K);
  double M = M0;
  for (long long k = 1; k <= K; ++k) {
    const double kk = static_cast<double>(k);
    const double bk =
        (kk <= half) ? b : 2.0 * b / (2.0 + (kk - half) * a * b);
    M = (1.0 - a * bk) * M + c * bk * bk;
  }
  Prop1Result r;
  r.lhs = M;
  r.rhs = std::pow(1.0 - a * b, half) * M0 +
          (a > 0 ? 10.0 * c / (a * a * static_cast<double>(K)) : kInf);
  if (a == 0) r.rhs = kInf;  // bound is vacuous without contraction
  r.holds = r.lhs <= r.rhs * (1.0 + 1e-12) + 1e-300;
  return r;
}

namespace {

double vec_max_A_dc(const CorollaryInputs& in) {
  if (in.Li.empty()) return in.A;
  double A = -kInf;
  for (size_t i = 0; i < in.Li.size(); ++i) {
    const double A1 = i < in.A1i.size() ? in.A1i[i] : 0.0;
    const double B1 = i < in.B1i.size() ? in.B1i[i] : 1.0;
    A = std::max(A, A1 + B1 * in.Li[i] - in.Li[i] / (1.0 + in.omega));
  }
  return std::max(A, 0.0);
}

double vec_max_A_diana(const CorollaryInputs& in) {
  if (in.Li.empty()) return in.A;
  double A = -kInf;
  for (size_t i = 0; i < in.Li.size(); ++i) {
    const double A1 = i < in.A1i.size() ? in.A1i[i] : 0.0;
    const double B1 = i < in.B1i.size() ? in.B1i[i] : 1.0;
    A = std::max(A, A1 + (B1 - 1.0) * in.Li[i]);
  }
  return std::max(A, 0.0);
}

double vec_C(const CorollaryInputs& in, double A) {
  if (in.Li.empty()) return in.C;
  double c1 = 0.0;
  for (size_t i = 0; i < in.Li.size(); ++i)
    c1 += i < in.C1i.size() ? in.C1i[i] : 0.0;
  c1 /= static_cast<double>(in.Li.size());
  return c1 + 2.0 * A * in.delta_fstar;
}

double mean_Li_sq(const CorollaryInputs& in) {
  if (in.Li.empty()) return in.L * in.L;
  double s = 0.0;
  for (double v : in.Li) s += v * v;
  return s / static_cast<double>(in.Li.size());
}

double gamma_or_default(const CorollaryInputs& in, double q) {
  if (in.gamma > 0) return in.gamma;
  return q < 1.0 ? q / (2.0 * (1.0 - q)) : 1.0;
}

struct DcVr {
  double B, tau, rho;
};
// shared pieces of the compressed variance-reduced bounds; q is the anchor
// refresh rate (p for the loopless anchor, b/n for tables)
DcVr dc_vr_terms(const CorollaryInputs& in, double q) {
  DcVr t;
  const double gamma = gamma_or_default(in, q);
  const double eta2 = in.eta * in.eta;
  t.B = in.Lbar * in.Lbar * ((1.0 - q) * eta2 / gamma + eta2);
  t.tau = (1.0 + in.omega) * in.Lbar * in.Lbar * eta2 / (in.m * in.b);
  t.rho = q + q * gamma - gamma - t.tau;
  require(t.rho > 0, "contraction rate must be positive at this stepsize");
  return t;
}

struct DianaShared {
  double B, tau, rho;
};
DianaShared diana_terms(const CorollaryInputs& in, double local_rho,
                        double dd_extra) {
  require(in.alpha > 0 && in.beta > 0, "alpha and beta must be set");
  DianaShared t;
  t.B = in.omega * (1.0 + in.beta) * mean_Li_sq(in) * in.eta * in.eta /
            (1.0 + in.omega) +
        dd_extra;
  t.tau = in.alpha * in.alpha * in.omega + (1.0 + in.omega) * t.B / in.m;
  const double shift = 2.0 * in.alpha - (1.0 - in.alpha) / in.beta -
                       in.alpha * in.alpha - t.tau;
  t.rho = std::min(local_rho - t.tau, shift);
  require(t.rho > 0, "contraction rate must be positive at this stepsize");
  return t;
}

}  // namespace

BoundResult corollary_bound(const std::string& id, const CorollaryInputs& in) {
  require(in.L > 0 && in.eps > 0, "need L > 0 and eps > 0");
  const double e2 = in.eps * in.eps;
  const double base = 8.0 * in.delta0 * in.L / e2;
  const bool pl = id.size() > 3 && id.substr(id.size() - 3) == "-pl";
  if (pl) require(in.mu > 0, "pl bounds need mu > 0");
  const double kappa = pl ? in.L / in.mu : 0.0;
  const double logterm = pl ? std::log(2.0 * in.delta0 / in.eps) : 0.0;

  BoundResult r;
  r.empirical = in.empirical;
  auto done = [&](double raw) {
    r.raw = raw;
    r.iters = ceil_ll(std::max(raw, 0.0));
    return r;
  };

  if (id == "gd") return done(base);
  if (id == "sgd")
    return done(base * std::max({in.B, 12.0 * in.delta0 * in.A / e2,
                                 2.0 * in.C / e2}));
  if (id == "lsvrg")
    return done(base * (1.0 + 2.0 / (std::cbrt(static_cast<double>(in.b)) *
                                     std::pow(in.p, 2.0 / 3.0))));
  if (id == "saga")
    return done(base *
                (1.0 + 2.0 * std::pow(static_cast<double>(in.n), 2.0 / 3.0) /
                           in.b));
  if (id == "dc-gd" || id == "dc-sgd") {
    const double A = vec_max_A_dc(in);
    const double C = vec_C(in, A);
    const double w1 = 1.0 + in.omega;
    return done(base * std::max({1.0, 12.0 * w1 * in.delta0 * A / (e2 * in.m),
                                 2.0 * w1 * C / (e2 * in.m)}));
  }
  if (id == "dc-lsvrg" || id == "dc-saga") {
    const double q =
        id == "dc-lsvrg" ? in.p : static_cast<double>(in.b) / in.n;
    DcVr t = dc_vr_terms(in, q);
    const double A = vec_max_A_dc(in);
    const double C = vec_C(in, A);
    const double w1 = 1.0 + in.omega;
    const double amp = 1.0 + t.tau / t.rho;
    return done(base *
                std::max({1.0 + w1 * t.B / (in.m * in.b * t.rho),
                          12.0 * w1 * amp * in.delta0 * A / (in.m * e2),
                          2.0 * w1 * amp * in.L * C / (in.m * e2)}));
  }
  if (id == "diana-gd") {
    DianaShared t = diana_terms(in, 1.0, 0.0);
    return done(base * (1.0 + (1.0 + in.omega) * t.B / (in.m * t.rho)));
  }
  if (id == "diana-sgd") {
    DianaShared t = diana_terms(in, 1.0, 0.0);
    const double A = vec_max_A_diana(in);
    const double C = vec_C(in, A);
    const double w1 = 1.0 + in.omega;
    const double amp = 1.0 + t.tau / t.rho;
    return done(base *
                std::max({1.0 + w1 * t.B / (in.m * t.rho),
                          12.0 * w1 * amp * in.delta0 * A / (in.m * e2),
                          2.0 * w1 * amp * in.L * C / (in.m * e2)}));
  }
  if (id == "diana-lsvrg" || id == "diana-saga") {
    const double q =
        id == "diana-lsvrg" ? in.p : static_cast<double>(in.b) / in.n;
    const double gamma = gamma_or_default(in, q);
    const double eta2 = in.eta * in.eta;
    const double dd = in.Lbar * in.Lbar * eta2 / in.b;
    DianaShared t = diana_terms(in, q + q * gamma - gamma, dd);
    const double Bp =
        (1.0 - q) * in.Lbar * in.Lbar * eta2 / gamma + t.B * in.b;
    return done(base *
                (1.0 + (1.0 + in.omega) * Bp / (in.m * in.b * t.rho)));
  }

  if (id == "gd-pl") return done(kappa * logterm);
  if (id == "sgd-pl")
    return done(std::max(
        2.0 * in.L * (in.B + in.A / in.mu) / in.mu * logterm,
        10.0 * in.L * in.C / (in.mu * in.mu * in.eps)));
  if (id == "lsvrg-pl")
    return done((1.0 + 3.0 / (std::cbrt(static_cast<double>(in.b)) *
                              std::pow(in.p, 2.0 / 3.0))) *
                kappa * logterm);
  if (id == "saga-pl")
    return done((1.0 + 3.0 * std::pow(static_cast<double>(in.n), 2.0 / 3.0) /
                           in.b) *
                kappa * logterm);
  if (id == "dc-gd-pl" || id == "dc-sgd-pl") {
    const double A = vec_max_A_dc(in);
    const double C = vec_C(in, A);
    const double w1 = 1.0 + in.omega;
    return done(std::max(
        2.0 * in.L * (1.0 + w1 * A / (in.m * in.mu)) / in.mu * logterm,
        10.0 * w1 * in.L * C / (in.m * in.mu * in.mu * in.eps)));
  }
  if (id == "dc-lsvrg-pl" || id == "dc-saga-pl") {
    const double q =
        id == "dc-lsvrg-pl" ? in.p : static_cast<double>(in.b) / in.n;
    DcVr t = dc_vr_terms(in, q);
    const double A = vec_max_A_dc(in);
    const double C = vec_C(in, A);
    const double w1 = 1.0 + in.omega;
    const double amp = 1.0 + 2.0 * t.tau / t.rho;
    return done(std::max(
        (1.0 + w1 / in.m * (amp * A / in.mu + 2.0 * t.B / (in.b * t.rho))) *
            2.0 * in.L / in.mu * logterm,
        10.0 * w1 * amp * in.L * C / (in.m * in.mu * in.mu * in.eps)));
  }
  if (id == "diana-gd-pl") {
    DianaShared t = diana_terms(in, 1.0, 0.0);
    return done((1.0 + 2.0 * (1.0 + in.omega) * t.B / (in.m * t.rho)) *
                kappa * logterm);
  }
  if (id == "diana-sgd-pl") {
    DianaShared t = diana_terms(in, 1.0, 0.0);
    const double A = vec_max_A_diana(in);
    const double C = vec_C(in, A);
    const double w1 = 1.0 + in.omega;
    const double amp = 1.0 + 2.0 * t.tau / t.rho;
    return done(std::max(
        (1.0 + w1 / in.m * (amp * A / in.mu + 2.0 * t.B / t.rho)) * 2.0 *
            in.L / in.mu * logterm,
        10.0 * w1 * amp * in.L * C / (in.m * in.mu * in.mu * in.eps)));
  }
  if (id == "diana-lsvrg-pl" || id == "diana-saga-pl") {
    const double q =
        id == "diana-lsvrg-pl" ? in.p : static_cast<double>(in.b) / in.n;
    const double gamma = gamma_or_default(in, q);
    const double eta2 = in.eta * in.eta;
    const double dd = in.Lbar * in.Lbar * eta2 / in.b;
    DianaShared t = diana_terms(in, q + q * gamma - gamma, dd);
    const double Bp =
        (1.0 - q) * in.Lbar * in.Lbar * eta2 / gamma + t.B / in.b;
    return done((1.0 + 2.0 * (1.0 + in.omega) * Bp / (in.m * in.b * t.rho)) *
                kappa * logterm);
  }

  throw std::invalid_argument("unknown bound id: " + id);
}

double corollary_stepsize_cap(const std::string& id,
                              const CorollaryInputs& in) {
  require(in.L > 0, "need L > 0");
  if (id == "gd" || id == "gd-pl") return 1.0 / in.L;
  if (id == "lsvrg")
    return 1.0 / (in.L * (1.0 + 2.0 / (std::cbrt(static_cast<double>(in.b)) *
                                       std::pow(in.p, 2.0 / 3.0))));
  if (id == "saga")
    return 1.0 /
           (in.L * (1.0 + 2.0 * std::pow(static_cast<double>(in.n), 2.0 / 3.0) /
                              in.b));
  if (id == "lsvrg-pl")
    return 1.0 / (in.L * (1.0 + 3.0 / (std::cbrt(static_cast<double>(in.b)) *
                                       std::pow(in.p, 2.0 / 3.0))));
  if (id == "saga-pl")
    return 1.0 /
           (in.L * (1.0 + 3.0 * std::pow(static_cast<double>(in.n), 2.0 / 3.0) /
                              in.b));
  return kInf;
}

EtaRho resolve_eta_rho(Method method, double L, double Lbar, int b, double q,
                       double eta) {
  EtaRho r;
  if (method == Method::gd || method == Method::sgd) {
    r.eta = eta >= 0 ? eta : 1.0 / L;
    r.rho = 1.0;
    return r;
  }
  require(q > 0 && q <= 1 && b >= 1, "need 0 < q <= 1 and b >= 1");
  // the contraction gate eta^2 Lbar^2 / b <= q/4 always binds alongside the
  // closed-form cap (they coincide when Lbar = L up to constants)
  // shave the equality case so rounding cannot push the slack over the gate
  const double gate = std::sqrt(q * b) / (2.0 * Lbar) * (1.0 - 1e-12);
  if (eta < 0)
    eta = std::min(gate,
                   1.0 / (L * (1.0 + 2.0 / (std::cbrt(static_cast<double>(b)) *
                                            std::pow(q, 2.0 / 3.0)))));
  const double slack = eta * eta * Lbar * Lbar / b;
  if (slack > q / 4.0 + 1e-15)
    throw std::runtime_error(
        "stepsize too large: eta^2 Lbar^2 / b exceeds q/4");
  r.eta = eta;
  r.rho = q / 2.0 + q * q / 2.0 - slack;
  return r;
}

}  // namespace unisim
