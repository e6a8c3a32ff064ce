#include <cmath>

#include "doctest.h"
#include "unisim/theory.hpp"

using namespace unisim;

namespace {

UnifiedParams gd_params() {
  UnifiedParams p;
  p.B1 = 1;
  p.rho = 1;
  return p;
}

UnifiedParams vr_params() {
  UnifiedParams p;
  p.B1 = 1;
  p.D1 = 4.0;
  p.rho = 0.125;
  p.B2 = 0.01;
  return p;
}

UnifiedParams noisy_params() {
  UnifiedParams p;
  p.A1 = 0.5;
  p.B1 = 2.0;
  p.C1 = 0.3;
  p.rho = 1;
  return p;
}

}  // namespace

TEST_CASE("stepsize rule reduces to 1/L for the exact gradient") {
  CHECK(thm1_stepsize(gd_params(), 4.0, 100.0, 1e-2) ==
        doctest::Approx(0.25));
}

TEST_CASE("the additive-noise branch dominates for tiny targets") {
  UnifiedParams p = noisy_params();
  double L = 2.0, eps = 1e-6;
  double eta = thm1_stepsize(p, L, 10.0, eps);
  CHECK(eta == doctest::Approx(eps * eps / (2.0 * L * p.C1)));
}

TEST_CASE("the chosen stepsize satisfies all three caps simultaneously") {
  for (const UnifiedParams& p : {gd_params(), vr_params(), noisy_params()}) {
    double L = 3.0, K = 500.0, eps = 5e-2;
    double eta = thm1_stepsize(p, L, K, eps);
    double a = L * p.A1 + L * p.D1 * p.A2 / p.rho;
    double b = L * p.B1 + L * p.D1 * p.B2 / p.rho;
    double c = L * (p.C1 + p.D1 * p.C2 / p.rho);
    CHECK(eta <= 1.0 / b + 1e-15);
    if (a > 0) CHECK(eta <= std::sqrt(std::log(2.0) / (a * K)) + 1e-15);
    if (c > 0) CHECK(eta <= eps * eps / (2.0 * c) + 1e-15);
  }
}

TEST_CASE("exact-gradient iteration count has the closed form") {
  BoundResult k = thm1_iters(gd_params(), 4.0, 2.0, 1e-2);
  CHECK(k.raw == doctest::Approx(8.0 * 2.0 * 4.0 / 1e-4));
  CHECK(k.iters == static_cast<long long>(std::ceil(k.raw)));
}

TEST_CASE("variance-reduced counts scale as the inverse square target") {
  UnifiedParams p = vr_params();
  double k1 = thm1_iters(p, 3.0, 1.0, 1e-2).raw;
  double k2 = thm1_iters(p, 3.0, 1.0, 5e-3).raw;
  CHECK(k2 == doctest::Approx(4.0 * k1).epsilon(1e-12));
}

TEST_CASE("decreasing schedule starts flat and never increases") {
  long long K = 1000;
  auto sched = thm2_schedule(0.1, 0.5, K);
  CHECK(sched(0) == doctest::Approx(0.1));
  CHECK(sched(K / 2) == doctest::Approx(0.1));
  CHECK(sched(K) ==
        doctest::Approx(2.0 * 0.1 / (2.0 + (K / 2.0) * 0.5 * 0.1)));
  double prev = sched(0);
  for (long long k = 1; k <= K; ++k) {
    double cur = sched(k);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("noise-free certificates lose the linear-in-target branch") {
  UnifiedParams p = vr_params();
  double L = 3.0, mu = 0.2;
  double k1 = thm2_iters(p, L, mu, 1.0, 1e-3).raw;
  double k2 = thm2_iters(p, L, mu, 1.0, 1e-6).raw;
  // only log growth when C1 = C2 = 0
  CHECK(k2 / k1 == doctest::Approx(std::log(2.0 / 1e-6) / std::log(2.0 / 1e-3)));
}

TEST_CASE("constant-stepsize linear-rate bound reduces to the classic form") {
  UnifiedParams p = gd_params();
  double L = 8.0, mu = 1.0 / 32.0, delta0 = 2.0, eps = 1e-6;
  ConstantPlResult r = thm5_constant_pl(p, L, mu, delta0, eps);
  CHECK(r.eta == doctest::Approx(1.0 / L));
  CHECK(r.K.raw == doctest::Approx(256.0 * std::log(2.0 * delta0 / eps)));
}

TEST_CASE("the two linear-rate bounds agree within constant factors") {
  UnifiedParams p = vr_params();
  double L = 3.0, mu = 0.1, delta0 = 1.0, eps = 1e-4;
  double k2 = thm2_iters(p, L, mu, delta0, eps).raw;
  double k5 = thm5_constant_pl(p, L, mu, delta0, eps).K.raw;
  CHECK(k2 / k5 >= 0.1);
  CHECK(k2 / k5 <= 10.0);
}

TEST_CASE("recursion bound holds without noise") {
  Prop1Result r = check_prop1(0.2, 0.0, 0.5, 10.0, 50);
  CHECK(r.holds);
  CHECK(r.lhs <= std::pow(0.9, 25) * 10.0 * (1.0 + 1e-12));
}

TEST_CASE("recursion bound holds on the reference tuple") {
  Prop1Result r = check_prop1(0.1, 1.0, 0.5, 10.0, 100);
  CHECK(r.holds);
  CHECK(r.lhs <= r.rhs);
}

TEST_CASE("recursion bound holds on random tuples") {
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    double a = 0.01 + rng.uniform();
    double b = rng.uniform() / a;
    if (b <= 0) b = 0.5 / a;
    double c = 10.0 * rng.uniform();
    double m0 = 100.0 * rng.uniform();
    long long K = 10 + static_cast<long long>(rng.uniform_index(991));
    CHECK(check_prop1(a, c, b, m0, K).holds);
  }
}

TEST_CASE("closed-form bounds reproduce their reference values") {
  CorollaryInputs in;
  in.delta0 = 2.0;
  in.L = 4.0;
  in.eps = 1e-2;
  const double base = 8.0 * in.delta0 * in.L / (in.eps * in.eps);
  CHECK(corollary_bound("gd", in).raw == doctest::Approx(base));

  // balanced batch and refresh rate triple the base count
  in.n = 64;
  in.b = 16;  // 64^(2/3)
  in.p = 0.25;  // 64^(-1/3)
  CHECK(corollary_bound("lsvrg", in).raw == doctest::Approx(3.0 * base));
  CHECK(corollary_bound("saga", in).raw == doctest::Approx(3.0 * base));
  CHECK(corollary_stepsize_cap("lsvrg", in) == doctest::Approx(1.0 / (3.0 * in.L)));

  in.b = 1;
  in.p = 1.0 / 64.0;
  CHECK(corollary_bound("lsvrg", in).raw == doctest::Approx(base * 33.0));
  CHECK(corollary_bound("saga", in).raw == doctest::Approx(base * 33.0));

  in.mu = 0.5;
  in.b = 16;
  in.p = 0.25;
  double kappa = in.L / in.mu;
  double lt = std::log(2.0 * in.delta0 / in.eps);
  CHECK(corollary_bound("gd-pl", in).raw == doctest::Approx(kappa * lt));
  CHECK(corollary_bound("lsvrg-pl", in).raw == doctest::Approx(4.0 * kappa * lt));
  CHECK(corollary_bound("saga-pl", in).raw == doctest::Approx(4.0 * kappa * lt));
  CHECK_THROWS(corollary_bound("unknown", in));
}

TEST_CASE("compressed exact-gradient bound interpolates to no compression") {
  CorollaryInputs in;
  in.delta0 = 1.0;
  in.L = 2.0;
  in.eps = 1e-2;
  in.m = 4;
  in.omega = 0.0;
  in.Li = {2.0, 2.0, 2.0, 2.0};
  in.delta_fstar = 0.0;
  const double base = 8.0 * in.delta0 * in.L / (in.eps * in.eps);
  CHECK(corollary_bound("dc-gd", in).raw == doctest::Approx(base));
  in.omega = 3.0;
  in.delta_fstar = 0.5;
  double A = 2.0 - 2.0 / 4.0;
  double C = 2.0 * A * 0.5;
  double expect = base * std::max({1.0, 12.0 * 4.0 * in.delta0 * A / (in.eps * in.eps * 4),
                                   2.0 * 4.0 * C / (in.eps * in.eps * 4)});
  CHECK(corollary_bound("dc-gd", in).raw == doctest::Approx(expect));
}

TEST_CASE("shift-framework exact-gradient bound matches hand evaluation") {
  CorollaryInputs in;
  in.delta0 = 1.0;
  in.L = 2.0;
  in.eps = 1e-2;
  in.m = 4;
  in.omega = 3.0;
  in.alpha = 0.25;
  in.beta = 8.0;
  in.eta = 0.05;
  in.Li = {2.0, 2.0, 2.0, 2.0};
  double B = 3.0 * 9.0 * 4.0 * in.eta * in.eta / 4.0;
  double tau = 0.0625 * 3.0 + 4.0 * B / 4.0;
  double shift = 2.0 * 0.25 - 0.75 / 8.0 - 0.0625 - tau;
  double rho = std::min(1.0 - tau, shift);
  double base = 8.0 * in.delta0 * in.L / (in.eps * in.eps);
  CHECK(corollary_bound("diana-gd", in).raw ==
        doctest::Approx(base * (1.0 + 4.0 * B / (4.0 * rho))));
  in.mu = 0.4;
  double kappa = in.L / in.mu;
  double lt = std::log(2.0 * in.delta0 / in.eps);
  CHECK(corollary_bound("diana-gd-pl", in).raw ==
        doctest::Approx((1.0 + 2.0 * 4.0 * B / (4.0 * rho)) * kappa * lt));
}

TEST_CASE("stepsize and contraction resolve together") {
  double L = 4.0, Lbar = 4.0;
  int n = 64;
  EtaRho r = resolve_eta_rho(Method::lsvrg, L, Lbar, 1, 1.0 / n);
  CHECK(r.eta == doctest::Approx(1.0 / (L * (1.0 + 2.0 * std::pow(64.0, 2.0 / 3.0)))));
  CHECK(r.rho >= 1.0 / (4.0 * n));

  EtaRho z = resolve_eta_rho(Method::lsvrg, L, Lbar, 1, 0.5, 0.0);
  CHECK(z.rho == doctest::Approx(0.5 / 2.0 + 0.25 / 2.0));

  EtaRho full = resolve_eta_rho(Method::saga, L, Lbar, n, 1.0);
  CHECK(full.rho > 0.75);

  // a large component-wise constant shrinks the auto stepsize to the gate
  EtaRho tight = resolve_eta_rho(Method::lsvrg, L, 100.0 * Lbar, 1, 1.0 / n);
  CHECK(tight.eta == doctest::Approx(std::sqrt(1.0 / 64.0) / (2.0 * 100.0 * Lbar)));
  CHECK(tight.rho >= 1.0 / (4.0 * n));

  CHECK_THROWS(resolve_eta_rho(Method::lsvrg, L, 100.0 * Lbar, 1, 1.0 / n, 0.01));
}
