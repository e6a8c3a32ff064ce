#include <cmath>
#include <vector>

#include "doctest.h"
#include "unisim/estimators.hpp"
#include "unisim/problems.hpp"
#include "unisim/theory.hpp"

using namespace unisim;

namespace {

Vec random_point(int d, Rng& rng, double scale = 1.5) {
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = scale * rng.normal();
  return x;
}

}  // namespace

TEST_CASE("method spec strings parse and print") {
  MethodSpec a = parse_method("gd");
  CHECK(a.method == Method::gd);
  MethodSpec b = parse_method("sgd:4");
  CHECK(b.method == Method::sgd);
  CHECK(b.b == 4);
  MethodSpec c = parse_method("lsvrg:2,0.125");
  CHECK(c.method == Method::lsvrg);
  CHECK(c.b == 2);
  CHECK(c.p == doctest::Approx(0.125));
  CHECK(method_name(c) == "lsvrg:2,0.125");
  MethodSpec d = parse_method("saga:3");
  CHECK(d.method == Method::saga);
  CHECK_THROWS(parse_method("svrg:1"));
  CHECK_THROWS(parse_method("lsvrg:2"));
}

TEST_CASE("full-gradient step equals the gradient oracle") {
  FiniteSumObjective obj = make_heterogeneous_lsq(1, 4, 2, 6, 8.0, 0.5);
  Rng rng(1);
  Vec x = random_point(4, rng);
  CHECK((gd_step(obj, x) - eval_grad(obj, x)).norm() == 0.0);
}

TEST_CASE("single-component problems make the stochastic step exact") {
  FiniteSumObjective obj = make_heterogeneous_lsq(2, 3, 1, 1, 4.0, 0.0);
  Rng rng(2);
  Vec x = random_point(3, rng);
  Vec g = sgd_step(obj, x, 1, rng);
  CHECK((g - eval_grad(obj, x)).norm() <= 1e-14);
}

TEST_CASE("every estimator is unbiased") {
  FiniteSumObjective obj = make_heterogeneous_lsq(3, 4, 2, 4, 10.0, 0.8);
  Rng prng(3);
  Vec x0 = random_point(4, prng);
  for (const char* spec :
       {"sgd:2", "lsvrg:1,0.25", "saga:1"}) {
    EstimatorState st = make_state(obj, parse_method(spec), x0);
    SamplingModel model = model_for(st, obj);
    Vec x = random_point(4, prng);
    Vec target = eval_grad(obj, x);
    const int samples = 40000;
    Rng rng(4, 0, 0, 1);
    Vec mean = Vec::Zero(4);
    std::vector<double> m2(4, 0.0);
    for (int s = 0; s < samples; ++s) {
      Vec g = model.draw_g(x, rng);
      mean += g;
      for (int i = 0; i < 4; ++i) m2[i] += g[i] * g[i];
    }
    mean /= samples;
    for (int i = 0; i < 4; ++i) {
      double var = m2[i] / samples - mean[i] * mean[i];
      double se = std::sqrt(std::max(var, 1e-30) / samples);
      double z = se > 0 ? std::abs(mean[i] - target[i]) / se : 0.0;
      CHECK(z <= 4.0);
    }
  }
}

TEST_CASE("anchored estimator at its anchor is deterministic") {
  FiniteSumObjective obj = make_heterogeneous_lsq(4, 3, 1, 6, 5.0, 0.0);
  Rng prng(5);
  Vec w = random_point(3, prng);
  EstimatorState st = make_state(obj, parse_method("lsvrg:1,0.5"), w);
  Vec expect = eval_grad(obj, w);
  for (int t = 0; t < 10; ++t) {
    EstimatorState tmp = st;
    Rng rng(6, 0, static_cast<uint64_t>(t), 0);
    Vec g = lsvrg_step(tmp, obj, w, rng);
    CHECK((g - expect).norm() <= 1e-13);
  }
}

TEST_CASE("table estimator with a fresh table is deterministic") {
  FiniteSumObjective obj = make_heterogeneous_lsq(5, 3, 1, 5, 5.0, 0.0);
  Rng prng(7);
  Vec x = random_point(3, prng);
  EstimatorState st = make_state(obj, parse_method("saga:2"), x);
  Vec expect = eval_grad(obj, x);
  for (int t = 0; t < 10; ++t) {
    EstimatorState tmp = st;
    Rng rng(8, 0, static_cast<uint64_t>(t), 0);
    CHECK((saga_step(tmp, obj, x, rng) - expect).norm() <= 1e-13);
  }
}

TEST_CASE("table running average matches a full recompute after many steps") {
  FiniteSumObjective obj = make_heterogeneous_lsq(6, 3, 1, 8, 6.0, 0.0);
  Rng prng(9);
  Vec x = random_point(3, prng);
  EstimatorState st = make_state(obj, parse_method("saga:2"), x);
  Rng rng(10);
  for (int k = 0; k < 100; ++k) {
    Vec g = saga_step(st, obj, x, rng);
    x -= 0.01 * g;
  }
  Vec direct = Vec::Zero(3);
  for (int c = 0; c < obj.total_components(); ++c)
    direct += eval_component_grad_flat(obj, c, st.table[c]);
  direct /= obj.total_components();
  CHECK((st.table_grad_avg - direct).norm() <= 1e-9 * (1.0 + direct.norm()));
}

TEST_CASE("exact second moment of the minibatch estimator matches sampling") {
  FiniteSumObjective obj = make_heterogeneous_lsq(7, 4, 2, 3, 10.0, 0.6);
  Rng prng(11);
  Vec x = random_point(4, prng);
  for (int b : {1, 3}) {
    double exact = sgd_second_moment(obj, x, b);
    Rng rng(12);
    double mean = 0.0;
    const int samples = 40000;
    for (int s = 0; s < samples; ++s)
      mean += sgd_step(obj, x, b, rng).squaredNorm();
    mean /= samples;
    CHECK(mean == doctest::Approx(exact).epsilon(0.05));
  }
}

TEST_CASE("exhaustive enumeration reproduces the table estimator moment") {
  // d=2, n=4, b=1: only four equally likely draws
  FiniteSumObjective obj = make_heterogeneous_lsq(8, 2, 1, 4, 5.0, 0.0);
  Rng prng(13);
  Vec x0 = random_point(2, prng);
  EstimatorState st = make_state(obj, parse_method("saga:1"), x0);
  Rng step_rng(14);
  Vec xs = x0;
  for (int k = 0; k < 5; ++k) xs -= 0.05 * saga_step(st, obj, xs, step_rng);

  double exact = 0.0;
  for (int c = 0; c < 4; ++c) {
    Vec g = st.table_grad_avg + eval_component_grad_flat(obj, c, xs) -
            eval_component_grad_flat(obj, c, st.table[c]);
    exact += g.squaredNorm() / 4.0;
  }
  SamplingModel model = model_for(st, obj);
  Rng rng(15);
  double mean = 0.0;
  const int samples = 40000;
  for (int s = 0; s < samples; ++s)
    mean += model.draw_g(xs, rng).squaredNorm();
  mean /= samples;
  CHECK(mean == doctest::Approx(exact).epsilon(0.05));

  // and the certificate right-hand side dominates the exact moment
  double eta = resolve_eta_rho(Method::saga, obj.L, obj.Lbar, 1, 0.25).eta;
  UnifiedParams p = certificate(parse_method("saga:1"), obj, eta);
  double gap = eval_f(obj, xs) - obj.f_star;
  double rhs = 2.0 * p.A1 * gap + p.B1 * eval_grad(obj, xs).squaredNorm() +
               p.D1 * sigma_sq(st, obj, xs) + p.C1;
  CHECK(exact <= rhs * (1.0 + 1e-12));
}

TEST_CASE("certificates carry the lemma constants") {
  FiniteSumObjective obj = make_heterogeneous_lsq(9, 3, 1, 8, 5.0, 0.0);
  UnifiedParams gd = certificate(parse_method("gd"), obj, 0.1);
  CHECK(gd.B1 == 1.0);
  CHECK(gd.A1 == 0.0);
  CHECK(gd.C1 == 0.0);
  CHECK(gd.D1 == 0.0);
  CHECK(gd.rho == 1.0);

  const int n = obj.total_components();
  const double p = 1.0 / n;
  double eta = resolve_eta_rho(Method::lsvrg, obj.L, obj.Lbar, 1, p).eta;
  UnifiedParams ls = certificate(parse_method("lsvrg:1," + std::to_string(p)),
                                 obj, eta);
  CHECK(ls.D1 == doctest::Approx(obj.Lbar * obj.Lbar));
  CHECK(ls.B2 == doctest::Approx(2.0 * eta * eta * n - eta * eta));
  CHECK(ls.rho == doctest::Approx(p / 2.0 + p * p / 2.0 -
                                  eta * eta * obj.Lbar * obj.Lbar));
  CHECK(ls.rho > 0.0);

  // stepsize above the contraction gate must be refused
  double too_big = std::sqrt(p) / obj.Lbar;  // eta^2 Lbar^2 = p > p/4
  CHECK_THROWS(certificate(parse_method("lsvrg:1," + std::to_string(p)), obj,
                           too_big));
  CHECK_THROWS(certificate(parse_method("saga:1"), obj, 2.0 / obj.Lbar));
}

TEST_CASE("empirical minibatch certificate dominates the exact moment") {
  FiniteSumObjective obj = make_heterogeneous_lsq(10, 4, 2, 4, 8.0, 0.5);
  UnifiedParams p = certificate(parse_method("sgd:2"), obj, 0.1);
  CHECK(p.empirical);
  CHECK(p.B1 >= 1.0);
  CHECK(p.D1 == 0.0);
  CHECK(p.rho == 1.0);
  Rng rng(16);
  for (int t = 0; t < 50; ++t) {
    Vec x = random_point(4, rng, 2.0);
    double lhs = sgd_second_moment(obj, x, 2);
    double rhs = 2.0 * p.A1 * (eval_f(obj, x) - obj.f_star) +
                 p.B1 * eval_grad(obj, x).squaredNorm() + p.C1;
    CHECK(lhs <= rhs * (1.0 + 1e-9) + 1e-12);
  }
}

TEST_CASE("nonnegative least squares solves small systems") {
  Mat X(4, 2);
  X << 1, 0, 0, 1, 1, 1, 2, 1;
  Vec y = X * Vec{{0.5, 2.0}};
  Vec theta = nnls_small(X, y);
  CHECK(theta[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(theta[1] == doctest::Approx(2.0).epsilon(1e-9));

  // unconstrained optimum has a negative entry; solution clamps it to zero
  Mat X2(3, 2);
  X2 << 1, 1, 1, 0.9, 1, 1.1;
  Vec y2(3);
  y2 << 1.0, 1.2, 0.8;  // wants a negative weight on the second column
  Vec t2 = nnls_small(X2, y2);
  CHECK(t2.minCoeff() >= 0.0);
  // compare against a dense grid over the nonnegative quadrant
  double best = 1e300;
  for (double a = 0.0; a <= 2.0; a += 0.002)
    best = std::min(best, (X2.col(0) * a - y2).squaredNorm());
  CHECK((X2 * t2 - y2).squaredNorm() <= best + 1e-6);
}

TEST_CASE("moment and recursion inequalities verify on the catalog") {
  FiniteSumObjective lsq = make_heterogeneous_lsq(11, 4, 1, 8, 6.0, 0.0);
  FiniteSumObjective pl = make_sin_pl_nd(2);
  Rng prng(17);
  for (const auto* obj : {&lsq, &pl}) {
    for (const char* specs : {"gd", "sgd:1", "lsvrg:1,0.25", "saga:1"}) {
      MethodSpec spec = parse_method(specs);
      double q = spec.method == Method::lsvrg
                     ? spec.p
                     : static_cast<double>(spec.b) / obj->total_components();
      double eta = resolve_eta_rho(spec.method, obj->L, obj->Lbar, spec.b, q).eta;
      UnifiedParams p = certificate(spec, *obj, eta);
      std::vector<Vec> pts;
      for (int t = 0; t < 5; ++t) pts.push_back(random_point(obj->d, prng));
      EstimatorState st = make_state(*obj, spec, pts.front());
      Rng rng(18);
      Assumption1Report rep = verify_assumption1(model_for(st, *obj), *obj, p,
                                                 pts, eta, 10000, rng);
      CHECK(rep.pass);
    }
  }
}

TEST_CASE("exact-gradient verification is the equality case") {
  FiniteSumObjective obj = make_heterogeneous_lsq(12, 3, 1, 4, 4.0, 0.0);
  UnifiedParams p = certificate(parse_method("gd"), obj, 0.1);
  Rng prng(19);
  std::vector<Vec> pts = {random_point(3, prng)};
  EstimatorState st = make_state(obj, parse_method("gd"), pts.front());
  Rng rng(20);
  Assumption1Report rep =
      verify_assumption1(model_for(st, obj), obj, p, pts, 0.1, 1000, rng);
  CHECK(rep.pass);
  CHECK(std::abs(rep.worst_margin) <= 1e-9);
}
