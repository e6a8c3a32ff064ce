#ifndef UNISIM_PROBLEMS_HPP
#define UNISIM_PROBLEMS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "unisim/rng.hpp"

namespace unisim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Finite-sum objective f(x) = (1/m) sum_i f_i(x), f_i(x) = (1/n) sum_j f_ij(x)
// with analytic oracles and exact constants.
struct FiniteSumObjective {
  int d = 0;  // dimension
  int m = 0;  // workers
  int n = 0;  // components per worker

  std::function<double(const Vec&)> value;
  std::function<double(int, const Vec&)> worker_value;
  std::function<Vec(const Vec&)> full_grad;
  std::function<Vec(int, const Vec&)> worker_grad;
  std::function<Vec(int, int, const Vec&)> component_grad;

  double f_star = 0.0;
  std::vector<double> fi_star;
  double L = 0.0;  // convention: L^2 = (1/m) sum_i Li^2
  std::vector<double> Li;
  double Lbar = 0.0;  // average-smoothness constant over components
  std::optional<double> mu;
  std::string name;

  int total_components() const { return m * n; }
  // f* - (1/m) sum_i fi*
  double delta_fstar() const;
};

double eval_f(const FiniteSumObjective& obj, const Vec& x);
double eval_worker_f(const FiniteSumObjective& obj, int i, const Vec& x);
Vec eval_grad(const FiniteSumObjective& obj, const Vec& x);
Vec eval_worker_grad(const FiniteSumObjective& obj, int i, const Vec& x);
Vec eval_component_grad(const FiniteSumObjective& obj, int i, int j,
                        const Vec& x);
// flat component index c in [0, m*n)
Vec eval_component_grad_flat(const FiniteSumObjective& obj, int c, const Vec& x);

// Synthetic least squares with per-worker data; each worker's system is
// consistent (fi* = 0) and worker targets are spread by `heterogeneity`.
// All constants (L, Li, Lbar, mu, f*, fi*) are exact.
FiniteSumObjective make_heterogeneous_lsq(uint64_t seed, int d, int m, int n,
                                          double condition_number,
                                          double heterogeneity);

// f(x) = x^2 + 3 sin^2 x: nonconvex, PL with mu = 1/32, L = 8, f* = 0.
FiniteSumObjective make_sin_pl();
// Separable d-dimensional extension sum_i (x_i^2 + 3 sin^2 x_i).
FiniteSumObjective make_sin_pl_nd(int d);

// Max over sampled pairs of ||grad f(x)-grad f(y)|| / ||x-y||.
// Throws if the estimate exceeds the stored L beyond rounding.
double estimate_smoothness(const FiniteSumObjective& obj, int samples, Rng& rng);

}  // namespace unisim

#endif
