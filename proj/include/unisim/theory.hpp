#ifndef UNISIM_THEORY_HPP
#define UNISIM_THEORY_HPP

#include <functional>
#include <string>
#include <vector>

#include "unisim/estimators.hpp"

namespace unisim {

// Iteration bounds are reported both as the raw real value and its ceiling;
// comparisons should use the raw value.
struct BoundResult {
  double raw = 0;
  long long iters = 0;
  bool empirical = false;
};

// eta = min of the three branches (absent branches treated as +inf)
double thm1_stepsize(const UnifiedParams& p, double L, double K,
                     double epsilon);

// delta0' = delta0 + (1/2) L eta^2 D1 rho^-1 sigma0^2
double thm1_delta0_prime(const UnifiedParams& p, double L, double eta,
                         double delta0, double sigma0_sq);

// K = (8 delta0' L / eps^2) max{B-branch, A-branch, C-branch}
BoundResult thm1_iters(const UnifiedParams& p, double L, double delta0_prime,
                       double epsilon);

// constant-then-decreasing stepsize cap for the PL schedule
double thm2_stepsize_cap(const UnifiedParams& p, double L, double mu);

// delta0' = delta0 + L eta^2 D1 rho^-1 sigma0^2 (no 1/2 factor here)
double thm2_delta0_prime(const UnifiedParams& p, double L, double eta,
                         double delta0, double sigma0_sq);

// eta_k = eta for k <= K/2, then 2 eta / (2 + (k - K/2) mu eta)
std::function<double(long long)> thm2_schedule(double eta, double mu,
                                               long long K);

BoundResult thm2_iters(const UnifiedParams& p, double L, double mu,
                       double delta0_prime, double epsilon);

// constant-stepsize PL variant; returns the stepsize cap and the bound
struct ConstantPlResult {
  double eta = 0;
  BoundResult K;
};
ConstantPlResult thm5_constant_pl(const UnifiedParams& p, double L, double mu,
                                  double delta0_prime, double epsilon);

// Simulates M_k = (1 - a b_k) M_{k-1} + c b_k^2 with the constant-then-
// decreasing schedule and checks M_K <= (1 - a b)^{K/2} M_0 + 10 c / (a^2 K).
struct Prop1Result {
  bool holds = false;
  double lhs = 0, rhs = 0;
};
Prop1Result check_prop1(double a, double c, double b, double M0, long long K);

// Inputs for the closed-form corollary bounds. Scalar A/B/C are used directly
// unless the per-worker vectors are supplied, in which case A and C are
// recomputed from them.
struct CorollaryInputs {
  double delta0 = 0, L = 0, eps = 0;
  double mu = 0;
  int b = 1, n = 1, m = 1;
  double p = 1.0;
  double omega = 0, eta = 0, gamma = 0, alpha = 0, beta = 0;
  double Lbar = 0, delta_fstar = 0;
  double A = 0, B = 0, C = 0;  // empirical sgd constants where applicable
  std::vector<double> Li, A1i, B1i, C1i;
  bool empirical = false;
};

// ids: gd, sgd, lsvrg, saga, dc-gd, dc-sgd, dc-lsvrg, dc-saga, diana-gd,
// diana-sgd, diana-lsvrg, diana-saga, and the same with a -pl suffix
BoundResult corollary_bound(const std::string& id, const CorollaryInputs& in);

// stepsize cap attached to a corollary id (+inf when the id has none)
double corollary_stepsize_cap(const std::string& id, const CorollaryInputs& in);

// Resolves the stepsize/contraction circularity of the variance-reduced
// certificates: picks eta at the corollary cap when eta < 0, computes
// rho(eta) = q/2 + q^2/2 - eta^2 Lbar^2 / b with q = p (lsvrg) or b/n (saga),
// and requires eta^2 Lbar^2 / b <= q/4 so rho >= q/4.
struct EtaRho {
  double eta = 0, rho = 0;
};
EtaRho resolve_eta_rho(Method method, double L, double Lbar, int b, double q,
                       double eta = -1.0);

}  // namespace unisim

#endif
