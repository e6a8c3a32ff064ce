#ifndef UNISIM_ESTIMATORS_HPP
#define UNISIM_ESTIMATORS_HPP

#include <functional>
#include <string>
#include <vector>

#include "unisim/problems.hpp"
#include "unisim/rng.hpp"

namespace unisim {

enum class Method { gd, sgd, lsvrg, saga };

struct MethodSpec {
  Method method = Method::gd;
  int b = 1;       // minibatch size
  double p = 1.0;  // lsvrg anchor-flip probability
};

// spec strings: "gd", "sgd:<b>", "lsvrg:<b>,<p>", "saga:<b>"
MethodSpec parse_method(const std::string& spec);
std::string method_name(const MethodSpec& spec);

// Certificate for the unified two-recursion bound on the estimator:
//   E||g||^2 <= 2 A1 (f - f*) + B1 ||grad f||^2 + D1 sigma^2 + C1
//   E[sigma'^2] <= (1 - rho) sigma^2 + 2 A2 (f - f*) + B2 ||grad f||^2 + C2
struct UnifiedParams {
  double A1 = 0, B1 = 0, C1 = 0, D1 = 0;
  double rho = 1, A2 = 0, B2 = 0, C2 = 0;
  enum class Sigma {
    zero,
    anchor_dist,
    saga_table_dist,
    composed_dc,
    composed_diana
  } sigma_def = Sigma::zero;
  bool empirical = false;  // true when constants come from a data fit
};

struct EstimatorState {
  MethodSpec spec;
  // lsvrg: anchor point and cached full gradient at the anchor
  Vec w;
  Vec anchor_grad;
  // saga: one stored point per component (flat index) and the running
  // average of component gradients at the stored points
  std::vector<Vec> table;
  Vec table_grad_avg;
};

EstimatorState make_state(const FiniteSumObjective& obj, const MethodSpec& spec,
                          const Vec& x0);

Vec gd_step(const FiniteSumObjective& obj, const Vec& x);
Vec sgd_step(const FiniteSumObjective& obj, const Vec& x, int b, Rng& rng);
Vec lsvrg_step(EstimatorState& st, const FiniteSumObjective& obj, const Vec& x,
               Rng& rng);
Vec saga_step(EstimatorState& st, const FiniteSumObjective& obj, const Vec& x,
              Rng& rng);
// dispatches on st.spec and advances state
Vec estimator_step(EstimatorState& st, const FiniteSumObjective& obj,
                   const Vec& x, Rng& rng);

double sigma_sq(const EstimatorState& st, const FiniteSumObjective& obj,
                const Vec& x);

// exact E||g||^2 for uniform-with-replacement minibatch SGD
double sgd_second_moment(const FiniteSumObjective& obj, const Vec& x, int b);

// Lemma-style certificate. For sgd the (A,B,C) constants are fit empirically
// (nonnegative least squares over 200 sampled points, inflated 10%) and the
// result is marked empirical. Throws std::runtime_error when the stepsize
// violates the variance-contraction gate of lsvrg/saga.
UnifiedParams certificate(const MethodSpec& spec, const FiniteSumObjective& obj,
                          double eta);

// Monte Carlo oracle interface shared by single-node and federated checks.
struct SamplingModel {
  // one estimator draw at x without advancing persistent state
  std::function<Vec(const Vec&, Rng&)> draw_g;
  // sigma_k^2 at x given the model's current state
  std::function<double(const Vec&)> sigma_now;
  // simulate a full step x' = x - eta g from a cloned state; returns sigma_{k+1}^2
  std::function<double(const Vec&, double, Rng&)> sigma_after;
};

SamplingModel model_for(const EstimatorState& st, const FiniteSumObjective& obj);

struct Assumption1Entry {
  double lhs1 = 0, rhs1 = 0;
  double lhs2 = 0, rhs2 = 0;
  bool checked2 = false;
  bool pass = true;
};

struct Assumption1Report {
  bool pass = true;
  double worst_margin = 1e300;  // min over entries of (rhs-lhs)/max(rhs,eps)
  std::vector<Assumption1Entry> entries;
};

Assumption1Report verify_assumption1(const SamplingModel& model,
                                     const FiniteSumObjective& obj,
                                     const UnifiedParams& params,
                                     const std::vector<Vec>& points, double eta,
                                     int samples, Rng& rng);

// nonnegative least squares for a small number of columns (exhaustive support
// search); returns theta >= 0 minimizing ||X theta - y||
Vec nnls_small(const Mat& X, const Vec& y);

}  // namespace unisim

#endif
