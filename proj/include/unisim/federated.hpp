#ifndef UNISIM_FEDERATED_HPP
#define UNISIM_FEDERATED_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "unisim/compression.hpp"
#include "unisim/estimators.hpp"
#include "unisim/problems.hpp"

namespace unisim {

enum class Framework { none, dc, diana };

Framework parse_framework(const std::string& spec);  // "dc", "diana:<a|auto>"

// Restriction of a federated objective to one worker (m = 1 view).
FiniteSumObjective worker_view(const FiniteSumObjective& obj, int i);

// One-process simulation of m workers running DC or DIANA with a shared
// compressor kind/omega and the same local method on every worker.
struct FedSystem {
  const FiniteSumObjective* obj = nullptr;
  Framework fw = Framework::dc;
  MethodSpec local;
  CompressionOperator comp;
  double alpha = 1.0;  // diana shift stepsize

  // diana shifts (h0 = 0)
  std::vector<Vec> h;
  Vec h_server;
  // lsvrg: anchor shared across workers (one flip coin per round)
  Vec w;
  std::vector<Vec> anchor_worker_grads;
  // saga: per-worker tables over that worker's n components
  std::vector<std::vector<Vec>> tables;
  std::vector<Vec> table_avgs;
};

FedSystem make_fed(const FiniteSumObjective& obj, Framework fw,
                   const MethodSpec& local, const CompressionOperator& comp,
                   const Vec& x0, double alpha);

struct RoundTrace {
  Vec g;
  long floats_sent = 0;  // summed over workers this round
  std::vector<double> payload_norms;
};

// One communication round at iterate x. All randomness is derived from
// (seed, worker, round, purpose), so worker order never matters.
RoundTrace fed_round(FedSystem& sys, const Vec& x, uint64_t seed,
                     uint64_t round);

// sigma_k^2 of the composed certificate at the system's current state
double fed_sigma_sq(const FedSystem& sys, const Vec& x);

SamplingModel model_for_fed(const FedSystem& sys);

// Local certificate of worker i's estimator recursion (the D2 entry
// multiplies E||g^k||^2 of the *global* estimator).
struct LocalParams {
  double A1 = 0, B1 = 1, C1 = 0, D1 = 0;
  double rho = 1, A2 = 0, B2 = 0, C2 = 0, D2 = 0;
  bool empirical = false;
};

// gamma is the free Young parameter of the lsvrg/saga local recursions;
// pass gamma <= 0 to use the default p/(2(1-p)).
LocalParams local_certificate(const MethodSpec& spec,
                              const FiniteSumObjective& obj, int worker,
                              double eta, double gamma = -1.0);
double default_gamma(double p_or_bn);

// Direct-compression composition (general per-worker averaging path).
UnifiedParams compose_dc(const std::vector<LocalParams>& locals, double omega,
                         int m, const std::vector<double>& Li,
                         double delta_fstar);
// Same-variance specialization: all workers share one sigma recursion.
UnifiedParams compose_dc_same(const std::vector<LocalParams>& locals,
                              double omega, int m,
                              const std::vector<double>& Li,
                              double delta_fstar);

UnifiedParams compose_diana(const std::vector<LocalParams>& locals,
                            double omega, int m, const std::vector<double>& Li,
                            double delta_fstar, double eta, double alpha,
                            double beta);

// alpha = 1/(1+omega), beta = 2/alpha
std::pair<double, double> default_diana_knobs(double omega);

}  // namespace unisim

#endif
