#include "unisim/problems.hpp"

#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace unisim {

double FiniteSumObjective::delta_fstar() const {
  double avg = 0.0;
  for (double v : fi_star) avg += v;
  avg /= static_cast<double>(m);
  return f_star - avg;
}

static void check_dim(const FiniteSumObjective& obj, const Vec& x) {
  if (x.size() != obj.d)
    throw std::invalid_argument("dimension mismatch: expected " +
                                std::to_string(obj.d) + ", got " +
                                std::to_string(x.size()));
}

double eval_f(const FiniteSumObjective& obj, const Vec& x) {
  check_dim(obj, x);
  return obj.value(x);
}

double eval_worker_f(const FiniteSumObjective& obj, int i, const Vec& x) {
  check_dim(obj, x);
  if (i < 0 || i >= obj.m) throw std::out_of_range("worker index");
  return obj.worker_value(i, x);
}

Vec eval_grad(const FiniteSumObjective& obj, const Vec& x) {
  check_dim(obj, x);
  return obj.full_grad(x);
}

Vec eval_worker_grad(const FiniteSumObjective& obj, int i, const Vec& x) {
  check_dim(obj, x);
  if (i < 0 || i >= obj.m) throw std::out_of_range("worker index");
  return obj.worker_grad(i, x);
}

Vec eval_component_grad(const FiniteSumObjective& obj, int i, int j,
                        const Vec& x) {
  check_dim(obj, x);
  if (i < 0 || i >= obj.m) throw std::out_of_range("worker index");
  if (j < 0 || j >= obj.n) throw std::out_of_range("component index");
  return obj.component_grad(i, j, x);
}

Vec eval_component_grad_flat(const FiniteSumObjective& obj, int c,
                             const Vec& x) {
  if (c < 0 || c >= obj.m * obj.n) throw std::out_of_range("component index");
  return eval_component_grad(obj, c / obj.n, c % obj.n, x);
}

namespace {

struct LsqData {
  std::vector<Mat> A;  // m matrices, n x d rows a_ij
  std::vector<Vec> b;  // m vectors length n
};

Mat random_orthogonal(int d, Rng& rng) {
  Mat g(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  return q;
}

}  // namespace

FiniteSumObjective make_heterogeneous_lsq(uint64_t seed, int d, int m, int n,
                                          double condition_number,
                                          double heterogeneity) {
  if (d < 1 || m < 1 || n < 1) throw std::invalid_argument("sizes must be >= 1");
  if (condition_number < 1.0)
    throw std::invalid_argument("condition_number must be >= 1");
  if (heterogeneity < 0.0)
    throw std::invalid_argument("heterogeneity must be >= 0");

  Rng rng(seed, 0, 0, 0x10);
  auto data = std::make_shared<LsqData>();
  data->A.resize(m);
  data->b.resize(m);

  Vec x_base(d);
  for (int c = 0; c < d; ++c) x_base[c] = rng.normal();

  std::vector<Mat> Q(m);
  std::vector<Vec> target(m);
  for (int i = 0; i < m; ++i) {
    Mat U = random_orthogonal(d, rng);
    // eigenvalues spanning [1/condition_number, 1], geometric spacing
    Vec lam(d);
    for (int j = 0; j < d; ++j) {
      double t = (d > 1) ? static_cast<double>(j) / (d - 1) : 0.0;
      lam[j] = std::pow(condition_number, -t);
    }
    // round-robin direction assignment keeps the worker Gram exact:
    // (1/n) sum_r a_r a_r^T = sum_dir lam_dir u_dir u_dir^T
    std::vector<int> count(d, 0);
    for (int r = 0; r < n; ++r) count[r % d]++;
    Mat A(n, d);
    for (int r = 0; r < n; ++r) {
      int dir = r % d;
      double s = std::sqrt(static_cast<double>(n) * lam[dir] / count[dir]);
      A.row(r) = s * U.col(dir).transpose();
    }
    Vec shift(d);
    if (heterogeneity > 0.0) {
      for (int c = 0; c < d; ++c) shift[c] = rng.normal();
      shift.normalize();
    } else {
      shift.setZero();
    }
    target[i] = x_base + heterogeneity * shift;
    data->A[i] = A;
    data->b[i] = A * target[i];  // consistent system: fi* = 0 exactly
    Q[i] = (A.transpose() * A) / static_cast<double>(n);
  }

  FiniteSumObjective obj;
  obj.d = d;
  obj.m = m;
  obj.n = n;
  obj.name = "lsq";
  obj.fi_star.assign(m, 0.0);

  obj.worker_value = [data, n](int i, const Vec& x) {
    Vec r = data->A[i] * x - data->b[i];
    return 0.5 * r.squaredNorm() / static_cast<double>(n);
  };
  obj.value = [data, m, n](const Vec& x) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      Vec r = data->A[i] * x - data->b[i];
      s += 0.5 * r.squaredNorm() / static_cast<double>(n);
    }
    return s / static_cast<double>(m);
  };
  obj.worker_grad = [data, n](int i, const Vec& x) {
    Vec r = data->A[i] * x - data->b[i];
    return Vec(data->A[i].transpose() * r / static_cast<double>(n));
  };
  obj.full_grad = [data, m, n](const Vec& x) {
    Vec g = Vec::Zero(x.size());
    for (int i = 0; i < m; ++i) {
      Vec r = data->A[i] * x - data->b[i];
      g += data->A[i].transpose() * r / static_cast<double>(n);
    }
    return Vec(g / static_cast<double>(m));
  };
  obj.component_grad = [data](int i, int j, const Vec& x) {
    double r = data->A[i].row(j).dot(x) - data->b[i][j];
    return Vec(r * data->A[i].row(j).transpose());
  };

  // exact constants from the data
  double sumLi2 = 0.0;
  double lbar2 = 0.0;
  Mat Qglob = Mat::Zero(d, d);
  Vec cglob = Vec::Zero(d);
  for (int i = 0; i < m; ++i) {
    Eigen::SelfAdjointEigenSolver<Mat> es(Q[i]);
    double li = es.eigenvalues().maxCoeff();
    obj.Li.push_back(li);
    sumLi2 += li * li;
    Mat W = Mat::Zero(d, d);
    for (int r = 0; r < n; ++r) {
      Vec a = data->A[i].row(r).transpose();
      W += a.squaredNorm() * (a * a.transpose());
    }
    W /= static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Mat> esw(W);
    lbar2 = std::max(lbar2, esw.eigenvalues().maxCoeff());
    Qglob += Q[i] / static_cast<double>(m);
    cglob += Q[i] * target[i] / static_cast<double>(m);
  }
  obj.L = std::sqrt(sumLi2 / m);
  obj.Lbar = std::sqrt(lbar2);

  Vec xstar = Qglob.completeOrthogonalDecomposition().solve(cglob);
  obj.f_star = obj.value(xstar);
  Eigen::SelfAdjointEigenSolver<Mat> esg(Qglob);
  double lmin = esg.eigenvalues().minCoeff();
  if (lmin > 1e-12) obj.mu = lmin;
  return obj;
}

FiniteSumObjective make_sin_pl() { return make_sin_pl_nd(1); }

FiniteSumObjective make_sin_pl_nd(int d) {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  FiniteSumObjective obj;
  obj.d = d;
  obj.m = 1;
  obj.n = 1;
  obj.name = d == 1 ? "sinpl" : ("sinpl" + std::to_string(d));
  auto val = [](const Vec& x) {
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      double si = std::sin(x[i]);
      s += x[i] * x[i] + 3.0 * si * si;
    }
    return s;
  };
  auto grad = [](const Vec& x) {
    Vec g(x.size());
    for (int i = 0; i < x.size(); ++i) g[i] = 2.0 * x[i] + 3.0 * std::sin(2.0 * x[i]);
    return g;
  };
  obj.value = val;
  obj.worker_value = [val](int, const Vec& x) { return val(x); };
  obj.full_grad = grad;
  obj.worker_grad = [grad](int, const Vec& x) { return grad(x); };
  obj.component_grad = [grad](int, int, const Vec& x) { return grad(x); };
  obj.f_star = 0.0;
  obj.fi_star = {0.0};
  obj.L = 8.0;  // |f''| = |2 + 6 cos 2x| <= 8 per coordinate
  obj.Li = {8.0};
  obj.Lbar = 8.0;
  obj.mu = 1.0 / 32.0;
  return obj;
}

double estimate_smoothness(const FiniteSumObjective& obj, int samples,
                           Rng& rng) {
  if (samples < 2) throw std::invalid_argument("samples must be >= 2");
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vec x(obj.d), y(obj.d);
    for (int c = 0; c < obj.d; ++c) {
      x[c] = 2.0 * rng.normal();
      y[c] = 2.0 * rng.normal();
    }
    double dist = (x - y).norm();
    if (dist < 1e-12) continue;
    double ratio = (eval_grad(obj, x) - eval_grad(obj, y)).norm() / dist;
    best = std::max(best, ratio);
  }
  if (best > obj.L * (1.0 + 1e-9))
    throw std::runtime_error("empirical smoothness exceeds stored L");
  return best;
}

}  // namespace unisim
