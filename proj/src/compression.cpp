#include "unisim/compression.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace unisim {

CompressionOperator make_identity(int d) {
  CompressionOperator op;
  op.kind = CompressionOperator::Kind::identity;
  op.d = d;
  op.omega = 0.0;
  return op;
}

CompressionOperator make_rand_k(int d, int k) {
  if (k < 1 || k > d) throw std::invalid_argument("rand_k requires 1 <= k <= d");
  CompressionOperator op;
  op.kind = CompressionOperator::Kind::rand_k;
  op.d = d;
  op.k = k;
  op.omega = static_cast<double>(d) / k - 1.0;
  return op;
}

CompressionOperator make_dithering(int d, int s) {
  if (s < 1) throw std::invalid_argument("dithering requires s >= 1");
  CompressionOperator op;
  op.kind = CompressionOperator::Kind::dithering;
  op.d = d;
  op.s = s;
  // conservative closed-form certificate for norm-scaled dithering
  op.omega = std::min(static_cast<double>(d) / (static_cast<double>(s) * s),
                      std::sqrt(static_cast<double>(d)) / s);
  return op;
}

CompressionOperator parse_compressor(const std::string& spec, int d) {
  if (spec == "identity") return make_identity(d);
  if (spec.rfind("randk:", 0) == 0)
    return make_rand_k(d, std::stoi(spec.substr(6)));
  if (spec.rfind("dither:", 0) == 0)
    return make_dithering(d, std::stoi(spec.substr(7)));
  throw std::invalid_argument("unknown compressor spec: " + spec);
}

std::string compressor_name(const CompressionOperator& op) {
  switch (op.kind) {
    case CompressionOperator::Kind::identity:
      return "identity";
    case CompressionOperator::Kind::rand_k:
      return "randk:" + std::to_string(op.k);
    case CompressionOperator::Kind::dithering:
      return "dither:" + std::to_string(op.s);
  }
  return "?";
}

Vec compress(const CompressionOperator& op, const Vec& x, Rng& rng) {
  if (x.size() != op.d) throw std::invalid_argument("compressor dimension mismatch");
  switch (op.kind) {
    case CompressionOperator::Kind::identity:
      return x;
    case CompressionOperator::Kind::rand_k: {
      // partial Fisher-Yates for a uniform k-subset
      std::vector<int> idx(op.d);
      for (int i = 0; i < op.d; ++i) idx[i] = i;
      Vec out = Vec::Zero(op.d);
      const double scale = static_cast<double>(op.d) / op.k;
      for (int t = 0; t < op.k; ++t) {
        int r = t + static_cast<int>(rng.uniform_index(op.d - t));
        std::swap(idx[t], idx[r]);
        out[idx[t]] = scale * x[idx[t]];
      }
      return out;
    }
    case CompressionOperator::Kind::dithering: {
      double norm = x.norm();
      if (norm == 0.0) return Vec::Zero(op.d);
      Vec out(op.d);
      for (int i = 0; i < op.d; ++i) {
        double y = std::abs(x[i]) * op.s / norm;
        double l = std::floor(y);
        double level = l + (rng.uniform() < (y - l) ? 1.0 : 0.0);
        out[i] = (x[i] < 0 ? -1.0 : 1.0) * norm * level / op.s;
      }
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

double omega_of(const CompressionOperator& op) { return op.omega; }

long floats_per_message(const CompressionOperator& op) {
  switch (op.kind) {
    case CompressionOperator::Kind::identity:
      return op.d;
    case CompressionOperator::Kind::rand_k:
      return 2L * op.k;  // k index-value pairs
    case CompressionOperator::Kind::dithering:
      return op.d;  // d quantized entries (norm amortized away)
  }
  return op.d;
}

CompressorReport verify_compressor(const CompressionOperator& op,
                                   const std::vector<Vec>& trial_vectors,
                                   int samples, Rng& rng) {
  if (samples < 1000) throw std::invalid_argument("samples must be >= 1e3");
  CompressorReport rep;
  const double omega = omega_of(op);
  for (const Vec& x : trial_vectors) {
    Vec mean = Vec::Zero(op.d);
    Vec m2 = Vec::Zero(op.d);  // per-coordinate sum of squares
    double err2 = 0.0;
    for (int s = 0; s < samples; ++s) {
      Vec c = compress(op, x, rng);
      mean += c;
      m2 += c.cwiseProduct(c);
      err2 += (c - x).squaredNorm();
    }
    mean /= samples;
    err2 /= samples;
    for (int i = 0; i < op.d; ++i) {
      double var = m2[i] / samples - mean[i] * mean[i];
      double se = std::sqrt(std::max(var, 0.0) / samples);
      double z = se > 0 ? std::abs(mean[i] - x[i]) / se
                        : (std::abs(mean[i] - x[i]) > 1e-12 ? 1e9 : 0.0);
      rep.max_bias_z = std::max(rep.max_bias_z, z);
    }
    double xnorm2 = x.squaredNorm();
    double ratio = xnorm2 > 0 ? err2 / xnorm2 : 0.0;
    rep.max_variance_ratio = std::max(rep.max_variance_ratio, ratio);
    if (ratio > omega * (1.0 + 5.0 / std::sqrt(static_cast<double>(samples))) +
                    1e-12)
      rep.violation = true;
  }
  return rep;
}

}  // namespace unisim
