#ifndef UNISIM_COMPRESSION_HPP
#define UNISIM_COMPRESSION_HPP

#include <string>
#include <vector>

#include "unisim/problems.hpp"
#include "unisim/rng.hpp"

namespace unisim {

// Unbiased omega-compressor: E[C(x)] = x, E||C(x)-x||^2 <= omega ||x||^2.
struct CompressionOperator {
  enum class Kind { identity, rand_k, dithering };
  Kind kind = Kind::identity;
  int d = 0;
  int k = 0;  // rand_k
  int s = 0;  // dithering levels
  double omega = 0.0;
};

CompressionOperator make_identity(int d);
CompressionOperator make_rand_k(int d, int k);
CompressionOperator make_dithering(int d, int s);
// spec strings: "identity", "randk:<k>", "dither:<s>"
CompressionOperator parse_compressor(const std::string& spec, int d);
std::string compressor_name(const CompressionOperator& op);

Vec compress(const CompressionOperator& op, const Vec& x, Rng& rng);
double omega_of(const CompressionOperator& op);
// idealized floats per transmitted message
long floats_per_message(const CompressionOperator& op);

struct CompressorReport {
  double max_bias_z = 0.0;
  double max_variance_ratio = 0.0;
  bool violation = false;
};

CompressorReport verify_compressor(const CompressionOperator& op,
                                   const std::vector<Vec>& trial_vectors,
                                   int samples, Rng& rng);

}  // namespace unisim

#endif
