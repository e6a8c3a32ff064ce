#include <cmath>
#include <vector>

#include "doctest.h"
#include "unisim/compression.hpp"

using namespace unisim;

namespace {

Vec random_vec(int d, Rng& rng) {
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.normal();
  return x;
}

// exact E||C(x)-x||^2 for the k-subset sparsifier by enumerating all subsets
double enumerate_randk_err(const Vec& x, int k) {
  const int d = static_cast<int>(x.size());
  double total = 0.0;
  long count = 0;
  const double scale = static_cast<double>(d) / k;
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    ++count;
    double e = 0.0;
    for (int i = 0; i < d; ++i) {
      double ci = (mask & (1u << i)) ? scale * x[i] : 0.0;
      e += (ci - x[i]) * (ci - x[i]);
    }
    total += e;
  }
  return total / count;
}

}  // namespace

TEST_CASE("identity passes vectors through with zero variance") {
  auto op = make_identity(5);
  CHECK(op.omega == 0.0);
  Rng rng(1);
  Vec x = random_vec(5, rng);
  CHECK((compress(op, x, rng) - x).norm() == 0.0);
  CompressorReport rep = verify_compressor(op, {x}, 1000, rng);
  CHECK(rep.max_variance_ratio == 0.0);
  CHECK_FALSE(rep.violation);
}

TEST_CASE("full-support sparsifier is the identity") {
  auto op = make_rand_k(6, 6);
  CHECK(op.omega == 0.0);
  Rng rng(2);
  Vec x = random_vec(6, rng);
  CHECK((compress(op, x, rng) - x).norm() == 0.0);
}

TEST_CASE("sparsifier variance constant matches exhaustive subset enumeration") {
  Rng rng(3);
  for (int d : {4, 6, 8}) {
    Vec x = random_vec(d, rng);
    for (int k = 1; k <= d; ++k) {
      auto op = make_rand_k(d, k);
      double expect = (static_cast<double>(d) / k - 1.0) * x.squaredNorm();
      CHECK(enumerate_randk_err(x, k) == doctest::Approx(expect).epsilon(1e-12));
      CHECK(op.omega == doctest::Approx(static_cast<double>(d) / k - 1.0));
    }
  }
}

TEST_CASE("sparsifier output has exactly k nonzeros and correct scale") {
  auto op = make_rand_k(8, 3);
  Rng rng(4);
  Vec x = random_vec(8, rng);
  for (int t = 0; t < 50; ++t) {
    Vec c = compress(op, x, rng);
    int nz = 0;
    for (int i = 0; i < 8; ++i) {
      if (c[i] != 0.0) {
        ++nz;
        CHECK(c[i] == doctest::Approx(8.0 / 3.0 * x[i]).epsilon(1e-12));
      }
    }
    CHECK(nz == 3);
  }
}

TEST_CASE("sparsifier sample mean is unbiased") {
  auto op = make_rand_k(4, 1);
  Rng rng(5);
  Vec x(4);
  x << 1.0, 1.0, 1.0, 1.0;
  const int samples = 20000;
  Vec mean = Vec::Zero(4);
  for (int s = 0; s < samples; ++s) mean += compress(op, x, rng);
  mean /= samples;
  // each coordinate is 4 w.p. 1/4 else 0: variance 3, sd of the mean ~0.012
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(mean[i] - 1.0) <= 4.0 * std::sqrt(3.0 / samples));
}

TEST_CASE("quantizer maps zero to zero and stays unbiased") {
  auto op = make_dithering(6, 4);
  Rng rng(6);
  CHECK(compress(op, Vec::Zero(6), rng).norm() == 0.0);
  Vec x = random_vec(6, rng);
  const int samples = 20000;
  Vec mean = Vec::Zero(6);
  for (int s = 0; s < samples; ++s) mean += compress(op, x, rng);
  mean /= samples;
  double step = x.norm() / 4.0;  // per-coordinate quantization step
  for (int i = 0; i < 6; ++i)
    CHECK(std::abs(mean[i] - x[i]) <= 4.0 * step / std::sqrt(samples) + 1e-9);
}

TEST_CASE("quantizer empirical variance respects its certificate") {
  auto op = make_dithering(9, 4);
  CHECK(op.omega == doctest::Approx(std::min(9.0 / 16.0, 3.0 / 4.0)));
  Rng rng(7);
  std::vector<Vec> vecs;
  for (int i = 0; i < 5; ++i) vecs.push_back(random_vec(9, rng).normalized());
  CompressorReport rep = verify_compressor(op, vecs, 20000, rng);
  CHECK_FALSE(rep.violation);
  CHECK(rep.max_bias_z <= 4.5);
}

TEST_CASE("spec strings round trip") {
  auto a = parse_compressor("identity", 7);
  CHECK(compressor_name(a) == "identity");
  auto b = parse_compressor("randk:3", 7);
  CHECK(compressor_name(b) == "randk:3");
  CHECK(b.omega == doctest::Approx(7.0 / 3.0 - 1.0));
  auto c = parse_compressor("dither:2", 7);
  CHECK(compressor_name(c) == "dither:2");
  CHECK_THROWS(parse_compressor("topk:3", 7));
  CHECK_THROWS(parse_compressor("randk:9", 7));
}

TEST_CASE("message sizes count idealized floats") {
  CHECK(floats_per_message(make_identity(10)) == 10);
  CHECK(floats_per_message(make_rand_k(10, 3)) == 6);
  CHECK(floats_per_message(make_dithering(10, 4)) == 10);
}
