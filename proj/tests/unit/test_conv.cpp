#include <catch_amalgamated.hpp>

#include "ddrppg/conv/conv3d.hpp"
#include "ddrppg/conv/descriptive.hpp"
#include "support.hpp"
#include "conv_oracles.hpp"

using namespace ddrppg;
using testing::code_of;
using V = Volume<double>;
using K = Kernel<double>;

namespace {

double contract(const V& g, const V& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += g[i] * y[i];
  return s;
}

K random_descriptor(std::uint64_t seed, const K& w, bool per_filter) {
  Rng rng(seed);
  K m(w.out_channels(), per_filter ? 1 : w.in_channels(), w.kt(), w.kh(), w.kw());
  for (auto& v : m.storage()) v = rng.uniform(0.0, 2.0);
  return m;
}

}  // namespace

TEST_CASE("vanilla convolution identity and zero kernels", "[conv]") {
  const auto f = testing::random_volume<double>(1, 2, 5, 4, 6);
  K id(2, 2, 3, 3, 3);
  id(0, 0, 1, 1, 1) = 1.0;
  id(1, 1, 1, 1, 1) = 1.0;
  CHECK(conv3d(f, id) == f);
  const auto z = conv3d(f, K(3, 2, 3, 3, 3));
  for (double v : z.storage()) CHECK(v == 0.0);
}

TEST_CASE("vanilla convolution matches the direct loop", "[conv]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = testing::random_volume<double>(seed, 1, 5, 5, 5);
    const auto w = testing::random_kernel<double>(seed + 10, 1, 1, 3, 3, 3);
    CHECK(max_abs_diff(conv3d_vanilla(f, w), oracle::vanilla(f, w)) < 1e-6);
    const auto f2 = testing::random_volume<double>(seed + 20, 3, 7, 4, 6);
    const auto w2 = testing::random_kernel<double>(seed + 30, 4, 3, 3, 3, 3);
    CHECK(max_abs_diff(conv3d(f2, w2), oracle::vanilla(f2, w2)) < 1e-6);
  }
}

TEST_CASE("float fast path agrees with the double oracle", "[conv]") {
  const auto f = testing::random_volume<double>(3, 3, 9, 6, 6);
  const auto w = testing::random_kernel<double>(4, 5, 3, 3, 3, 3);
  const auto fast = conv3d(f.cast<float>(), w.cast<float>()).cast<double>();
  CHECK(max_abs_diff(fast, oracle::vanilla(f, w)) < 1e-4);
}

TEST_CASE("convolution chunking over long clips", "[conv]") {
  // 4096 positions per chunk: 50 frames of 10x10 need several chunks
  const auto f = testing::random_volume<double>(5, 2, 50, 10, 10);
  const auto w = testing::random_kernel<double>(6, 2, 2, 3, 3, 3);
  CHECK(max_abs_diff(conv3d(f, w), oracle::vanilla(f, w)) < 1e-6);
  const auto g = testing::random_volume<double>(7, 2, 50, 10, 10);
  const auto grads = conv3d_backward(f, w, g);
  double worst = 0.0;
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
          for (std::size_t d = 0; d < 3; ++d) {
            double s = 0.0;
            for (long t = 0; t < 50; ++t)
              for (long y = 0; y < 10; ++y)
                for (long x = 0; x < 10; ++x)
                  s += g(o, t, y, x) * oracle::at_padded(f, i, t + static_cast<long>(a) - 1,
                                                         y + static_cast<long>(b) - 1, x + static_cast<long>(d) - 1);
            worst = std::max(worst, std::abs(s - grads.weight(o, i, a, b, d)));
          }
  CHECK(worst < 1e-9);
}

TEST_CASE("convolution shape errors", "[conv]") {
  const auto f = testing::random_volume<double>(1, 2, 3, 3, 3);
  CHECK(code_of([&] { conv3d(f, K(1, 3, 3, 3, 3)); }) == ErrorCode::shape_mismatch);
  CHECK(code_of([&] { conv3d(f, K(1, 2, 2, 3, 3)); }) == ErrorCode::shape_mismatch);
  CHECK(code_of([&] { conv3d_backward(f, K(1, 2, 3, 3, 3), V(2, 3, 3, 3)); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("2-D LDC reductions and oracle", "[conv]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = testing::random_volume<double>(seed, 2, 4, 5, 5);
    const auto w = testing::random_kernel<double>(seed + 1, 3, 2, 1, 3, 3);
    const auto m = random_descriptor(seed + 2, w, true);
    const auto vanilla = oracle::vanilla(f, w);
    CHECK(ldc2d_forward(f, w, m, 0.0) == conv3d(f, w));
    CHECK(max_abs_diff(ldc2d_forward(f, w, m, 0.0), vanilla) < 1e-12);
    CHECK(ldc2d_forward(f, w, ones_descriptor(w), 0.63) == conv3d(f, w));
    CHECK(max_abs_diff(ldc2d_forward(f, w, m, 0.4), oracle::ldc(f, w, m, 0.4)) < 1e-6);
  }
  const auto f = testing::random_volume<double>(9, 2, 4, 5, 5);
  CHECK(code_of([&] {
          const auto w = testing::random_kernel<double>(1, 1, 2, 3, 3, 3);
          ldc2d_forward(f, w, ones_descriptor(w), 0.5);
        }) == ErrorCode::shape_mismatch);
}

TEST_CASE("TDC reductions, closed form and oracle", "[conv]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = testing::random_volume<double>(seed, 2, 5, 4, 4);
    const auto w = testing::random_kernel<double>(seed + 1, 3, 2, 3, 3, 3);
    CHECK(tdc_forward(f, w, 0.0) == conv3d(f, w));
    CHECK(max_abs_diff(tdc_forward(f, w, 0.3 + 0.1 * seed), oracle::tdc(f, w, 0.3 + 0.1 * seed)) < 1e-6);
  }
  const double c = 0.8, theta = 0.6;
  V f(1, 5, 5, 5, c);
  const auto w = testing::random_kernel<double>(42, 1, 1, 3, 3, 3);
  double s_prev = 0, s_mid = 0, s_next = 0;
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t d = 0; d < 3; ++d) {
      s_prev += w(0, 0, 0, b, d);
      s_mid += w(0, 0, 1, b, d);
      s_next += w(0, 0, 2, b, d);
    }
  const auto y = tdc_forward(f, w, theta);
  CHECK(y(0, 2, 2, 2) == Catch::Approx(c * ((1 - theta) * (s_prev + s_next) + s_mid)).margin(1e-12));
}

TEST_CASE("3-D LDC reductions and oracle", "[conv]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = testing::random_volume<double>(seed, 2, 5, 4, 5);
    const auto w = testing::random_kernel<double>(seed + 1, 3, 2, 3, 3, 3);
    for (bool per_filter : {true, false}) {
      const auto m = random_descriptor(seed + 2, w, per_filter);
      CHECK(ldc3d_forward(f, w, m, 0.0) == conv3d(f, w));
      CHECK(max_abs_diff(ldc3d_forward(f, w, ones_descriptor(w, per_filter), 0.9), oracle::vanilla(f, w)) < 1e-12);
      CHECK(max_abs_diff(ldc3d_forward(f, w, m, 0.7), oracle::ldc(f, w, m, 0.7)) < 1e-6);
    }
  }
}

TEST_CASE("mixing scalars outside [0, 1] are rejected", "[conv]") {
  const auto f = testing::random_volume<double>(1, 1, 3, 3, 3);
  const auto w = testing::random_kernel<double>(2, 1, 1, 3, 3, 3);
  const auto m = ones_descriptor(w);
  CHECK(code_of([&] { ldc3d_forward(f, w, m, 1.5); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { ldc3d_forward(f, w, m, -0.1); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { tdc_forward(f, w, 2.0); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { ldc3d_forward(f, w, K(1, 1, 3, 3, 1), 0.5); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("tdc_descriptor examples", "[conv]") {
  K w(1, 1, 3, 3, 3);
  Rng rng(3);
  for (auto& v : w.storage()) v = rng.uniform(-1, 1);
  // make the neighbour slices cancel
  double side = 0.0;
  for (std::size_t i = 0; i < 9; ++i) side += w[i] + w[18 + i];
  w[0] -= side;
  const auto m = tdc_descriptor(w);
  for (double v : m.storage()) CHECK(v == Catch::Approx(1.0).margin(1e-12));

  K zero_centre = testing::random_kernel<double>(4, 2, 2, 3, 3, 3);
  zero_centre(1, 0, 1, 1, 1) = 0.0;
  CHECK(code_of([&] { tdc_descriptor(zero_centre); }) == ErrorCode::singularity);

  const auto g = testing::random_kernel<double>(5, 2, 3, 3, 3, 3);
  const auto mg = tdc_descriptor(g);
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) {
      double s = 0.0;
      for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t d = 0; d < 3; ++d) s += g(o, i, 0, b, d) + g(o, i, 2, b, d);
      const double ws = -s / g(o, i, 1, 1, 1);
      CHECK(mg(o, i, 1, 1, 1) - 1.0 == Catch::Approx(ws).margin(1e-12));
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
          for (std::size_t d = 0; d < 3; ++d)
            if (!(a == 1 && b == 1 && d == 1)) CHECK(mg(o, i, a, b, d) == 1.0);
    }
}

TEST_CASE("3-D LDC with the TDC descriptor equals TDC", "[conv]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 500);
    const auto f = testing::random_volume<double>(seed, 2, 6, 5, 5);
    const auto w = testing::random_kernel<double>(seed + 1, 3, 2, 3, 3, 3);
    const double eps = rng.uniform();
    CHECK(max_abs_diff(ldc3d_forward(f, w, tdc_descriptor(w), eps), tdc_forward(f, w, eps)) < 1e-6);
  }
}

TEST_CASE("descriptive convolutions are linear in the input", "[conv]") {
  const auto f1 = testing::random_volume<double>(1, 2, 4, 4, 4), f2 = testing::random_volume<double>(2, 2, 4, 4, 4);
  const auto w = testing::random_kernel<double>(3, 2, 2, 3, 3, 3);
  const auto m = random_descriptor(4, w, true);
  const double a = 1.7, b = -0.6;
  const V mix(f1 * a + f2 * b);
  auto lin = [&](auto&& op) {
    const V lhs = op(mix);
    const V rhs(op(f1) * a + op(f2) * b);
    return max_abs_diff(lhs, rhs);
  };
  CHECK(lin([&](const V& f) { return ldc3d_forward(f, w, m, 0.7); }) < 1e-12);
  CHECK(lin([&](const V& f) { return tdc_forward(f, w, 0.7); }) < 1e-12);
  const auto w2 = testing::random_kernel<double>(5, 2, 2, 1, 3, 3);
  const auto m2 = random_descriptor(6, w2, false);
  CHECK(lin([&](const V& f) { return ldc2d_forward(f, w2, m2, 0.3); }) < 1e-12);
}

TEST_CASE("3-D LDC output moves continuously with epsilon", "[conv]") {
  const auto f = testing::random_volume<double>(7, 2, 4, 4, 4);
  const auto w = testing::random_kernel<double>(8, 2, 2, 3, 3, 3);
  const auto m = random_descriptor(9, w, true);
  const V gap(oracle::descriptive_term(f, w, m) - oracle::vanilla(f, w));
  double bound = 0.0;
  for (double v : gap.storage()) bound = std::max(bound, std::abs(v));
  for (double eps : {0.0, 0.2, 0.5, 0.9}) {
    const double d = 0.05;
    const auto diff = max_abs_diff(ldc3d_forward(f, w, m, eps), ldc3d_forward(f, w, m, eps + d));
    CHECK(diff <= d * bound + 1e-12);
  }
}

TEST_CASE("convolution gradients match central differences", "[conv]") {
  const auto f = testing::random_volume<double>(10, 2, 4, 3, 4);
  const auto w = testing::random_kernel<double>(11, 3, 2, 3, 3, 3);
  const auto g = testing::random_volume<double>(12, 3, 4, 3, 4);
  const auto grads = conv3d_backward(f, w, g);
  auto fv = f;
  auto wv = w;
  auto loss = [&] { return contract(g, conv3d(fv, wv)); };
  for (std::size_t i = 0; i < f.size(); i += 3)
    CHECK(testing::rel_err(grads.input[i], testing::central_diff(loss, fv[i], 1e-3)) < 1e-4);
  for (std::size_t i = 0; i < w.size(); i += 5)
    CHECK(testing::rel_err(grads.weight[i], testing::central_diff(loss, wv[i], 1e-3)) < 1e-4);
}

TEST_CASE("LDC gradients match central differences", "[conv]") {
  for (bool per_filter : {true, false})
    for (std::size_t kt : {1u, 3u}) {
      const auto f = testing::random_volume<double>(20 + kt, 2, 4, 4, 3);
      const auto w = testing::random_kernel<double>(21 + kt, 2, 2, kt, 3, 3);
      const auto m0 = random_descriptor(22 + kt, w, per_filter);
      const auto g = testing::random_volume<double>(23 + kt, 2, 4, 4, 3);
      const double eps0 = 0.6;
      const auto grads = ldc_backward(f, w, m0, eps0, g);
      auto fv = f;
      auto wv = w;
      auto mv = m0;
      double eps = eps0;
      auto loss = [&] { return contract(g, ldc3d_forward(fv, wv, mv, eps)); };
      for (std::size_t i = 0; i < f.size(); i += 4)
        CHECK(testing::rel_err(grads.input[i], testing::central_diff(loss, fv[i], 1e-3)) < 1e-4);
      for (std::size_t i = 0; i < w.size(); i += 3)
        CHECK(testing::rel_err(grads.w[i], testing::central_diff(loss, wv[i], 1e-3)) < 1e-4);
      for (std::size_t i = 0; i < m0.size(); ++i)
        CHECK(testing::rel_err(grads.m[i], testing::central_diff(loss, mv[i], 1e-3)) < 1e-4);
      CHECK(testing::rel_err(grads.epsilon, testing::central_diff(loss, eps, 1e-3)) < 1e-4);
    }
}

TEST_CASE("LDC epsilon gradient is the descriptive minus vanilla contraction", "[conv]") {
  const auto f = testing::random_volume<double>(30, 2, 4, 4, 4);
  const auto w = testing::random_kernel<double>(31, 3, 2, 3, 3, 3);
  const auto m = random_descriptor(32, w, true);
  const auto g = testing::random_volume<double>(33, 3, 4, 4, 4);
  const V gap(oracle::descriptive_term(f, w, m) - oracle::vanilla(f, w));
  CHECK(ldc_backward(f, w, m, 0.35, g).epsilon == Catch::Approx(contract(g, gap)).epsilon(1e-10));
  const auto at_zero = ldc_backward(f, w, m, 0.0, g);
  for (double v : at_zero.m.storage()) CHECK(v == 0.0);
}

TEST_CASE("TDC gradients match central differences", "[conv]") {
  const auto f = testing::random_volume<double>(40, 2, 5, 3, 3);
  const auto w = testing::random_kernel<double>(41, 2, 2, 3, 3, 3);
  const auto g = testing::random_volume<double>(42, 2, 5, 3, 3);
  const auto grads = tdc_backward(f, w, 0.45, g);
  auto fv = f;
  auto wv = w;
  double theta = 0.45;
  auto loss = [&] { return contract(g, tdc_forward(fv, wv, theta)); };
  for (std::size_t i = 0; i < f.size(); i += 3)
    CHECK(testing::rel_err(grads.input[i], testing::central_diff(loss, fv[i], 1e-3)) < 1e-4);
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(testing::rel_err(grads.w[i], testing::central_diff(loss, wv[i], 1e-3)) < 1e-4);
  CHECK(testing::rel_err(grads.theta, testing::central_diff(loss, theta, 1e-3)) < 1e-4);
}
