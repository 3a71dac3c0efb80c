#include <catch_amalgamated.hpp>

#include <algorithm>
#include <locale>
#include <sstream>

#include "ddrppg/clip/augment.hpp"
#include "ddrppg/signal/classical.hpp"
#include "ddrppg/signal/correlation.hpp"
#include "ddrppg/signal/spectrum.hpp"
#include "ddrppg/signal/trace_csv.hpp"
#include "support.hpp"

using namespace ddrppg;
using Catch::Approx;
using testing::code_of;

namespace {

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_CASE("psd of a pure tone has a single dominant bin", "[signal]") {
  const SignalTrace tr(testing::tone(1.5, 30.0, 900), 30.0);
  const auto spec = psd(tr);
  const auto k = argmax(spec.power);
  CHECK(spec.freqs[k] == Approx(1.5).margin(1e-12));
  double rest = 0.0;
  for (std::size_t i = 0; i < spec.power.size(); ++i)
    if (i != k) rest = std::max(rest, spec.power[i]);
  CHECK(rest < 1e-6 * spec.power[k]);
}

TEST_CASE("psd of a constant trace is empty after mean removal", "[signal]") {
  const SignalTrace tr(std::vector<double>(300, 3.25), 30.0);
  for (double p : psd(tr).power) CHECK(p < 1e-12);
}

TEST_CASE("psd keeps equal tones equal and matches a direct DFT", "[signal]") {
  const auto x = testing::add(testing::tone(1.0, 30.0, 900), testing::tone(2.0, 30.0, 900, 1.0, 0.4));
  const SignalTrace tr(x, 30.0);
  const auto spec = psd(tr);
  const double df = 30.0 / 900.0;
  const auto k1 = static_cast<std::size_t>(std::lround((1.0 - spec.freqs.front()) / df));
  const auto k2 = static_cast<std::size_t>(std::lround((2.0 - spec.freqs.front()) / df));
  REQUIRE(spec.freqs[k1] == Approx(1.0));
  REQUIRE(spec.freqs[k2] == Approx(2.0));
  CHECK(spec.power[k1] / spec.power[k2] == Approx(1.0).epsilon(0.01));

  const auto centred = demeaned(x);
  double total = 0.0, oracle = 0.0;
  for (std::size_t i = 0; i < spec.power.size(); ++i) {
    const auto bin = static_cast<std::size_t>(std::lround(spec.freqs[i] / df));
    const double ref = testing::dft_power(centred, bin, 900);
    CHECK(spec.power[i] == Approx(ref).margin(1e-6));
    total += spec.power[i];
    oracle += ref;
  }
  CHECK(total == Approx(oracle).epsilon(1e-10));
}

TEST_CASE("psd invariants hold for random traces", "[signal]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SignalTrace tr(testing::gaussian(seed, 257), 25.0);
    for (auto opts : {PsdOptions{}, PsdOptions{Window::hann, 2}}) {
      const auto spec = psd(tr, kHrBand, opts);
      for (std::size_t i = 0; i < spec.power.size(); ++i) {
        CHECK(spec.power[i] >= 0.0);
        if (i) CHECK(spec.freqs[i] > spec.freqs[i - 1]);
        CHECK(spec.freqs[i] >= kHrBand.lo - 1e-12);
        CHECK(spec.freqs[i] <= kHrBand.hi + 1e-12);
      }
    }
  }
}

TEST_CASE("psd rejects bands beyond Nyquist", "[signal]") {
  const SignalTrace tr(testing::tone(1.0, 8.0, 64), 8.0);
  CHECK(code_of([&] { psd(tr, Band{0.66, 4.16}); }) == ErrorCode::invalid_band);
  CHECK(code_of([&] { psd(tr, Band{-0.1, 2.0}); }) == ErrorCode::invalid_band);
  CHECK(code_of([&] { psd(tr, Band{3.0, 2.0}); }) == ErrorCode::invalid_band);
}

TEST_CASE("estimate_hr reads 60 times the in-band peak", "[signal]") {
  CHECK(estimate_hr(SignalTrace(testing::tone(1.5, 30.0, 900), 30.0)) == Approx(90.0));
  CHECK(estimate_hr(SignalTrace(testing::tone(4.0, 30.0, 900), 30.0)) == Approx(240.0));
  const auto mixed = testing::add(testing::tone(0.5, 30.0, 900, 5.0), testing::tone(1.2, 30.0, 900, 0.5));
  CHECK(estimate_hr(SignalTrace(mixed, 30.0)) == Approx(72.0));
}

TEST_CASE("estimate_hr is exact to one bin for in-band tones", "[signal]") {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const double f = rng.uniform(0.7, 4.1);
    const std::size_t n = 300 + rng.below(700);
    const double bin = 30.0 / static_cast<double>(n);
    const double hr = estimate_hr(SignalTrace(testing::tone(f, 30.0, n, 1.0, rng.uniform(0, 6)), 30.0));
    CHECK(std::abs(hr / 60.0 - f) <= bin);
  }
}

TEST_CASE("estimate_hr errors without an in-band peak", "[signal]") {
  const SignalTrace flat(std::vector<double>(300, 1.0), 30.0);
  CHECK(code_of([&] { estimate_hr(flat); }) == ErrorCode::no_peak);
  const SignalTrace tr(testing::tone(1.0, 30.0, 30), 30.0);
  CHECK(code_of([&] { estimate_hr(tr, Band{1.1, 1.9}); }) == ErrorCode::no_peak);
  CHECK(code_of([] { estimate_hr(Spectrum{}); }) == ErrorCode::no_peak);
}

TEST_CASE("negative pearson examples", "[signal]") {
  const SignalTrace a({1, 2, 3, 4}, 1.0), b({1, 3, 2, 4}, 1.0), neg({-1, -2, -3, -4}, 1.0);
  CHECK(negative_pearson(a, a) == Approx(0.0).margin(1e-15));
  CHECK(negative_pearson(a, neg) == Approx(2.0));
  // cov = 4, var_a = var_b = 5 over deviations, Pearson 0.8
  CHECK(negative_pearson(a, b) == Approx(0.2).margin(1e-14));
  const SignalTrace flat({2, 2, 2, 2}, 1.0);
  CHECK(code_of([&] { negative_pearson(a, flat); }) == ErrorCode::zero_variance);
}

TEST_CASE("negative pearson symmetry and affine invariance", "[signal]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = testing::gaussian(seed, 64), b = testing::gaussian(seed + 100, 64);
    Rng rng(seed);
    const double c = rng.uniform(0.01, 10.0), d = rng.uniform(-5.0, 5.0);
    std::vector<double> cb(b);
    for (auto& v : cb) v = c * v + d;
    const double np = negative_pearson(a, b);
    CHECK(np == Approx(negative_pearson(b, a)).margin(1e-12));
    CHECK(np == Approx(negative_pearson(a, cb)).margin(1e-12));
    CHECK(np >= 0.0);
    CHECK(np <= 2.0);
  }
}

TEST_CASE("normalized correlation examples", "[signal]") {
  const auto a = testing::gaussian(3, 50);
  std::vector<double> na(a);
  for (auto& v : na) v = -v;
  CHECK(normalized_correlation(a, a) == Approx(1.0));
  CHECK(normalized_correlation(a, na) == Approx(-1.0));
  const auto s = testing::tone(2.0, 40.0, 200);
  const auto c = testing::tone(2.0, 40.0, 200, 1.0, std::numbers::pi / 2);
  CHECK(std::abs(normalized_correlation(s, c)) < 1e-10);
  const std::vector<double> z(50, 0.0);
  CHECK(code_of([&] { normalized_correlation(a, z); }) == ErrorCode::zero_energy);
  CHECK(code_of([&] { normalized_correlation(a, std::vector<double>(49, 1.0)); }) == ErrorCode::shape_mismatch);
}

TEST_CASE("normalized correlation flips sign with the scale", "[signal]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = testing::gaussian(seed, 40), b = testing::gaussian(seed + 7, 40);
    const double c = seed % 2 ? 3.5 : -0.25;
    std::vector<double> cb(b);
    for (auto& v : cb) v *= c;
    CHECK(normalized_correlation(a, cb) == Approx((c > 0 ? 1 : -1) * normalized_correlation(a, b)).margin(1e-12));
  }
}

TEST_CASE("running correlation of a sine with itself peaks at lag 0", "[signal]") {
  const auto s = testing::tone(1.3, 30.0, 240);
  const auto prof = running_correlation(s, s);
  CHECK(prof.lags.front() == -239);
  CHECK(prof.lags.back() == 239);
  CHECK(prof.argmax() == 0);
  CHECK(prof.at(0) == Approx(1.0));
}

TEST_CASE("running correlation finds a 17 sample delay", "[signal]") {
  const auto a = testing::gaussian(5, 300);
  std::vector<double> b(300, 0.0);
  for (std::size_t v = 17; v < 300; ++v) b[v] = a[v - 17];
  const auto prof = running_correlation(a, b);
  CHECK(prof.argmax() == 17);
  // brute force over every lag with an independent shift
  for (long tau = -299; tau <= 299; ++tau) {
    double s = 0.0, ea = 0.0, eb = 0.0;
    for (long v = 0; v < 300; ++v) {
      const long src = v - tau;
      const double av = src >= 0 && src < 300 ? a[static_cast<std::size_t>(src)] : 0.0;
      s += av * b[static_cast<std::size_t>(v)];
      ea += av * av;
      eb += b[static_cast<std::size_t>(v)] * b[static_cast<std::size_t>(v)];
    }
    CHECK(prof.at(tau) == Approx(s / std::sqrt(ea * eb)).margin(1e-12));
  }
}

TEST_CASE("running correlation of independent noise stays small", "[signal]") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto prof = running_correlation(testing::gaussian(seed, 1000), testing::gaussian(seed + 1000, 1000));
    worst = std::max(worst, prof.peak_abs());
    for (double v : prof.values) REQUIRE(std::abs(v) <= 1.0 + 1e-9);
  }
  CHECK(worst < 0.2);
}

TEST_CASE("running correlation flags lags without energy", "[signal]") {
  std::vector<double> a(20, 0.0);
  a[15] = 1.0;
  a[16] = -2.0;
  const auto b = testing::gaussian(9, 20);
  const auto prof = running_correlation(a, b);
  // tau = -17 keeps a[17..19], all zero
  CHECK(prof.zero_energy[prof.index_of(-17)] == 1);
  CHECK(prof.at(-17) == 0.0);
  CHECK(prof.zero_energy[prof.index_of(0)] == 0);
}

TEST_CASE("running correlation is maximal at zero lag for self correlation", "[signal]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = testing::gaussian(seed, 128);
    const auto prof = running_correlation(a, a);
    CHECK(prof.max_value() == Approx(prof.at(0)));
  }
}

TEST_CASE("decomposition degenerate cases", "[signal]") {
  const auto r = testing::gaussian(1, 100), nbg = testing::gaussian(2, 100);
  const std::vector<double> zero(100, 0.0);
  const auto d = decompose_correlation(r, zero, nbg, 5);
  CHECK(d.alpha == Approx(1.0));
  CHECK(d.beta == 0.0);
  const auto rs = [&] {
    std::vector<double> s(100, 0.0);
    for (long v = 5; v < 100; ++v) s[static_cast<std::size_t>(v)] = r[static_cast<std::size_t>(v - 5)];
    return s;
  }();
  CHECK(d.reconstructed == Approx(normalized_correlation(rs, nbg)).margin(1e-12));
  const auto d2 = decompose_correlation(zero, r, nbg, -3);
  CHECK(d2.alpha == 0.0);
  CHECK(d2.beta == Approx(1.0));
  CHECK(code_of([&] { decompose_correlation(zero, zero, nbg, 0); }) == ErrorCode::zero_energy);
  CHECK(code_of([&] { decompose_correlation(r, r, nbg, 100); }) == ErrorCode::invalid_argument);
}

TEST_CASE("decomposition reconstruction identity", "[signal]") {
  Rng lag(77);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = testing::gaussian(seed, 300), n = testing::gaussian(seed + 50, 300, 2.0);
    const auto nbg = testing::gaussian(seed + 99, 300);
    const long tau = static_cast<long>(lag.below(599)) - 299;
    const auto d = decompose_correlation(r, n, nbg, tau);
    CHECK(std::abs(d.reconstructed - d.direct) < 1e-10);
    CHECK(d.alpha >= 0.0);
    CHECK(d.beta >= 0.0);
  }
}

TEST_CASE("decomposition profile agrees with pointwise decomposition", "[signal]") {
  const auto r = testing::gaussian(4, 60), n = testing::gaussian(5, 60), nbg = testing::gaussian(6, 60);
  const auto prof = decomposition_profile(r, n, nbg);
  for (long tau : {-59L, -20L, 0L, 13L, 59L}) {
    const auto d = decompose_correlation(r, n, nbg, tau);
    const auto k = prof.index_of(tau);
    CHECK(prof.alpha[k] == Approx(d.alpha).margin(1e-12));
    CHECK(prof.beta[k] == Approx(d.beta).margin(1e-12));
    CHECK(prof.values[k] == Approx(d.direct).margin(1e-12));
  }
}

TEST_CASE("classical extraction of a constant clip has zero variance", "[signal]") {
  Clip clip(90, 8, 8, 3, 30.0);
  for (std::size_t t = 0; t < 90; ++t)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        clip.at(t, y, x, 0) = 0.61f;
        clip.at(t, y, x, 1) = 0.43f;
        clip.at(t, y, x, 2) = 0.37f;
      }
  const SignalTrace ref(testing::gaussian(1, 90), 30.0);
  for (auto m : {ClassicalMethod::pos, ClassicalMethod::chrom, ClassicalMethod::green}) {
    const auto tr = classical_extract(clip, m);
    CHECK(tr.size() == 90);
    CHECK(code_of([&] { negative_pearson(tr, ref); }) == ErrorCode::zero_variance);
  }
}

TEST_CASE("classical extraction recovers an injected pulse", "[signal]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto clip = testing::pulse_clip(seed, 300, 16, 72.0);
    const double bin = 60.0 * 30.0 / 300.0;
    for (auto m : {ClassicalMethod::pos, ClassicalMethod::chrom, ClassicalMethod::green}) {
      const auto tr = classical_extract(clip, m);
      CHECK(std::abs(estimate_hr(tr) - 72.0) <= bin);
    }
  }
}

TEST_CASE("classical extraction is unchanged by right-angle rotations and flips", "[signal]") {
  const auto clip = testing::pulse_clip(3, 150, 12, 84.0);
  for (auto m : {ClassicalMethod::pos, ClassicalMethod::chrom}) {
    const auto ref = classical_extract(clip, m);
    for (auto op : kAugmentOps) {
      const auto tr = classical_extract(apply_augment(clip, op), m);
      CHECK(tr.vec() == ref.vec());
      CHECK(estimate_hr(tr) - estimate_hr(ref) == 0.0);
    }
  }
}

TEST_CASE("classical extraction rejects non-RGB clips", "[signal]") {
  Clip gray(30, 4, 4, 1, 30.0, 0.5f);
  CHECK(code_of([&] { classical_extract(gray, ClassicalMethod::pos); }) == ErrorCode::unsupported_format);
  CHECK(code_of([&] { classical_extract(gray, ClassicalMethod::chrom); }) == ErrorCode::unsupported_format);
}

namespace {
struct CommaDecimal : std::numpunct<char> {
  char do_decimal_point() const override { return ','; }
};
}  // namespace

TEST_CASE("trace CSV round trip is exact and locale independent", "[signal]") {
  const auto previous = std::locale::global(std::locale(std::locale::classic(), new CommaDecimal));
  const SignalTrace tr(testing::gaussian(8, 33, 1e-3), 29.97, TraceKind::interference);
  std::stringstream ss;
  write_trace_csv(ss, tr);
  const std::string text = ss.str();
  CHECK(text.rfind("fs_hz,kind\n29.97,interference\n", 0) == 0);
  const auto back = read_trace_csv(ss);
  std::locale::global(previous);
  CHECK(back.vec() == tr.vec());
  CHECK(back.fs() == tr.fs());
  CHECK(back.kind() == TraceKind::interference);
}

TEST_CASE("trace CSV rejects malformed input", "[signal]") {
  std::stringstream bad_header("fs,kind\n30,raw\n1\n2\n");
  CHECK(code_of([&] { read_trace_csv(bad_header); }) == ErrorCode::parse);
  std::stringstream bad_value("fs_hz,kind\n30,raw\n1\nabc\n");
  CHECK(code_of([&] { read_trace_csv(bad_value); }) == ErrorCode::parse);
  std::stringstream bad_kind("fs_hz,kind\n30,ppg\n1\n2\n");
  CHECK(code_of([&] { read_trace_csv(bad_kind); }) == ErrorCode::parse);
  std::stringstream too_short("fs_hz,kind\n30,raw\n1\n");
  CHECK(code_of([&] { read_trace_csv(too_short); }) == ErrorCode::invalid_argument);
}

TEST_CASE("signal traces validate their invariants", "[signal]") {
  CHECK(code_of([] { SignalTrace({1.0}, 30.0); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { SignalTrace({1.0, 2.0}, 0.0); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { SignalTrace({1.0, std::nan("")}, 30.0); }) == ErrorCode::invalid_argument);
}
